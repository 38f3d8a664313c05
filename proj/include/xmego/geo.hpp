#pragma once

#include <cmath>
#include <numbers>

#include "xmego/error.hpp"

namespace xmego::geo {

inline constexpr double kEarthRadiusM = 6371000.0;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;

  friend bool operator==(const LatLon&, const LatLon&) = default;
};

inline constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

inline bool valid(LatLon p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
         p.lon >= -180.0 && p.lon <= 180.0;
}

inline void require_valid(LatLon p) {
  if (!valid(p)) {
    throw Error(ErrorCode::InvalidCoordinate, "coordinate out of range",
                std::to_string(p.lat) + "," + std::to_string(p.lon));
  }
}

// Great-circle distance in metres (haversine).
inline double distance_m(LatLon a, LatLon b) {
  const double phi1 = deg2rad(a.lat);
  const double phi2 = deg2rad(b.lat);
  const double dphi = phi2 - phi1;
  const double dlambda = deg2rad(b.lon - a.lon);
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::fmin(1.0, std::fmax(0.0, h));
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

// Initial bearing from `from` towards `to`, degrees clockwise from north in [0,360).
inline double initial_bearing_deg(LatLon from, LatLon to) {
  const double phi1 = deg2rad(from.lat);
  const double phi2 = deg2rad(to.lat);
  const double dlambda = deg2rad(to.lon - from.lon);
  const double y = std::sin(dlambda) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
  double deg = rad2deg(std::atan2(y, x));
  deg = std::fmod(deg + 360.0, 360.0);
  return deg >= 360.0 ? 0.0 : deg;
}

// Point reached by travelling `distance` metres from `origin` on `bearing`.
inline LatLon destination(LatLon origin, double bearing_deg, double distance) {
  const double delta = distance / kEarthRadiusM;
  const double theta = deg2rad(bearing_deg);
  const double phi1 = deg2rad(origin.lat);
  const double lambda1 = deg2rad(origin.lon);
  const double phi2 =
      std::asin(std::sin(phi1) * std::cos(delta) + std::cos(phi1) * std::sin(delta) * std::cos(theta));
  const double lambda2 =
      lambda1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(phi1),
                           std::cos(delta) - std::sin(phi1) * std::sin(phi2));
  double lon = rad2deg(lambda2);
  lon = std::fmod(lon + 540.0, 360.0) - 180.0;
  return {rad2deg(phi2), lon};
}

}  // namespace xmego::geo
