#pragma once

// Reference implementations used only by tests. They share no code with the
// library: distances and bearings come from 3-D unit vectors, dates from a
// days-since-epoch count.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace oracle {

constexpr double kPi = 3.14159265358979323846;
constexpr double kRadius = 6371000.0;

struct Vec3 {
  double x, y, z;
};

inline Vec3 unit_vector(double lat_deg, double lon_deg) {
  const double la = lat_deg * kPi / 180.0, lo = lon_deg * kPi / 180.0;
  return {std::cos(la) * std::cos(lo), std::cos(la) * std::sin(lo), std::sin(la)};
}

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 sub(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }

// Great-circle distance from the chord length.
inline double distance(double lat1, double lon1, double lat2, double lon2) {
  const Vec3 d = sub(unit_vector(lat1, lon1), unit_vector(lat2, lon2));
  const double chord = std::sqrt(dot(d, d));
  return 2.0 * std::asin(std::min(1.0, chord / 2.0)) * kRadius;
}

// Initial bearing from the local east/north frame at the start point.
inline double bearing(double lat1, double lon1, double lat2, double lon2) {
  const double la = lat1 * kPi / 180.0, lo = lon1 * kPi / 180.0;
  const Vec3 north{-std::sin(la) * std::cos(lo), -std::sin(la) * std::sin(lo), std::cos(la)};
  const Vec3 east{-std::sin(lo), std::cos(lo), 0.0};
  const Vec3 d = sub(unit_vector(lat2, lon2), unit_vector(lat1, lon1));
  double b = std::atan2(dot(d, east), dot(d, north)) * 180.0 / kPi;
  if (b < 0) b += 360.0;
  return b >= 360.0 ? 0.0 : b;
}

// Which cardinal sector a bearing belongs to: 0 north, 1 east, 2 south,
// 3 west. Exact diagonals go to north or south.
inline int sector(double b) {
  if (b == 45.0 || b == 315.0) return 0;
  if (b == 135.0 || b == 225.0) return 2;
  int best = 0;
  double best_gap = 1e9;
  for (int s = 0; s < 4; ++s) {
    double gap = std::fabs(b - 90.0 * s);
    gap = std::min(gap, 360.0 - gap);
    if (gap < best_gap) {
      best_gap = gap;
      best = s;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Calendar

inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline std::array<int, 3> civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return {static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

inline bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

inline int days_in_month(int y, int m) {
  static constexpr int len[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && leap(y) ? 29 : len[m - 1];
}

inline int stamp(int y, int m, int d) { return y * 10000 + m * 100 + d; }

inline int minus_days(int s, int n) {
  auto c = civil_from_days(days_from_civil(s / 10000, (s / 100) % 100, s % 100) - n);
  return stamp(c[0], c[1], c[2]);
}

// Whole months back; the day is clamped to the target month's length.
inline int minus_months(int s, int n) {
  int y = s / 10000, m = (s / 100) % 100, d = s % 100;
  int total = y * 12 + (m - 1) - n;
  y = total / 12;
  m = total % 12 + 1;
  return stamp(y, m, std::min(d, days_in_month(y, m)));
}

// ---------------------------------------------------------------------------
// Brute-force interpretation

struct Fact {
  std::string name;
  std::vector<std::string> aliases;
  double lat, lon;
};

struct Media {
  std::string id;
  double lat, lon;
  int timestamp;
};

struct Radii {
  double max_radius = 500.0, near_radius = 100.0, here_radius = 100.0, view_radius = 50.0;
};

enum class Query { Front, Behind, Left, Right, Near, ViewEntity, Day, Month };

inline const Fact* lookup(const std::vector<Fact>& facts, const std::string& name) {
  for (const auto& f : facts) {
    if (f.name == name) return &f;
  }
  for (const auto& f : facts) {
    if (std::find(f.aliases.begin(), f.aliases.end(), name) != f.aliases.end()) return &f;
  }
  return nullptr;
}

// nullopt when the entity does not exist.
inline std::optional<std::set<std::string>> answer(Query q, const std::string& entity, int value,
                                                   const std::vector<Fact>& facts, const std::vector<Media>& media,
                                                   double here_lat, double here_lon, const Radii& r = {}) {
  std::set<std::string> out;
  const Fact* e = nullptr;
  if (q != Query::Day && q != Query::Month) {
    e = lookup(facts, entity);
    if (!e) return std::nullopt;
  }
  for (const auto& m : media) {
    bool hit = false;
    switch (q) {
      case Query::Front:
      case Query::Behind:
      case Query::Left:
      case Query::Right: {
        const double d = distance(e->lat, e->lon, m.lat, m.lon);
        if (d == 0.0 || d > r.max_radius) break;
        const int want = q == Query::Front ? 0 : q == Query::Right ? 1 : q == Query::Behind ? 2 : 3;
        hit = sector(bearing(e->lat, e->lon, m.lat, m.lon)) == want;
        break;
      }
      case Query::Near: {
        const double d = distance(e->lat, e->lon, m.lat, m.lon);
        hit = d > 0.0 && d <= r.near_radius;
        break;
      }
      case Query::ViewEntity: hit = distance(e->lat, e->lon, m.lat, m.lon) <= r.view_radius; break;
      case Query::Day: hit = m.timestamp == value; break;
      case Query::Month:
        hit = (m.timestamp / 100) % 100 == value && distance(here_lat, here_lon, m.lat, m.lon) <= r.here_radius;
        break;
    }
    if (hit) out.insert(m.id);
  }
  return out;
}

}  // namespace oracle
