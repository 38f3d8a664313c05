#pragma once

// JSON encodings shared by the media manifest, the persisted fact file and
// the training corpus.

#include <istream>
#include <string>
#include <vector>

#include "json.hpp"
#include "xmego/world.hpp"

namespace xmego {

using json = nlohmann::json;

namespace detail {

template <typename T>
T required(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) {
    throw Error(ErrorCode::InvalidArgument, std::string("missing field '") + field + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::InvalidArgument, std::string("field '") + field + "' has the wrong type");
  }
}

}  // namespace detail

inline json to_json(const MediaRecord& m) {
  return json{{"id", m.id},   {"kind", std::string(to_string(m.kind))}, {"lat", m.lat}, {"lon", m.lon},
              {"timestamp", m.timestamp}, {"uri", m.uri}};
}

inline MediaRecord media_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "record is not a JSON object");
  const auto stamp = detail::required<std::int64_t>(j, "timestamp");
  if (stamp < 0 || stamp > 99999999 || !calendar::valid(static_cast<DayStamp>(stamp))) {
    throw Error(ErrorCode::InvalidTimestamp, "timestamp is not a valid YYYYMMDD date", std::to_string(stamp));
  }
  return make_media(detail::required<std::string>(j, "id"),
                    parse_media_kind(detail::required<std::string>(j, "kind")),
                    detail::required<double>(j, "lat"), detail::required<double>(j, "lon"),
                    static_cast<DayStamp>(stamp), detail::required<std::string>(j, "uri"));
}

inline json to_json(const GeoFact& f) {
  return json{{"kind", f.kind},
              {"name", f.name},
              {"aliases", std::vector<std::string>(f.aliases.begin(), f.aliases.end())},
              {"lat", f.lat},
              {"lon", f.lon}};
}

inline GeoFact fact_from_json(const json& j) {
  GeoFact f = make_fact(detail::required<std::string>(j, "kind"), detail::required<std::string>(j, "name"),
                        detail::required<double>(j, "lat"), detail::required<double>(j, "lon"));
  if (auto it = j.find("aliases"); it != j.end()) {
    for (const auto& a : *it) f.aliases.insert(text::normalize_name(a.get<std::string>()));
  }
  return f;
}

inline json to_json(const UserContext& c) {
  return json{{"user_id", c.user_id},
              {"lat", c.lat},
              {"lon", c.lon},
              {"heading_deg", c.heading_deg},
              {"query_time", c.query_time}};
}

inline UserContext context_from_json(const json& j, DayStamp default_time = 0) {
  UserContext c;
  c.user_id = detail::required<std::string>(j, "user_id");
  c.lat = detail::required<double>(j, "lat");
  c.lon = detail::required<double>(j, "lon");
  c.heading_deg = detail::required<double>(j, "heading_deg");
  if (auto it = j.find("query_time"); it != j.end() && !it->is_null()) {
    c.query_time = it->get<DayStamp>();
  } else {
    c.query_time = default_time;
  }
  return validated(std::move(c));
}

struct LineIssue {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct ManifestParse {
  std::vector<MediaRecord> records;
  std::vector<LineIssue> invalid;
  std::size_t non_blank_lines = 0;
};

// Line-delimited JSON media manifest. Bad lines are collected, not fatal.
inline ManifestParse parse_manifest(std::istream& in) {
  ManifestParse out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++out.non_blank_lines;
    try {
      out.records.push_back(media_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      out.invalid.push_back({lineno, std::string("invalid JSON: ") + e.what()});
    } catch (const Error& e) {
      out.invalid.push_back({lineno, e.what()});
    }
  }
  return out;
}

}  // namespace xmego
