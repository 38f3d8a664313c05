#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xmego/calendar.hpp"
#include "xmego/error.hpp"
#include "xmego/geo.hpp"
#include "xmego/text.hpp"

namespace xmego {

// A named entity of the static world, e.g. bus_stop('universitaet_mensa',49.2562752,7.0436771).
struct GeoFact {
  std::string kind;
  std::string name;
  std::set<std::string> aliases;  // always contains `name`
  double lat = 0.0;
  double lon = 0.0;

  geo::LatLon coords() const { return {lat, lon}; }
  friend bool operator==(const GeoFact&, const GeoFact&) = default;
};

enum class MediaKind { Image, Video };

inline std::string_view to_string(MediaKind k) { return k == MediaKind::Image ? "image" : "video"; }

inline MediaKind parse_media_kind(std::string_view s) {
  if (s == "image") return MediaKind::Image;
  if (s == "video") return MediaKind::Video;
  throw Error(ErrorCode::InvalidArgument, "media kind must be image or video", std::string(s));
}

struct MediaRecord {
  std::string id;
  MediaKind kind = MediaKind::Image;
  double lat = 0.0;
  double lon = 0.0;
  DayStamp timestamp = 0;
  int month = 0;
  std::string uri;

  geo::LatLon coords() const { return {lat, lon}; }
  friend bool operator==(const MediaRecord&, const MediaRecord&) = default;
};

struct UserContext {
  std::string user_id;
  double lat = 0.0;
  double lon = 0.0;
  double heading_deg = 0.0;
  DayStamp query_time = 0;

  geo::LatLon coords() const { return {lat, lon}; }
  friend bool operator==(const UserContext&, const UserContext&) = default;
};

inline double normalize_heading(double deg) {
  if (!std::isfinite(deg)) throw Error(ErrorCode::InvalidHeading, "heading is not finite");
  double h = std::fmod(deg, 360.0);
  if (h < 0.0) h += 360.0;
  return h >= 360.0 ? 0.0 : h;
}

// Checks a context and returns it with the heading folded into [0,360).
inline UserContext validated(UserContext ctx) {
  geo::require_valid(ctx.coords());
  ctx.heading_deg = normalize_heading(ctx.heading_deg);
  calendar::require(ctx.query_time);
  return ctx;
}

inline GeoFact make_fact(std::string_view kind, std::string_view raw_name, double lat, double lon) {
  geo::require_valid({lat, lon});
  GeoFact f;
  f.kind = text::normalize_name(kind);
  f.name = text::normalize_name(raw_name);
  f.aliases.insert(f.name);
  f.lat = lat;
  f.lon = lon;
  return f;
}

inline MediaRecord make_media(std::string id, MediaKind kind, double lat, double lon, DayStamp timestamp,
                              std::string uri) {
  if (id.empty()) throw Error(ErrorCode::InvalidArgument, "media id is empty");
  geo::require_valid({lat, lon});
  MediaRecord m{std::move(id), kind, lat, lon, timestamp, calendar::month_of(timestamp), std::move(uri)};
  return m;
}

// Name and alias lookup over an immutable fact list. Also exposes the
// multiword alias table the tokenizer matches against.
class FactIndex {
 public:
  struct AliasEntry {
    std::vector<std::string> words;
    std::string alias;
    std::size_t fact = 0;
  };

  FactIndex() = default;

  explicit FactIndex(const std::vector<GeoFact>& facts) {
    for (std::size_t i = 0; i < facts.size(); ++i) by_name_.try_emplace(facts[i].name, i);
    for (std::size_t i = 0; i < facts.size(); ++i) {
      for (const auto& a : facts[i].aliases) {
        if (!by_name_.contains(a)) by_alias_.try_emplace(a, i);
      }
    }
    auto add_entry = [&](const std::string& alias, std::size_t fact) {
      entries_.push_back({text::split(alias, '_'), alias, fact});
    };
    for (const auto& [alias, fact] : by_name_) add_entry(alias, fact);
    for (const auto& [alias, fact] : by_alias_) add_entry(alias, fact);
    std::sort(entries_.begin(), entries_.end(), [](const AliasEntry& a, const AliasEntry& b) {
      if (a.words.size() != b.words.size()) return a.words.size() > b.words.size();
      return a.alias < b.alias;
    });
  }

  // Name match beats alias match; among same-named facts the first ingested wins.
  std::optional<std::size_t> find(std::string_view name) const {
    if (auto it = by_name_.find(std::string(name)); it != by_name_.end()) return it->second;
    if (auto it = by_alias_.find(std::string(name)); it != by_alias_.end()) return it->second;
    return std::nullopt;
  }

  // Longest first, then lexicographic.
  const std::vector<AliasEntry>& entries() const { return entries_; }

 private:
  std::unordered_map<std::string, std::size_t> by_name_;
  std::unordered_map<std::string, std::size_t> by_alias_;
  std::vector<AliasEntry> entries_;
};

// The world w = static facts + media + one user's context, frozen for one query.
class WorldSnapshot {
 public:
  WorldSnapshot() : WorldSnapshot(std::vector<GeoFact>{}, std::vector<MediaRecord>{}, UserContext{}) {}

  WorldSnapshot(std::vector<GeoFact> facts, std::vector<MediaRecord> media, UserContext context,
                std::uint64_t version = 0)
      : facts_(std::make_shared<const std::vector<GeoFact>>(std::move(facts))),
        index_(std::make_shared<const FactIndex>(*facts_)),
        media_(std::make_shared<const std::vector<MediaRecord>>(std::move(media))),
        context_(std::move(context)),
        version_(version) {}

  WorldSnapshot(std::shared_ptr<const std::vector<GeoFact>> facts, std::shared_ptr<const FactIndex> index,
                std::shared_ptr<const std::vector<MediaRecord>> media, UserContext context, std::uint64_t version)
      : facts_(std::move(facts)),
        index_(std::move(index)),
        media_(std::move(media)),
        context_(std::move(context)),
        version_(version) {}

  const std::vector<GeoFact>& facts() const { return *facts_; }
  const std::vector<MediaRecord>& media() const { return *media_; }
  const FactIndex& index() const { return *index_; }
  const UserContext& context() const { return context_; }
  std::uint64_t version() const { return version_; }

  const GeoFact* find_fact(std::string_view name) const {
    auto i = index_->find(name);
    return i ? &(*facts_)[*i] : nullptr;
  }

  const MediaRecord* find_media(std::string_view id) const {
    for (const auto& m : *media_) {
      if (m.id == id) return &m;
    }
    return nullptr;
  }

  // Same facts and media, different user context; shares storage.
  WorldSnapshot with_context(UserContext ctx) const {
    return WorldSnapshot(facts_, index_, media_, std::move(ctx), version_);
  }

 private:
  std::shared_ptr<const std::vector<GeoFact>> facts_;
  std::shared_ptr<const FactIndex> index_;
  std::shared_ptr<const std::vector<MediaRecord>> media_;
  UserContext context_;
  std::uint64_t version_ = 0;
};

}  // namespace xmego
