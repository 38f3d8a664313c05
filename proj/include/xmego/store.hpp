#pragma once

#include <atomic>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "xmego/osm.hpp"
#include "xmego/records.hpp"
#include "xmego/world.hpp"

namespace xmego {

struct OsmIngestReport {
  std::size_t facts_added = 0;
  std::size_t nodes_skipped = 0;
  std::size_t duplicates = 0;
  std::vector<std::string> warnings;
};

struct ManifestIngestReport {
  std::size_t added = 0;
  std::vector<LineIssue> invalid;
};

// Holds the static world (facts) and the dynamic world (media, user
// contexts). Writers are serialized; snapshot() hands out immutable views
// that later writes never touch.
class WorldStore {
 public:
  // Atomic: a malformed document adds nothing.
  OsmIngestReport ingest_osm_xml(std::istream& in) {
    osm::ParsedNodes parsed = osm::parse_nodes(in);
    std::lock_guard lock(mu_);
    auto facts = std::make_shared<std::vector<GeoFact>>(*facts_);
    OsmIngestReport report;
    report.nodes_skipped = parsed.nodes_skipped;
    for (auto& f : parsed.facts) {
      if (contains_key(*facts, f.kind, f.name)) {
        ++report.duplicates;
        report.warnings.push_back("duplicate fact " + f.kind + "('" + f.name + "') ignored; first occurrence kept");
        continue;
      }
      // Secondary names must not shadow another entity.
      for (auto it = f.aliases.begin(); it != f.aliases.end();) {
        if (*it != f.name && alias_owner(*facts, *it) != nullptr) {
          report.warnings.push_back("alias '" + *it + "' of " + f.name + " collides; dropped");
          it = f.aliases.erase(it);
        } else {
          ++it;
        }
      }
      facts->push_back(std::move(f));
      ++report.facts_added;
    }
    publish_facts(std::move(facts));
    return report;
  }

  ManifestIngestReport ingest_media_manifest(std::istream& in) {
    ManifestParse parsed = parse_manifest(in);
    std::lock_guard lock(mu_);
    ManifestIngestReport report;
    report.invalid = std::move(parsed.invalid);
    auto media = std::make_shared<std::vector<MediaRecord>>(*media_);
    std::set<std::string> ids;
    for (const auto& m : *media) ids.insert(m.id);
    for (auto& m : parsed.records) {
      if (!ids.insert(m.id).second) {
        report.invalid.push_back({0, "duplicate media id '" + m.id + "'"});
        continue;
      }
      media->push_back(std::move(m));
      ++report.added;
    }
    if (parsed.non_blank_lines > 0 && report.added == 0) {
      throw Error(ErrorCode::AllLinesInvalid, "no valid manifest line",
                  std::to_string(parsed.non_blank_lines) + " line(s) rejected");
    }
    std::sort(report.invalid.begin(), report.invalid.end(),
              [](const LineIssue& a, const LineIssue& b) { return a.line < b.line; });
    media_ = std::move(media);
    ++version_;
    return report;
  }

  // Replaces facts and media wholesale, e.g. when reloading from disk.
  // Contexts are kept.
  void replace_world(std::vector<GeoFact> facts, std::vector<MediaRecord> media) {
    auto f = std::make_shared<std::vector<GeoFact>>(std::move(facts));
    auto m = std::make_shared<const std::vector<MediaRecord>>(std::move(media));
    std::lock_guard lock(mu_);
    media_ = std::move(m);
    publish_facts(std::move(f));
  }

  // Returns false when (kind,name) already exists.
  bool add_fact(GeoFact fact) {
    std::lock_guard lock(mu_);
    if (contains_key(*facts_, fact.kind, fact.name)) return false;
    auto facts = std::make_shared<std::vector<GeoFact>>(*facts_);
    facts->push_back(std::move(fact));
    publish_facts(std::move(facts));
    return true;
  }

  // Returns false when the id already exists.
  bool add_media(MediaRecord record) {
    std::lock_guard lock(mu_);
    for (const auto& m : *media_) {
      if (m.id == record.id) return false;
    }
    auto media = std::make_shared<std::vector<MediaRecord>>(*media_);
    media->push_back(std::move(record));
    media_ = std::move(media);
    ++version_;
    return true;
  }

  GeoFact add_alias(std::string_view kind, std::string_view name, std::string_view alias_raw) {
    const std::string alias = text::normalize_name(alias_raw);
    std::lock_guard lock(mu_);
    std::size_t idx = facts_->size();
    for (std::size_t i = 0; i < facts_->size(); ++i) {
      if ((*facts_)[i].kind == kind && (*facts_)[i].name == name) idx = i;
    }
    if (idx == facts_->size()) {
      throw Error(ErrorCode::UnknownFact, "no such fact", std::string(kind) + "('" + std::string(name) + "')");
    }
    if ((*facts_)[idx].aliases.contains(alias)) return (*facts_)[idx];
    if (const GeoFact* owner = alias_owner(*facts_, alias)) {
      throw Error(ErrorCode::AliasCollision, "alias already names another entity",
                  alias + " -> " + owner->kind + "('" + owner->name + "')");
    }
    auto facts = std::make_shared<std::vector<GeoFact>>(*facts_);
    (*facts)[idx].aliases.insert(alias);
    GeoFact updated = (*facts)[idx];
    publish_facts(std::move(facts));
    return updated;
  }

  std::uint64_t set_user_context(UserContext ctx) {
    ctx = validated(std::move(ctx));
    std::lock_guard lock(mu_);
    contexts_[ctx.user_id] = std::move(ctx);
    return ++version_;
  }

  bool has_context(const std::string& user_id) const {
    std::lock_guard lock(mu_);
    return contexts_.contains(user_id);
  }

  WorldSnapshot snapshot(const std::string& user_id) const {
    std::lock_guard lock(mu_);
    auto it = contexts_.find(user_id);
    if (it == contexts_.end()) throw Error(ErrorCode::UnknownUser, "no context for user", user_id);
    return WorldSnapshot(facts_, index_, media_, it->second, ++version_);
  }

  // Snapshot with an explicitly supplied context (training, simulation).
  WorldSnapshot snapshot_with(UserContext ctx) const {
    std::lock_guard lock(mu_);
    return WorldSnapshot(facts_, index_, media_, std::move(ctx), ++version_);
  }

  std::shared_ptr<const std::vector<GeoFact>> facts() const {
    std::lock_guard lock(mu_);
    return facts_;
  }

  std::shared_ptr<const std::vector<MediaRecord>> media() const {
    std::lock_guard lock(mu_);
    return media_;
  }

  std::uint64_t version() const {
    std::lock_guard lock(mu_);
    return version_;
  }

 private:
  static bool contains_key(const std::vector<GeoFact>& facts, std::string_view kind, std::string_view name) {
    for (const auto& f : facts) {
      if (f.kind == kind && f.name == name) return true;
    }
    return false;
  }

  static const GeoFact* alias_owner(const std::vector<GeoFact>& facts, const std::string& alias) {
    for (const auto& f : facts) {
      if (f.aliases.contains(alias)) return &f;
    }
    return nullptr;
  }

  void publish_facts(std::shared_ptr<std::vector<GeoFact>> facts) {
    index_ = std::make_shared<const FactIndex>(*facts);
    facts_ = std::move(facts);
    ++version_;
  }

  mutable std::mutex mu_;
  std::shared_ptr<const std::vector<GeoFact>> facts_ = std::make_shared<const std::vector<GeoFact>>();
  std::shared_ptr<const FactIndex> index_ = std::make_shared<const FactIndex>();
  std::shared_ptr<const std::vector<MediaRecord>> media_ = std::make_shared<const std::vector<MediaRecord>>();
  std::map<std::string, UserContext> contexts_;
  mutable std::uint64_t version_ = 0;
};

}  // namespace xmego
