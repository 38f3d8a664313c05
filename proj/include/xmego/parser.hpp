#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xmego/context.hpp"
#include "xmego/lexicon.hpp"
#include "xmego/logic.hpp"
#include "xmego/world.hpp"

namespace xmego {

// Sparse features φ(x,z), sorted by key, no duplicate keys.
class FeatureVector {
 public:
  using Entry = std::pair<std::string, double>;

  FeatureVector() = default;

  void add(std::string key, double value = 1.0) { pending_.emplace_back(std::move(key), value); dirty_ = true; }

  const std::vector<Entry>& entries() const {
    compact();
    return entries_;
  }

  double get(std::string_view key) const {
    compact();
    auto it = std::lower_bound(entries_.begin(), entries_.end(), key,
                               [](const Entry& e, std::string_view k) { return e.first < k; });
    return (it != entries_.end() && it->first == key) ? it->second : 0.0;
  }

  std::size_t size() const { return entries().size(); }

 private:
  void compact() const {
    if (!dirty_) return;
    for (auto& p : pending_) entries_.push_back(std::move(p));
    pending_.clear();
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.first < b.first; });
    std::vector<Entry> merged;
    for (auto& e : entries_) {
      if (!merged.empty() && merged.back().first == e.first) {
        merged.back().second += e.second;
      } else {
        merged.push_back(std::move(e));
      }
    }
    std::erase_if(merged, [](const Entry& e) { return e.second == 0.0; });
    entries_ = std::move(merged);
    dirty_ = false;
  }

  mutable std::vector<Entry> entries_;
  mutable std::vector<Entry> pending_;
  mutable bool dirty_ = false;
};

// θ: sparse weights; a missing key weighs zero.
struct ParamVector {
  std::string owner = "shared";
  std::uint64_t version = 0;
  std::map<std::string, double, std::less<>> weights;

  double get(std::string_view key) const {
    auto it = weights.find(key);
    return it == weights.end() ? 0.0 : it->second;
  }

  double dot(const FeatureVector& phi) const {
    double s = 0.0;
    for (const auto& [k, v] : phi.entries()) s += get(k) * v;
    return s;
  }

  void add_scaled(const FeatureVector& phi, double scale) {
    for (const auto& [k, v] : phi.entries()) weights[k] += scale * v;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& [k, v] : weights) s += v * v;
    return s;
  }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

struct ParserConfig {
  std::size_t beam_cap = 200;
  std::size_t deictic_entities = 3;  // nearest facts hypothesised for "here"
  GeometryConfig geometry;
};

struct BeamEntry {
  LogicalForm form;
  std::string canonical;
  double score = 0.0;
  double probability = 0.0;
};

struct ParseResult {
  std::vector<Token> tokens;
  std::vector<BeamEntry> beam;  // score descending, ties by canonical text

  const BeamEntry& argmax() const { return beam.front(); }
};

// Lexical triggers, tree enumeration and the log-linear scorer.
class SemanticParser {
 public:
  explicit SemanticParser(ParserConfig config = {}, Lexicon lexicon = Lexicon::defaults())
      : config_(std::move(config)), lexicon_(std::move(lexicon)) {}

  const ParserConfig& config() const { return config_; }
  const Lexicon& lexicon() const { return lexicon_; }

  std::vector<Token> tokenize(std::string_view text, const WorldSnapshot& w) const {
    return tokenize_and_tag(text, lexicon_, w);
  }

  // Every well-formed tree the triggers license, in a fixed enumeration
  // order, capped at beam_cap. Spatial phrases trigger all relation
  // predicates; which one a phrase means is left to the weights.
  std::vector<LogicalForm> generate_candidates(const std::vector<Token>& tokens, const ResolvedQuery& q,
                                               const WorldSnapshot& w) const {
    std::vector<std::string> entities;
    bool spatial = false;
    bool temporal = false;
    bool month_token = false;
    for (const auto& t : tokens) {
      if (t.tag == Tag::ENTITY && std::find(entities.begin(), entities.end(), t.entity) == entities.end()) {
        entities.push_back(t.entity);
      }
      spatial |= t.tag == Tag::SPATIAL;
      temporal |= t.tag == Tag::TEMPORAL || t.tag == Tag::NUMBER;
      month_token |= t.tag == Tag::MONTH;
    }
    if (q.anchor_override) {
      for (const auto& name : nearest_facts(w, *q.anchor_override)) {
        if (std::find(entities.begin(), entities.end(), name) == entities.end()) entities.push_back(name);
      }
    }

    std::vector<LogicalForm> out;
    std::set<std::string> seen;
    auto emit = [&](LogicalForm z) {
      if (out.size() >= config_.beam_cap) return;
      if (seen.insert(to_canonical_text(z)).second) out.push_back(std::move(z));
    };
    for (const auto& e : entities) {
      if (spatial) {
        for (Symbol r : kRelations) emit(LogicalForm::spatial(r, e));
      } else {
        emit(LogicalForm::spatial(Symbol::Near, e));
      }
      emit(LogicalForm::view_entity(e));
    }
    if (temporal && q.day_stamp) {
      emit(LogicalForm::day(*q.day_stamp));
      emit(LogicalForm::month(calendar::month_of(*q.day_stamp)));
    }
    if (month_token && q.month) emit(LogicalForm::month(*q.month));
    if (out.empty()) throw Error(ErrorCode::NoCandidates, "no lexical trigger fired", q.text);
    return out;
  }

  // Feature templates: lexical co-occurrence (surface -> predicate), tree
  // edges, tree size, and a penalty for spatial phrases the tree ignores.
  static FeatureVector featurize(const std::vector<Token>& tokens, const LogicalForm& z) {
    FeatureVector phi;
    std::vector<std::string> preds;
    bool has_relation = false;
    auto visit = [&](auto&& self, const LfNode& n) -> void {
      for (const auto& c : n.children) {
        phi.add("edge:" + label(n) + "→" + label(c));
        preds.push_back(label(c));
        has_relation |= is_relation(c.symbol);
        self(self, c);
      }
    };
    visit(visit, z.root());
    phi.add("count:predicates", static_cast<double>(preds.size()));

    std::size_t spatial_tokens = 0;
    for (const auto& t : tokens) {
      std::string key;
      switch (t.tag) {
        case Tag::SPATIAL:
          ++spatial_tokens;
          key = text::join(text::split(t.surface, ' '), "_");
          break;
        case Tag::TEMPORAL: key = t.surface; break;
        case Tag::NUMBER: key = "<num>"; break;
        case Tag::MONTH: key = "<month>"; break;
        case Tag::ENTITY: key = "<entity>"; break;
        default: continue;
      }
      for (const auto& p : preds) phi.add("lex:" + key + "→" + p);
    }
    const std::size_t realized = has_relation ? 1 : 0;
    if (spatial_tokens > realized) phi.add("unmatched_spatial", static_cast<double>(spatial_tokens - realized));
    phi.entries();
    return phi;
  }

  // Scores all candidates with θ·φ and returns the top k, softmax-normalised
  // over the returned beam.
  ParseResult parse_topk(const ResolvedQuery& q, const WorldSnapshot& w, const ParamVector& theta,
                         std::size_t k) const {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
    ParseResult result;
    result.tokens = tokenize(q.text, w);
    auto forms = generate_candidates(result.tokens, q, w);
    for (auto& z : forms) {
      const double s = theta.dot(featurize(result.tokens, z));
      std::string canonical = to_canonical_text(z);
      result.beam.push_back({std::move(z), std::move(canonical), s, 0.0});
    }
    rank(result.beam);
    if (result.beam.size() > k) result.beam.resize(k);
    normalize(result.beam);
    return result;
  }

  static void rank(std::vector<BeamEntry>& beam) {
    std::sort(beam.begin(), beam.end(), [](const BeamEntry& a, const BeamEntry& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.canonical < b.canonical;
    });
  }

  static void normalize(std::vector<BeamEntry>& beam) {
    if (beam.empty()) return;
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& b : beam) top = std::max(top, b.score);
    double z = 0.0;
    for (auto& b : beam) z += (b.probability = std::exp(b.score - top));
    for (auto& b : beam) b.probability /= z;
  }

 private:
  static std::string label(const LfNode& n) {
    return n.symbol == Symbol::Kind ? "kind" : std::string(symbol_name(n.symbol));
  }

  std::vector<std::string> nearest_facts(const WorldSnapshot& w, geo::LatLon at) const {
    std::vector<std::pair<double, const GeoFact*>> by_distance;
    for (const auto& f : w.facts()) by_distance.emplace_back(geo::distance_m(at, f.coords()), &f);
    std::sort(by_distance.begin(), by_distance.end(), [](const auto& a, const auto& b) {
      return std::tie(a.first, a.second->name) < std::tie(b.first, b.second->name);
    });
    std::vector<std::string> names;
    for (const auto& [d, f] : by_distance) {
      if (names.size() >= config_.deictic_entities) break;
      if (std::find(names.begin(), names.end(), f->name) == names.end()) names.push_back(f->name);
    }
    return names;
  }

  ParserConfig config_;
  Lexicon lexicon_;
};

}  // namespace xmego
