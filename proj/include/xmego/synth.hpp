#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "xmego/calendar.hpp"
#include "xmego/context.hpp"
#include "xmego/geo.hpp"
#include "xmego/learner.hpp"
#include "xmego/lexicon.hpp"
#include "xmego/logic.hpp"
#include "xmego/world.hpp"

namespace xmego {

inline constexpr Symbol relation_symbol(RelationWord r) {
  switch (r) {
    case RelationWord::FrontOf: return Symbol::FrontOf;
    case RelationWord::Behind: return Symbol::Behind;
    case RelationWord::LeftOf: return Symbol::LeftOf;
    case RelationWord::RightOf: return Symbol::RightOf;
    case RelationWord::Near: return Symbol::Near;
  }
  return Symbol::Near;
}

namespace synth {

inline constexpr std::array<std::string_view, 12> kMonthNames = {
    "January", "February", "March", "April", "May", "June",
    "July", "August", "September", "October", "November", "December"};

inline constexpr std::array<RelationWord, 4> kTemplateRelations = {RelationWord::FrontOf, RelationWord::Behind,
                                                                   RelationWord::RightOf, RelationWord::LeftOf};

// ---------------------------------------------------------------------------
// Worlds

struct WorldConfig {
  std::uint64_t seed = 7;
  std::size_t n_facts = 24;
  std::size_t n_media = 300;
  geo::LatLon center{49.2563, 7.0437};
  double fact_spread_m = 700.0;   // facts fall within this radius of center
  double media_spread_m = 450.0;  // media fall within this radius of a fact
  double here_fraction = 0.25;    // share of media placed around center
  double here_spread_m = 100.0;
  DayStamp query_time = 20150516;
};

inline constexpr std::array<std::pair<std::string_view, std::string_view>, 30> kPlaces = {{
    {"university", "campus center"},   {"bank", "postbank"},
    {"bus_station", "bus terminal"},   {"restaurant", "mensa"},
    {"building", "mpi inf"},           {"building", "mpi sws"},
    {"library", "university library"}, {"building", "computer science building"},
    {"building", "student service center"}, {"sports_centre", "sports hall"},
    {"swimming_pool", "swimming pool"}, {"hotel", "guest house"},
    {"place_of_worship", "chapel"},    {"building", "lecture hall b4"},
    {"building", "audimax"},           {"garden", "botanic garden"},
    {"building", "physics building"},  {"building", "chemistry building"},
    {"cafe", "bistro"},                {"gate", "main gate"},
    {"parking", "parking garage"},     {"post_office", "post office"},
    {"building", "dfki"},              {"theatre", "music hall"},
    {"cafe", "coffee corner"},         {"pharmacy", "campus pharmacy"},
    {"building", "graduate school"},   {"kindergarten", "kita"},
    {"fuel", "gas station"},           {"fountain", "fountain square"},
}};

inline geo::LatLon scatter(std::mt19937_64& rng, geo::LatLon around, double radius_m) {
  std::uniform_real_distribution<double> bearing(0.0, 360.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double d = radius_m * std::sqrt(unit(rng));
  return geo::destination(around, bearing(rng), std::max(d, 1.0));
}

// Timestamps that some relative-date query can reach: query_time minus
// 1..30 days, weeks, months or years.
inline DayStamp reachable_stamp(std::mt19937_64& rng, DayStamp query_time) {
  std::uniform_int_distribution<int> amount(1, 30);
  std::uniform_int_distribution<int> unit(0, 3);
  return calendar::subtract(query_time, amount(rng), static_cast<calendar::Unit>(unit(rng)));
}

inline WorldSnapshot generate_world(const WorldConfig& cfg) {
  if (cfg.n_facts == 0 || cfg.n_facts > kPlaces.size()) {
    throw Error(ErrorCode::InvalidArgument, "n_facts must be between 1 and " + std::to_string(kPlaces.size()));
  }
  std::mt19937_64 rng(cfg.seed);
  std::vector<GeoFact> facts;
  for (std::size_t i = 0; i < cfg.n_facts; ++i) {
    const auto at = scatter(rng, cfg.center, cfg.fact_spread_m);
    facts.push_back(make_fact(kPlaces[i].first, kPlaces[i].second, at.lat, at.lon));
  }
  std::vector<MediaRecord> media;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_fact(0, facts.size() - 1);
  for (std::size_t i = 0; i < cfg.n_media; ++i) {
    const bool here = unit(rng) < cfg.here_fraction;
    const auto at = here ? scatter(rng, cfg.center, cfg.here_spread_m)
                         : scatter(rng, facts[pick_fact(rng)].coords(), cfg.media_spread_m);
    const DayStamp ts = reachable_stamp(rng, cfg.query_time);
    const MediaKind kind = unit(rng) < 0.8 ? MediaKind::Image : MediaKind::Video;
    char id[32];
    std::snprintf(id, sizeof id, "%s%04zu", kind == MediaKind::Image ? "img" : "vid", i);
    media.push_back(make_media(id, kind, at.lat, at.lon, ts,
                               std::string("media/") + id + (kind == MediaKind::Image ? ".jpg" : ".mp4")));
  }
  UserContext ctx{"synth", cfg.center.lat, cfg.center.lon, 0.0, cfg.query_time};
  return WorldSnapshot(std::move(facts), std::move(media), ctx);
}

// ---------------------------------------------------------------------------
// Query templates

enum class Pattern { Spatial = 0, RelativeDay = 1, MonthLook = 2 };

inline constexpr std::string_view to_string(Pattern p) {
  switch (p) {
    case Pattern::Spatial: return "spatial";
    case Pattern::RelativeDay: return "relative_day";
    case Pattern::MonthLook: return "month";
  }
  return "?";
}

struct Template {
  Pattern pattern = Pattern::Spatial;
  RelationWord relation = RelationWord::FrontOf;  // as the user says it
  std::string entity;
  int number = 0;
  calendar::Unit unit = calendar::Unit::Days;
  int month = 0;
};

inline std::string entity_surface(const std::string& name) { return text::join(text::split(name, '_'), " "); }

inline std::string unit_word(calendar::Unit u, int n) {
  static constexpr std::array<std::string_view, 4> names = {"day", "week", "month", "year"};
  std::string w(names[static_cast<int>(u)]);
  return n == 1 ? w : w + "s";
}

inline std::string render(const Template& t, const Lexicon& lexicon = Lexicon::defaults()) {
  switch (t.pattern) {
    case Pattern::Spatial:
      return "what is there " + lexicon.rewrite_phrase.at(t.relation) + " " + entity_surface(t.entity) + "?";
    case Pattern::RelativeDay:
      return "what happened here " + std::to_string(t.number) + " " + unit_word(t.unit, t.number) + " ago?";
    case Pattern::MonthLook:
      return "what did this place look like in " + std::string(kMonthNames[t.month - 1]) + "?";
  }
  return {};
}

// The form whose denotation is the gold answer, read in `frame` by a user
// with context `ctx`.
inline LogicalForm canonical_form(const Template& t, const UserContext& ctx, Frame frame) {
  switch (t.pattern) {
    case Pattern::Spatial: {
      RelationWord r = t.relation;
      if (frame == Frame::UserCentric) r = rewrite_relation(r, quantize_heading(ctx.heading_deg));
      return LogicalForm::spatial(relation_symbol(r), t.entity);
    }
    case Pattern::RelativeDay:
      return LogicalForm::day(calendar::subtract(ctx.query_time, t.number, t.unit));
    case Pattern::MonthLook:
      return LogicalForm::month(t.month);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown template");
}

struct DatasetConfig {
  std::size_t n = 200;
  std::uint64_t seed = 1;
  Frame frame = Frame::Geomagnetic;
  std::optional<geo::LatLon> fixed_here;  // defaults to the world context's location
  DayStamp query_time = 20150516;
  std::optional<double> heading_deg;      // random per pair when unset
  std::array<bool, 3> patterns = {true, true, true};
  std::string user_id = "synth";
};

struct AnnotatedPair {
  TrainingPair pair;
  Template slots;
  LogicalForm canonical;
};

inline std::vector<AnnotatedPair> generate_annotated(const WorldSnapshot& w, const DatasetConfig& cfg,
                                                     const GeometryConfig& geometry = {}) {
  std::vector<Pattern> enabled;
  for (int p = 0; p < 3; ++p) {
    if (cfg.patterns[p]) enabled.push_back(static_cast<Pattern>(p));
  }
  if (enabled.empty()) throw Error(ErrorCode::InvalidArgument, "no template pattern enabled");
  std::vector<AnnotatedPair> out;
  if (cfg.n == 0) return out;
  if (w.facts().empty() || w.media().empty()) {
    throw Error(ErrorCode::ExhaustedSampling, "world needs at least one fact and one media record");
  }
  const geo::LatLon here = cfg.fixed_here.value_or(w.context().coords());
  geo::require_valid(here);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick_pattern(0, enabled.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_rel(0, kTemplateRelations.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_fact(0, w.facts().size() - 1);
  std::uniform_int_distribution<int> pick_number(1, 30);
  std::uniform_int_distribution<int> pick_unit(0, 3);
  std::uniform_int_distribution<int> pick_month(1, 12);
  std::uniform_real_distribution<double> pick_heading(0.0, 360.0);

  const std::size_t max_attempts = 100 * cfg.n;
  for (std::size_t attempt = 0; attempt < max_attempts && out.size() < cfg.n; ++attempt) {
    Template t;
    t.pattern = enabled[pick_pattern(rng)];
    switch (t.pattern) {
      case Pattern::Spatial:
        t.relation = kTemplateRelations[pick_rel(rng)];
        t.entity = w.facts()[pick_fact(rng)].name;
        break;
      case Pattern::RelativeDay:
        t.number = pick_number(rng);
        t.unit = static_cast<calendar::Unit>(pick_unit(rng));
        break;
      case Pattern::MonthLook:
        t.month = pick_month(rng);
        break;
    }
    const double heading = cfg.heading_deg ? *cfg.heading_deg : pick_heading(rng);
    UserContext ctx = validated({cfg.user_id, here.lat, here.lon, heading, cfg.query_time});
    LogicalForm z = canonical_form(t, ctx, cfg.frame);
    auto gold = evaluate(z, w.with_context(ctx), geometry).media_ids;
    if (gold.empty()) continue;
    TrainingPair pair{render(t), ctx, std::move(gold), cfg.frame};
    out.push_back({std::move(pair), std::move(t), std::move(z)});
  }
  if (out.size() < cfg.n) {
    throw Error(ErrorCode::ExhaustedSampling, "could not draw enough pairs with non-empty gold",
                std::to_string(out.size()) + " of " + std::to_string(cfg.n) + " after " +
                    std::to_string(max_attempts) + " attempts");
  }
  return out;
}

inline std::vector<TrainingPair> generate_dataset(const WorldSnapshot& w, const DatasetConfig& cfg,
                                                  const GeometryConfig& geometry = {}) {
  std::vector<TrainingPair> pairs;
  for (auto& a : generate_annotated(w, cfg, geometry)) pairs.push_back(std::move(a.pair));
  return pairs;
}

// ---------------------------------------------------------------------------
// Scripted annotators

// A user with a fixed habit for reading spatial words: either the map's
// (front = north) or their own facing direction as front. Judges media
// against the form they mean.
class ScriptedAnnotator {
 public:
  ScriptedAnnotator(Frame convention, Cardinal heading, Lexicon lexicon = Lexicon::defaults(),
                    GeometryConfig geometry = {})
      : convention_(convention), heading_(heading), lexicon_(std::move(lexicon)), geometry_(geometry) {}

  Frame convention() const { return convention_; }
  Cardinal heading() const { return heading_; }

  // The form this user means by `query`, or nothing if the rules do not
  // cover it.
  std::optional<LogicalForm> intended_form(std::string_view query, const WorldSnapshot& w) const {
    const auto tokens = tokenize_and_tag(query, lexicon_, w);
    std::optional<std::string> entity;
    for (const auto& t : tokens) {
      if (t.tag == Tag::ENTITY) {
        entity = t.entity;
        break;
      }
    }
    const auto mentions = find_spatial_mentions(text::words(query), lexicon_);
    if (entity && !mentions.empty()) {
      RelationWord r = mentions.front().relation;
      if (convention_ == Frame::UserCentric) r = rewrite_relation(r, heading_);
      return LogicalForm::spatial(relation_symbol(r), *entity);
    }
    if (entity) return LogicalForm::view_entity(*entity);
    const ResolvedQuery q = resolve(query, w.context(), Frame::Geomagnetic, lexicon_);
    if (q.day_stamp) return LogicalForm::day(*q.day_stamp);
    if (q.month) return LogicalForm::month(*q.month);
    return std::nullopt;
  }

  std::vector<std::string> relevant_set(std::string_view query, const WorldSnapshot& w) const {
    auto z = intended_form(query, w);
    if (!z) return {};
    return evaluate(*z, w, geometry_).media_ids;
  }

  bool relevant(std::string_view query, const std::string& media_id, const WorldSnapshot& w) const {
    const auto ids = relevant_set(query, w);
    return std::find(ids.begin(), ids.end(), media_id) != ids.end();
  }

  // Marks for a list of shown media, in order.
  std::vector<bool> judge(std::string_view query, const std::vector<std::string>& shown,
                          const WorldSnapshot& w) const {
    const auto ids = relevant_set(query, w);
    std::vector<bool> marks;
    marks.reserve(shown.size());
    for (const auto& id : shown) marks.push_back(std::find(ids.begin(), ids.end(), id) != ids.end());
    return marks;
  }

 private:
  Frame convention_;
  Cardinal heading_;
  Lexicon lexicon_;
  GeometryConfig geometry_;
};

inline ScriptedAnnotator scripted_annotator(Frame convention, Cardinal heading) {
  return ScriptedAnnotator(convention, heading);
}

}  // namespace synth
}  // namespace xmego
