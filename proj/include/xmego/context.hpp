#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xmego/calendar.hpp"
#include "xmego/geo.hpp"
#include "xmego/lexicon.hpp"
#include "xmego/text.hpp"
#include "xmego/world.hpp"

namespace xmego {

enum class Cardinal { North = 0, East = 1, South = 2, West = 3 };

inline constexpr std::string_view to_string(Cardinal c) {
  constexpr std::array<std::string_view, 4> names = {"north", "east", "south", "west"};
  return names[static_cast<int>(c)];
}

// Nearest of N/E/S/W; exact midpoints round clockwise (45 -> east).
inline Cardinal quantize_heading(double heading_deg) {
  const double h = normalize_heading(heading_deg);
  const int quadrant = static_cast<int>(std::floor((h + 45.0) / 90.0)) % 4;
  return static_cast<Cardinal>(quadrant);
}

// Re-expresses a relation said by a user facing `facing` in the geomagnetic
// frame: the facing direction is the local north, so each quarter turn
// clockwise advances front -> right -> behind -> left.
inline RelationWord rewrite_relation(RelationWord rel, Cardinal facing) {
  if (rel == RelationWord::Near) return rel;
  constexpr std::array<RelationWord, 4> cycle = {RelationWord::FrontOf, RelationWord::RightOf, RelationWord::Behind,
                                                 RelationWord::LeftOf};
  std::size_t at = 0;
  while (cycle[at] != rel) ++at;
  return cycle[(at + static_cast<std::size_t>(facing)) % 4];
}

enum class Frame { Geomagnetic, UserCentric };

inline constexpr std::string_view to_string(Frame f) {
  return f == Frame::Geomagnetic ? "geomagnetic" : "user_centric";
}

inline Frame parse_frame(std::string_view s) {
  if (s == "geomagnetic") return Frame::Geomagnetic;
  if (s == "user_centric") return Frame::UserCentric;
  throw Error(ErrorCode::InvalidArgument, "frame must be geomagnetic or user_centric", std::string(s));
}

struct ResolvedQuery {
  std::string text;
  std::optional<geo::LatLon> anchor_override;
  std::optional<DayStamp> day_stamp;
  std::optional<int> month;
  Frame frame = Frame::Geomagnetic;

  friend bool operator==(const ResolvedQuery&, const ResolvedQuery&) = default;
};

struct SpatialMention {
  std::size_t first_word = 0;
  std::size_t word_count = 0;
  RelationWord relation = RelationWord::Near;
};

inline std::vector<SpatialMention> find_spatial_mentions(const std::vector<std::string>& words,
                                                         const Lexicon& lexicon) {
  std::vector<SpatialMention> found;
  for (std::size_t i = 0; i < words.size();) {
    if (auto m = lexicon.match_spatial(words, i)) {
      found.push_back({i, m->first, m->second});
      i += m->first;
    } else {
      ++i;
    }
  }
  return found;
}

// Context pre-processing: egocentric relation rewrite, deixis and relative
// dates. Runs before the learned parser sees the text.
inline ResolvedQuery resolve(std::string_view query_text, const UserContext& ctx, Frame frame,
                             const Lexicon& lexicon = Lexicon::defaults()) {
  const auto spans = text::word_spans(query_text);
  if (spans.empty()) throw Error(ErrorCode::InvalidArgument, "query has no words", std::string(query_text));
  std::vector<std::string> words;
  words.reserve(spans.size());
  for (const auto& s : spans) words.push_back(s.folded);

  ResolvedQuery out;
  out.frame = frame;
  out.text = std::string(query_text);

  if (frame == Frame::UserCentric) {
    const Cardinal facing = quantize_heading(ctx.heading_deg);
    std::string rewritten;
    std::size_t copied = 0;
    for (const auto& m : find_spatial_mentions(words, lexicon)) {
      const RelationWord target = rewrite_relation(m.relation, facing);
      if (target == m.relation) continue;
      const auto begin = spans[m.first_word].begin;
      const auto end = spans[m.first_word + m.word_count - 1].end;
      rewritten.append(query_text.substr(copied, begin - copied));
      rewritten.append(lexicon.rewrite_phrase.at(target));
      copied = end;
    }
    rewritten.append(query_text.substr(copied));
    out.text = std::move(rewritten);
  }

  for (std::size_t i = 0; i < words.size(); ++i) {
    if (lexicon.match_deixis(words, i) > 0) out.anchor_override = ctx.coords();
  }

  std::optional<DayStamp> day;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words[i] == "yesterday") {
      day = calendar::subtract(ctx.query_time, 1, calendar::Unit::Days);
    } else if (i + 2 < words.size() && words[i + 2] == "ago" && lexicon.units.contains(words[i + 1])) {
      if (auto n = lexicon.number(words[i])) {
        day = calendar::subtract(ctx.query_time, *n, lexicon.units.at(words[i + 1]));
      }
    }
  }
  std::optional<int> month;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (auto m = lexicon.month_at(words, i)) month = *m;
  }
  if (day && month) {
    throw Error(ErrorCode::ConflictingTemporal, "query names both a relative day and a month",
                std::string(query_text));
  }
  out.day_stamp = day;
  out.month = month;
  return out;
}

}  // namespace xmego
