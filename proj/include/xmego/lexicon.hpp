#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "xmego/calendar.hpp"
#include "xmego/error.hpp"
#include "xmego/text.hpp"
#include "xmego/world.hpp"

namespace xmego {

// Relations as words in a question, before any mapping onto predicates.
enum class RelationWord { FrontOf, Behind, LeftOf, RightOf, Near };

inline constexpr std::string_view to_string(RelationWord r) {
  switch (r) {
    case RelationWord::FrontOf: return "front_of";
    case RelationWord::Behind: return "behind";
    case RelationWord::LeftOf: return "left_of";
    case RelationWord::RightOf: return "right_of";
    case RelationWord::Near: return "near";
  }
  return "?";
}

inline RelationWord relation_word_from(std::string_view s) {
  for (auto r : {RelationWord::FrontOf, RelationWord::Behind, RelationWord::LeftOf, RelationWord::RightOf,
                 RelationWord::Near}) {
    if (to_string(r) == s) return r;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown relation word", std::string(s));
}

struct SpatialPhrase {
  std::vector<std::string> words;
  RelationWord relation = RelationWord::Near;
};

// Hand-written trigger tables. Loaded from JSON so they can be audited and
// extended without recompiling; defaults() mirrors data/lexicon.json.
struct Lexicon {
  std::vector<SpatialPhrase> spatial;                   // longest first
  std::map<RelationWord, std::string> rewrite_phrase;   // used when re-expressing a relation
  std::vector<std::string> wh_words;
  std::map<std::string, calendar::Unit> units;
  std::vector<std::string> temporal_words;              // beyond the unit words
  std::vector<std::vector<std::string>> deixis;
  std::map<std::string, int> number_words;
  std::map<std::string, int> month_names;

  static Lexicon from_json(const nlohmann::json& j) {
    Lexicon lx;
    for (const auto& [rel, phrases] : j.at("spatial").items()) {
      const RelationWord r = relation_word_from(rel);
      for (const auto& p : phrases) lx.spatial.push_back({text::words(p.get<std::string>()), r});
    }
    for (const auto& [rel, phrase] : j.at("rewrite").items()) {
      lx.rewrite_phrase[relation_word_from(rel)] = phrase.get<std::string>();
    }
    lx.wh_words = j.at("wh").get<std::vector<std::string>>();
    for (const auto& [word, unit] : j.at("units").items()) {
      const auto u = unit.get<std::string>();
      calendar::Unit cu = calendar::Unit::Days;
      if (u == "days") cu = calendar::Unit::Days;
      else if (u == "weeks") cu = calendar::Unit::Weeks;
      else if (u == "months") cu = calendar::Unit::Months;
      else if (u == "years") cu = calendar::Unit::Years;
      else throw Error(ErrorCode::InvalidArgument, "unknown calendar unit", u);
      lx.units[word] = cu;
    }
    lx.temporal_words = j.at("temporal").get<std::vector<std::string>>();
    for (const auto& d : j.at("deixis")) lx.deixis.push_back(text::words(d.get<std::string>()));
    lx.number_words = j.at("numbers").get<std::map<std::string, int>>();
    lx.month_names = j.at("months").get<std::map<std::string, int>>();
    lx.finish();
    return lx;
  }

  static const Lexicon& defaults() {
    static const Lexicon lx = from_json(nlohmann::json::parse(kDefaultJson));
    return lx;
  }

  bool is_temporal_word(const std::string& w) const {
    return units.contains(w) || std::find(temporal_words.begin(), temporal_words.end(), w) != temporal_words.end();
  }

  bool is_wh(const std::string& w) const { return std::find(wh_words.begin(), wh_words.end(), w) != wh_words.end(); }

  std::optional<int> number(const std::string& w) const {
    if (!w.empty() && w.size() <= 6 && std::all_of(w.begin(), w.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      return std::stoi(w);
    }
    if (auto it = number_words.find(w); it != number_words.end()) return it->second;
    return std::nullopt;
  }

  // Longest spatial phrase starting at `at`, as (length, relation).
  std::optional<std::pair<std::size_t, RelationWord>> match_spatial(const std::vector<std::string>& words,
                                                                    std::size_t at) const {
    for (const auto& p : spatial) {
      if (at + p.words.size() <= words.size() &&
          std::equal(p.words.begin(), p.words.end(), words.begin() + static_cast<std::ptrdiff_t>(at))) {
        return std::pair{p.words.size(), p.relation};
      }
    }
    return std::nullopt;
  }

  std::size_t match_deixis(const std::vector<std::string>& words, std::size_t at) const {
    std::size_t best = 0;
    for (const auto& d : deixis) {
      if (d.size() > best && at + d.size() <= words.size() &&
          std::equal(d.begin(), d.end(), words.begin() + static_cast<std::ptrdiff_t>(at))) {
        best = d.size();
      }
    }
    return best;
  }

  // "may" is only a month after a preposition.
  std::optional<int> month_at(const std::vector<std::string>& words, std::size_t at) const {
    auto it = month_names.find(words[at]);
    if (it == month_names.end()) return std::nullopt;
    if (words[at] == "may") {
      if (at == 0) return std::nullopt;
      const auto& prev = words[at - 1];
      if (prev != "in" && prev != "of" && prev != "during") return std::nullopt;
    }
    return it->second;
  }

  static constexpr std::string_view kDefaultJson = R"json({
  "spatial": {
    "front_of": ["in front of", "in front", "front of", "ahead of", "in the front of"],
    "behind":   ["behind", "behind of", "in back of", "at the back of", "back of"],
    "right_of": ["on the right of", "on the right side of", "to the right of", "on the right", "right of"],
    "left_of":  ["on the left of", "on the left side of", "to the left of", "on the left", "left of"],
    "near":     ["near", "near to", "nearby", "beside", "next to", "close to", "around", "opposite to", "opposite"]
  },
  "rewrite": {
    "front_of": "in front of",
    "behind":   "behind",
    "right_of": "on the right of",
    "left_of":  "on the left of",
    "near":     "near"
  },
  "wh": ["what", "which", "where", "who", "how", "when"],
  "units": {
    "day": "days", "days": "days", "week": "weeks", "weeks": "weeks",
    "month": "months", "months": "months", "year": "years", "years": "years"
  },
  "temporal": ["ago", "yesterday"],
  "deixis": ["here", "this place", "this spot"],
  "numbers": {
    "a": 1, "an": 1, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6, "seven": 7,
    "eight": 8, "nine": 9, "ten": 10, "eleven": 11, "twelve": 12, "thirteen": 13, "fourteen": 14,
    "fifteen": 15, "sixteen": 16, "seventeen": 17, "eighteen": 18, "nineteen": 19, "twenty": 20,
    "thirty": 30
  },
  "months": {
    "january": 1, "february": 2, "march": 3, "april": 4, "may": 5, "june": 6, "july": 7,
    "august": 8, "september": 9, "october": 10, "november": 11, "december": 12,
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "jun": 6, "jul": 7, "aug": 8, "sep": 9, "sept": 9,
    "oct": 10, "nov": 11, "dec": 12
  }
})json";

 private:
  void finish() {
    std::stable_sort(spatial.begin(), spatial.end(),
                     [](const SpatialPhrase& a, const SpatialPhrase& b) { return a.words.size() > b.words.size(); });
  }
};

enum class Tag { WH, SPATIAL, TEMPORAL, ENTITY, MONTH, NUMBER, STOP };

inline constexpr std::string_view to_string(Tag t) {
  switch (t) {
    case Tag::WH: return "WH";
    case Tag::SPATIAL: return "SPATIAL";
    case Tag::TEMPORAL: return "TEMPORAL";
    case Tag::ENTITY: return "ENTITY";
    case Tag::MONTH: return "MONTH";
    case Tag::NUMBER: return "NUMBER";
    case Tag::STOP: return "STOP";
  }
  return "?";
}

struct Token {
  std::string surface;  // words joined by spaces; an entity's matched alias
  std::size_t position = 0;
  Tag tag = Tag::STOP;
  std::string entity;  // fact name for ENTITY
  int value = 0;       // NUMBER / MONTH

  friend bool operator==(const Token&, const Token&) = default;
};

// Lowercased word tokens with multiword entity aliases and spatial phrases
// collapsed (longest match, entities win ties).
inline std::vector<Token> tokenize_and_tag(std::string_view question, const Lexicon& lexicon,
                                           const WorldSnapshot& world) {
  const std::vector<std::string> words = text::words(question);
  const auto& aliases = world.index().entries();
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < words.size()) {
    Token tok;
    tok.position = out.size();
    std::size_t used = 1;

    std::size_t entity_len = 0;
    const FactIndex::AliasEntry* entity = nullptr;
    for (const auto& e : aliases) {
      if (e.words.size() <= entity_len) break;
      if (i + e.words.size() <= words.size() &&
          std::equal(e.words.begin(), e.words.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) {
        entity_len = e.words.size();
        entity = &e;
        break;
      }
    }
    const auto spatial = lexicon.match_spatial(words, i);

    if (entity && (!spatial || entity_len >= spatial->first)) {
      tok.tag = Tag::ENTITY;
      tok.surface = entity->alias;
      tok.entity = world.facts()[entity->fact].name;
      used = entity_len;
    } else if (spatial) {
      tok.tag = Tag::SPATIAL;
      std::vector<std::string> span(words.begin() + static_cast<std::ptrdiff_t>(i),
                                    words.begin() + static_cast<std::ptrdiff_t>(i + spatial->first));
      tok.surface = text::join(span, " ");
      used = spatial->first;
    } else {
      const std::string& w = words[i];
      tok.surface = w;
      const bool next_is_unit = i + 1 < words.size() && lexicon.units.contains(words[i + 1]);
      if (auto m = lexicon.month_at(words, i)) {
        tok.tag = Tag::MONTH;
        tok.value = *m;
      } else if (auto n = lexicon.number(w); n && (next_is_unit || std::isdigit(static_cast<unsigned char>(w[0])))) {
        tok.tag = Tag::NUMBER;
        tok.value = *n;
      } else if (lexicon.is_temporal_word(w)) {
        tok.tag = Tag::TEMPORAL;
      } else if (lexicon.is_wh(w)) {
        tok.tag = Tag::WH;
      } else {
        tok.tag = Tag::STOP;
      }
    }
    out.push_back(std::move(tok));
    i += used;
  }
  return out;
}

}  // namespace xmego
