#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "xmego/error.hpp"
#include "xmego/geo.hpp"
#include "xmego/world.hpp"

namespace xmego {

enum class Symbol { Answer, View, Const, Day, MonthIs, FrontOf, Behind, LeftOf, RightOf, Near, Kind };

inline constexpr std::string_view symbol_name(Symbol s) {
  switch (s) {
    case Symbol::Answer: return "answer";
    case Symbol::View: return "view";
    case Symbol::Const: return "const";
    case Symbol::Day: return "day";
    case Symbol::MonthIs: return "month_is";
    case Symbol::FrontOf: return "frontOf";
    case Symbol::Behind: return "behind";
    case Symbol::LeftOf: return "leftOf";
    case Symbol::RightOf: return "rightOf";
    case Symbol::Near: return "near";
    case Symbol::Kind: return "kind";
  }
  return "?";
}

inline constexpr bool is_relation(Symbol s) {
  return s == Symbol::FrontOf || s == Symbol::Behind || s == Symbol::LeftOf || s == Symbol::RightOf ||
         s == Symbol::Near;
}

inline constexpr int arity(Symbol s) { return is_relation(s) ? 2 : 1; }

inline constexpr Symbol kRelations[] = {Symbol::FrontOf, Symbol::Behind, Symbol::LeftOf, Symbol::RightOf,
                                        Symbol::Near};

inline std::optional<Symbol> relation_from_name(std::string_view name) {
  for (Symbol s : kRelations) {
    if (symbol_name(s) == name) return s;
  }
  return std::nullopt;
}

// Predicates available to the parser: the fixed core plus one unary kind
// predicate per entity category present in the world.
struct PredicateRegistry {
  std::vector<std::string> kinds;

  static PredicateRegistry from_facts(const std::vector<GeoFact>& facts) {
    PredicateRegistry r;
    for (const auto& f : facts) r.kinds.push_back(f.kind);
    std::sort(r.kinds.begin(), r.kinds.end());
    r.kinds.erase(std::unique(r.kinds.begin(), r.kinds.end()), r.kinds.end());
    return r;
  }

  bool has_kind(std::string_view k) const { return std::binary_search(kinds.begin(), kinds.end(), k); }
};

// A DCS tree node. `slot` is the argument position of the parent that this
// node fills (1 = first argument, 2 = second).
struct LfNode {
  Symbol symbol = Symbol::Answer;
  std::string text;       // entity name for const, category for kind
  std::int32_t value = 0;  // day stamp or month
  int slot = 1;
  std::vector<LfNode> children;

  friend bool operator==(const LfNode&, const LfNode&) = default;
};

class LogicalForm {
 public:
  LogicalForm() = default;
  explicit LogicalForm(LfNode root) : root_(std::move(root)) {}

  const LfNode& root() const { return root_; }

  // answer(A,(rel(A,B),const(B,'entity')))
  static LogicalForm spatial(Symbol relation, std::string entity) {
    LfNode c{Symbol::Const, std::move(entity), 0, 2, {}};
    LfNode r{relation, {}, 0, 1, {std::move(c)}};
    return LogicalForm(LfNode{Symbol::Answer, {}, 0, 1, {std::move(r)}});
  }

  // answer(A,(view(A),const(A,'entity')))
  static LogicalForm view_entity(std::string entity) { return view_of({Symbol::Const, std::move(entity), 0, 1, {}}); }

  // answer(A,(view(A),day(20150511)))
  static LogicalForm day(DayStamp stamp) { return view_of({Symbol::Day, {}, stamp, 1, {}}); }

  // answer(A,(view(A),month_is(12)))
  static LogicalForm month(int m) { return view_of({Symbol::MonthIs, {}, m, 1, {}}); }

  // answer(A,(view(A),cafe(A)))
  static LogicalForm view_kind(std::string kind) { return view_of({Symbol::Kind, std::move(kind), 0, 1, {}}); }

  // The predicate directly under the answer root.
  const LfNode& body() const { return root_.children.at(0); }
  const LfNode& leaf() const { return body().children.at(0); }

  friend bool operator==(const LogicalForm&, const LogicalForm&) = default;

 private:
  static LogicalForm view_of(LfNode leaf) {
    LfNode v{Symbol::View, {}, 0, 1, {std::move(leaf)}};
    return LogicalForm(LfNode{Symbol::Answer, {}, 0, 1, {std::move(v)}});
  }

  LfNode root_;
};

// Throws MalformedForm unless the tree is one of the interpretable shapes.
inline void validate(const LogicalForm& z) {
  auto fail = [](std::string why) { throw Error(ErrorCode::MalformedForm, std::move(why)); };
  const LfNode& root = z.root();
  if (root.symbol != Symbol::Answer) fail("root must be answer");
  if (root.children.size() != 1) fail("answer takes exactly one body");
  const LfNode& body = root.children[0];
  if (body.symbol == Symbol::Answer) fail("nested answer");
  if (static_cast<int>(body.children.size()) > arity(body.symbol)) fail("too many children");
  if (body.children.size() != 1) fail("body needs exactly one argument node");
  const LfNode& leaf = body.children[0];
  if (!leaf.children.empty()) fail("leaf predicates take no children");
  if (is_relation(body.symbol)) {
    if (leaf.symbol != Symbol::Const || leaf.slot != 2) fail("relation must bind const in its second slot");
  } else if (body.symbol == Symbol::View) {
    switch (leaf.symbol) {
      case Symbol::Const:
      case Symbol::Day:
      case Symbol::MonthIs:
      case Symbol::Kind:
        break;
      default:
        fail("view cannot take " + std::string(symbol_name(leaf.symbol)));
    }
    if (leaf.symbol == Symbol::Day && !calendar::valid(leaf.value)) fail("day needs a valid YYYYMMDD stamp");
    if (leaf.symbol == Symbol::MonthIs && (leaf.value < 1 || leaf.value > 12)) fail("month out of range");
  } else {
    fail(std::string(symbol_name(body.symbol)) + " cannot be a body");
  }
  if ((leaf.symbol == Symbol::Const || leaf.symbol == Symbol::Kind) && leaf.text.empty()) {
    fail("const needs an entity name");
  }
}

// ---------------------------------------------------------------------------
// Canonical text

inline std::string to_canonical_text(const LogicalForm& z) {
  validate(z);
  const LfNode& body = z.body();
  const LfNode& leaf = z.leaf();
  std::string out = "answer(A,(";
  if (is_relation(body.symbol)) {
    out += std::string(symbol_name(body.symbol)) + "(A,B),const(B,'" + leaf.text + "')";
  } else {
    out += "view(A),";
    switch (leaf.symbol) {
      case Symbol::Const: out += "const(A,'" + leaf.text + "')"; break;
      case Symbol::Day: out += "day(" + std::to_string(leaf.value) + ")"; break;
      case Symbol::MonthIs: out += "month_is(" + std::to_string(leaf.value) + ")"; break;
      case Symbol::Kind: out += leaf.text + "(A)"; break;
      default: break;
    }
  }
  out += "))";
  return out;
}

namespace detail {

struct Term;

struct TermArg {
  enum class Kind { Var, Str, Int, Conj } kind = Kind::Var;
  std::string text;
  std::int64_t number = 0;
  std::vector<Term> conj;
};

struct Term {
  std::string name;
  std::vector<TermArg> args;
};

class TermReader {
 public:
  explicit TermReader(std::string_view s) : s_(s) {}

  Term read_all() {
    Term t = term();
    skip_ws();
    if (pos_ != s_.size()) error("trailing input");
    return t;
  }

 private:
  [[noreturn]] void error(const std::string& what) const {
    throw Error(ErrorCode::MalformedForm, what, "at offset " + std::to_string(pos_) + " in " + std::string(s_));
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!eat(c)) error(std::string("expected '") + c + "'");
  }

  std::string ident() {
    skip_ws();
    const auto start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    if (start == pos_) error("expected identifier");
    return std::string(s_.substr(start, pos_ - start));
  }

  Term term() {
    Term t;
    t.name = ident();
    expect('(');
    if (!eat(')')) {
      do {
        t.args.push_back(arg());
      } while (eat(','));
      expect(')');
    }
    return t;
  }

  TermArg arg() {
    skip_ws();
    if (pos_ >= s_.size()) error("unexpected end");
    TermArg a;
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      a.kind = TermArg::Kind::Conj;
      do {
        a.conj.push_back(term());
      } while (eat(','));
      expect(')');
    } else if (c == '\'') {
      ++pos_;
      const auto close = s_.find('\'', pos_);
      if (close == std::string_view::npos) error("unterminated string");
      a.kind = TermArg::Kind::Str;
      a.text = std::string(s_.substr(pos_, close - pos_));
      pos_ = close + 1;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-') {
      const auto start = pos_++;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      a.kind = TermArg::Kind::Int;
      a.number = std::stoll(std::string(s_.substr(start, pos_ - start)));
    } else {
      a.kind = TermArg::Kind::Var;
      a.text = ident();
    }
    return a;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Inverse of to_canonical_text.
inline LogicalForm parse_canonical_text(std::string_view s) {
  using detail::TermArg;
  auto fail = [&](const std::string& why) -> LogicalForm {
    throw Error(ErrorCode::MalformedForm, why, std::string(s));
  };
  const detail::Term t = detail::TermReader(s).read_all();
  if (t.name != "answer" || t.args.size() != 2 || t.args[0].kind != TermArg::Kind::Var ||
      t.args[1].kind != TermArg::Kind::Conj || t.args[1].conj.size() != 2) {
    return fail("expected answer(V,(P,Q))");
  }
  const std::string& top = t.args[0].text;
  const detail::Term& p = t.args[1].conj[0];
  const detail::Term& q = t.args[1].conj[1];
  auto is_var = [](const TermArg& a, const std::string& v) { return a.kind == TermArg::Kind::Var && a.text == v; };

  LogicalForm z;
  if (auto rel = relation_from_name(p.name)) {
    if (p.args.size() != 2 || !is_var(p.args[0], top) || p.args[1].kind != TermArg::Kind::Var ||
        p.args[1].text == top) {
      return fail("relation must be rel(A,B)");
    }
    if (q.name != "const" || q.args.size() != 2 || !is_var(q.args[0], p.args[1].text) ||
        q.args[1].kind != TermArg::Kind::Str) {
      return fail("relation must be followed by const(B,'name')");
    }
    z = LogicalForm::spatial(*rel, q.args[1].text);
  } else if (p.name == "view") {
    if (p.args.size() != 1 || !is_var(p.args[0], top)) return fail("view takes the answer variable");
    if (q.name == "const" && q.args.size() == 2 && is_var(q.args[0], top) && q.args[1].kind == TermArg::Kind::Str) {
      z = LogicalForm::view_entity(q.args[1].text);
    } else if (q.name == "day" && q.args.size() == 1 && q.args[0].kind == TermArg::Kind::Int) {
      z = LogicalForm::day(static_cast<DayStamp>(q.args[0].number));
    } else if (q.name == "month_is" && q.args.size() == 1 && q.args[0].kind == TermArg::Kind::Int) {
      z = LogicalForm::month(static_cast<int>(q.args[0].number));
    } else if (q.args.size() == 1 && is_var(q.args[0], top) && q.name != "const" && q.name != "answer" &&
               q.name != "view" && !relation_from_name(q.name)) {
      z = LogicalForm::view_kind(q.name);
    } else {
      return fail("unsupported view argument " + q.name);
    }
  } else {
    return fail("unknown predicate " + p.name);
  }
  validate(z);
  return z;
}

// ---------------------------------------------------------------------------
// Interpretation

struct GeometryConfig {
  double max_radius_m = 500.0;   // cardinal relations
  double near_radius_m = 100.0;
  double here_radius_m = 100.0;  // month queries around the user
  double view_radius_m = 50.0;   // photos of an entity itself
};

// Cardinal cone test. Bearings exactly on 45/135/225/315 go to the
// north/south cone.
inline bool in_cone(Symbol relation, double bearing) {
  switch (relation) {
    case Symbol::FrontOf: return bearing <= 45.0 || bearing >= 315.0;
    case Symbol::RightOf: return bearing > 45.0 && bearing < 135.0;
    case Symbol::Behind: return bearing >= 135.0 && bearing <= 225.0;
    case Symbol::LeftOf: return bearing > 225.0 && bearing < 315.0;
    default: return false;
  }
}

inline bool eval_spatial(Symbol relation, geo::LatLon anchor, geo::LatLon candidate,
                         const GeometryConfig& cfg = {}) {
  const double d = geo::distance_m(anchor, candidate);
  if (d <= 0.0) return false;
  if (relation == Symbol::Near) return d <= cfg.near_radius_m;
  if (d > cfg.max_radius_m) return false;
  return in_cone(relation, geo::initial_bearing_deg(anchor, candidate));
}

struct Denotation {
  std::vector<std::string> media_ids;  // ascending distance to the anchor, then id

  friend bool operator==(const Denotation&, const Denotation&) = default;
};

inline Denotation evaluate(const LogicalForm& z, const WorldSnapshot& w, const GeometryConfig& cfg = {}) {
  validate(z);
  const LfNode& body = z.body();
  const LfNode& leaf = z.leaf();

  auto resolve = [&](const std::string& name) -> const GeoFact& {
    const GeoFact* f = w.find_fact(name);
    if (!f) throw Error(ErrorCode::UnknownEntity, "entity not in world", name);
    return *f;
  };

  geo::LatLon anchor = w.context().coords();
  std::vector<geo::LatLon> kind_sites;
  if (leaf.symbol == Symbol::Const) anchor = resolve(leaf.text).coords();
  if (leaf.symbol == Symbol::Kind) {
    for (const auto& f : w.facts()) {
      if (f.kind == leaf.text) kind_sites.push_back(f.coords());
    }
  }

  auto admits = [&](const MediaRecord& m) {
    if (is_relation(body.symbol)) return eval_spatial(body.symbol, anchor, m.coords(), cfg);
    switch (leaf.symbol) {
      case Symbol::Const: return geo::distance_m(anchor, m.coords()) <= cfg.view_radius_m;
      case Symbol::Day: return m.timestamp == leaf.value;
      case Symbol::MonthIs: return m.month == leaf.value && geo::distance_m(anchor, m.coords()) <= cfg.here_radius_m;
      case Symbol::Kind:
        return std::any_of(kind_sites.begin(), kind_sites.end(),
                           [&](geo::LatLon s) { return geo::distance_m(s, m.coords()) <= cfg.view_radius_m; });
      default: return false;
    }
  };

  std::vector<std::pair<double, const MediaRecord*>> hits;
  for (const auto& m : w.media()) {
    if (admits(m)) hits.emplace_back(geo::distance_m(anchor, m.coords()), &m);
  }
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first, a.second->id) < std::tie(b.first, b.second->id);
  });
  Denotation d;
  d.media_ids.reserve(hits.size());
  for (const auto& [dist, m] : hits) d.media_ids.push_back(m->id);
  return d;
}

}  // namespace xmego
