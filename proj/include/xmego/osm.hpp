#pragma once

#include <expat.h>

#include <array>
#include <charconv>
#include <cstring>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xmego/world.hpp"

namespace xmego::osm {

// Tag keys whose value names the entity category, in priority order.
inline constexpr std::array<std::string_view, 5> kKindKeys = {"amenity", "building", "shop", "highway", "leisure"};

// Extra name tags folded into the alias set.
inline constexpr std::array<std::string_view, 5> kAliasKeys = {"alt_name", "short_name", "official_name",
                                                               "old_name", "name:en"};

struct ParsedNodes {
  std::vector<GeoFact> facts;  // in document order, duplicates not yet removed
  std::size_t nodes_seen = 0;
  std::size_t nodes_skipped = 0;
};

namespace detail {

struct NodeState {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
  std::vector<std::pair<std::string, std::string>> tags;
};

struct ParseState {
  XML_Parser parser = nullptr;
  ParsedNodes out;
  std::optional<NodeState> node;
  int depth = 0;
  int node_depth = -1;
  std::optional<Error> failure;
};

inline double parse_coordinate(const char* raw, std::string_view what, std::string_view node_id) {
  double value = 0.0;
  const std::string_view s(raw);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::InvalidCoordinate, "unparseable " + std::string(what),
                "node " + std::string(node_id) + ": '" + std::string(s) + "'");
  }
  return value;
}

inline void finish_node(ParseState& st) {
  NodeState node = std::move(*st.node);
  st.node.reset();
  ++st.out.nodes_seen;
  auto tag = [&](std::string_view key) -> const std::string* {
    for (const auto& [k, v] : node.tags) {
      if (k == key) return &v;
    }
    return nullptr;
  };
  const std::string* name = tag("name");
  const std::string* kind = nullptr;
  std::string_view kind_key;
  for (auto key : kKindKeys) {
    if ((kind = tag(key))) {
      kind_key = key;
      break;
    }
  }
  if (!name || !kind) {
    ++st.out.nodes_skipped;
    return;
  }
  // building=yes and friends carry no category; the key itself is the kind.
  const std::string_view kind_value = (*kind == "yes") ? kind_key : std::string_view(*kind);
  GeoFact fact;
  try {
    fact = make_fact(kind_value, *name, node.lat, node.lon);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyName) throw;
    ++st.out.nodes_skipped;
    return;
  }
  for (auto key : kAliasKeys) {
    if (const auto* v = tag(key)) {
      for (const auto& part : text::split(*v, ';')) {
        try {
          fact.aliases.insert(text::normalize_name(part));
        } catch (const Error&) {
        }
      }
    }
  }
  st.out.facts.push_back(std::move(fact));
}

inline void XMLCALL on_start(void* user, const XML_Char* name, const XML_Char** attrs) {
  auto& st = *static_cast<ParseState*>(user);
  ++st.depth;
  if (st.failure) return;
  try {
    if (std::strcmp(name, "node") == 0 && !st.node) {
      NodeState node;
      const char* lat = nullptr;
      const char* lon = nullptr;
      for (int i = 0; attrs[i]; i += 2) {
        if (std::strcmp(attrs[i], "id") == 0) node.id = attrs[i + 1];
        if (std::strcmp(attrs[i], "lat") == 0) lat = attrs[i + 1];
        if (std::strcmp(attrs[i], "lon") == 0) lon = attrs[i + 1];
      }
      if (!lat || !lon) {
        throw Error(ErrorCode::InvalidCoordinate, "node without lat/lon", "node " + node.id);
      }
      node.lat = parse_coordinate(lat, "lat", node.id);
      node.lon = parse_coordinate(lon, "lon", node.id);
      if (!geo::valid({node.lat, node.lon})) {
        throw Error(ErrorCode::InvalidCoordinate, "coordinate out of range",
                    "node " + node.id + ": " + lat + "," + lon);
      }
      st.node = std::move(node);
      st.node_depth = st.depth;
    } else if (std::strcmp(name, "tag") == 0 && st.node && st.depth == st.node_depth + 1) {
      std::string k;
      std::string v;
      for (int i = 0; attrs[i]; i += 2) {
        if (std::strcmp(attrs[i], "k") == 0) k = attrs[i + 1];
        if (std::strcmp(attrs[i], "v") == 0) v = attrs[i + 1];
      }
      if (!k.empty()) st.node->tags.emplace_back(std::move(k), std::move(v));
    }
  } catch (const Error& e) {
    st.failure = e;
    XML_StopParser(st.parser, XML_FALSE);
  }
}

inline void XMLCALL on_end(void* user, const XML_Char* name) {
  auto& st = *static_cast<ParseState*>(user);
  if (!st.failure && st.node && st.depth == st.node_depth && std::strcmp(name, "node") == 0) {
    try {
      finish_node(st);
    } catch (const Error& e) {
      st.failure = e;
      XML_StopParser(st.parser, XML_FALSE);
    }
  }
  --st.depth;
}

}  // namespace detail

// Streams an OSM XML document and extracts one candidate fact per named,
// categorised node. Ways and relations are ignored.
inline ParsedNodes parse_nodes(std::istream& in) {
  std::unique_ptr<XML_ParserStruct, decltype(&XML_ParserFree)> parser(XML_ParserCreate("UTF-8"), &XML_ParserFree);
  if (!parser) throw Error(ErrorCode::Io, "cannot allocate XML parser");
  detail::ParseState st;
  st.parser = parser.get();
  XML_SetUserData(parser.get(), &st);
  XML_SetElementHandler(parser.get(), &detail::on_start, &detail::on_end);

  std::array<char, 1 << 16> buf{};
  bool done = false;
  while (!done) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = in.gcount();
    done = got < static_cast<std::streamsize>(buf.size());
    if (XML_Parse(parser.get(), buf.data(), static_cast<int>(got), done ? XML_TRUE : XML_FALSE) == XML_STATUS_ERROR) {
      if (st.failure) throw *st.failure;
      const auto offset = XML_GetCurrentByteIndex(parser.get());
      throw Error(ErrorCode::MalformedXml, XML_ErrorString(XML_GetErrorCode(parser.get())),
                  "byte offset " + std::to_string(offset));
    }
  }
  if (st.failure) throw *st.failure;
  return std::move(st.out);
}

// Prolog-style rendering used in logs and golden files:
// bus_stop('universitaet_mensa',49.2562752,7.0436771)
inline std::string render_fact(const GeoFact& f) {
  auto num = [](double v) {
    std::array<char, 32> b{};
    auto [p, ec] = std::to_chars(b.data(), b.data() + b.size(), v);
    return std::string(b.data(), p);
  };
  return f.kind + "('" + f.name + "'," + num(f.lat) + "," + num(f.lon) + ")";
}

}  // namespace xmego::osm
