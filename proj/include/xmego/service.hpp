#pragma once

#include <atomic>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "xmego/context.hpp"
#include "xmego/learner.hpp"
#include "xmego/parser.hpp"
#include "xmego/records.hpp"
#include "xmego/store.hpp"

namespace xmego {

struct ServiceConfig {
  std::filesystem::path data_dir;  // empty: nothing is persisted
  std::size_t query_history = 10000;
  ParserConfig parser;
  FeedbackConfig feedback;
};

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;

  json json_body() const { return json::parse(body); }
};

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownUser:
    case ErrorCode::UnknownQuery:
    case ErrorCode::UnknownFact: return 404;
    case ErrorCode::NoCandidates:
    case ErrorCode::UnknownEntity:
    case ErrorCode::ConflictingTemporal: return 422;
    case ErrorCode::Io: return 500;
    default: return 400;
  }
}

inline HttpReply error_reply(int status, std::string_view code, std::string_view message, std::string_view detail) {
  return {status, "application/json",
          json{{"code", code}, {"message", message}, {"detail", detail}}.dump()};
}

inline HttpReply error_reply(const Error& e) {
  return error_reply(http_status(e.code()), to_string(e.code()), e.message(), e.detail());
}

inline std::string_view content_type_for(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  if (ext == ".mp4") return "video/mp4";
  if (ext == ".mov") return "video/quicktime";
  if (ext == ".webm") return "video/webm";
  return "application/octet-stream";
}

// Request handling and persistence, independent of the HTTP transport.
class Service {
 public:
  explicit Service(ServiceConfig config = {}, Lexicon lexicon = Lexicon::defaults())
      : config_(std::move(config)), parser_(config_.parser, std::move(lexicon)) {
    if (!config_.data_dir.empty()) load();
  }

  WorldStore& world() { return world_; }
  ParamStore& params() { return params_; }
  const SemanticParser& parser() const { return parser_; }
  const ServiceConfig& config() const { return config_; }

  // --- persistence -------------------------------------------------------

  void load() {
    namespace fs = std::filesystem;
    const auto& dir = config_.data_dir;
    std::vector<GeoFact> facts;
    std::vector<MediaRecord> media;
    if (std::ifstream in(dir / "facts.jsonl"); in) {
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty()) facts.push_back(fact_from_json(json::parse(line)));
      }
    }
    if (std::ifstream in(dir / "media.jsonl"); in) {
      auto parsed = parse_manifest(in);
      if (!parsed.invalid.empty()) {
        throw Error(ErrorCode::Io, "stored media file is corrupt",
                    "line " + std::to_string(parsed.invalid.front().line) + ": " + parsed.invalid.front().reason);
      }
      media = std::move(parsed.records);
    }
    world_.replace_world(std::move(facts), std::move(media));
    if (fs::is_directory(dir / "params")) {
      for (const auto& entry : fs::directory_iterator(dir / "params")) {
        if (entry.path().extension() != ".theta") continue;
        std::ifstream in(entry.path());
        ParamVector p = read_params(in);
        if (p.owner == "shared") {
          params_.publish_shared(std::move(p));
        } else {
          params_.restore_fork(std::move(p));
        }
      }
    }
  }

  void save_world() const {
    if (config_.data_dir.empty()) return;
    std::ostringstream facts, media;
    for (const auto& f : *world_.facts()) facts << to_json(f).dump() << '\n';
    for (const auto& m : *world_.media()) media << to_json(m).dump() << '\n';
    write_atomically(config_.data_dir / "facts.jsonl", facts.str());
    write_atomically(config_.data_dir / "media.jsonl", media.str());
  }

  void save_params(const ParamVector& p) const {
    if (config_.data_dir.empty()) return;
    std::ostringstream out;
    write_params(out, p, config_hash(describe(config_)));
    write_atomically(config_.data_dir / "params" / (file_stem(p.owner) + ".theta"), out.str());
  }

  void publish_shared(ParamVector p) {
    params_.publish_shared(std::move(p));
    save_params(*params_.shared());
  }

  // --- endpoints ---------------------------------------------------------

  HttpReply post_context(const std::string& body) {
    return guarded([&] {
      const json j = parse_body(body);
      const UserContext ctx = context_from_json(j, calendar::today());
      const auto version = world_.set_user_context(ctx);
      return ok(json{{"version", version}});
    });
  }

  HttpReply post_query(const std::string& body) {
    return guarded([&]() -> HttpReply {
      const json j = parse_body(body);
      const auto user_id = detail::required<std::string>(j, "user_id");
      const auto text = detail::required<std::string>(j, "text");
      Frame frame = Frame::Geomagnetic;
      if (auto it = j.find("frame"); it != j.end() && !it->is_null()) frame = parse_frame(it->get<std::string>());

      const WorldSnapshot w = world_.snapshot(user_id);
      const ResolvedQuery q = resolve(text, w.context(), frame, parser_.lexicon());
      const auto theta = params_.for_user(user_id);
      const ParseResult parsed = parser_.parse_topk(q, w, *theta, 1);
      const Denotation d = evaluate(parsed.argmax().form, w, parser_.config().geometry);

      json retrievals = json::array();
      for (const auto& id : d.media_ids) {
        const MediaRecord* m = w.find_media(id);
        retrievals.push_back({{"media_id", m->id},
                              {"kind", std::string(to_string(m->kind))},
                              {"uri", m->uri},
                              {"lat", m->lat},
                              {"lon", m->lon},
                              {"timestamp", m->timestamp}});
      }
      const std::string query_id = remember(user_id, {text, w.context(), frame, d.media_ids});
      return ok(json{{"query_id", query_id},
                     {"retrievals", std::move(retrievals)},
                     {"logical_form", parsed.argmax().canonical},
                     {"frame", std::string(to_string(frame))},
                     {"params_version", theta->version}});
    });
  }

  HttpReply post_feedback(const std::string& body) {
    return guarded([&]() -> HttpReply {
      const json j = parse_body(body);
      const auto user_id = detail::required<std::string>(j, "user_id");
      const auto query_id = detail::required<std::string>(j, "query_id");
      const auto record = recall(user_id, query_id);
      if (!record) throw Error(ErrorCode::UnknownQuery, "unknown query id", query_id);

      FeedbackEvent event;
      event.user_id = user_id;
      event.query_text = record->text;
      event.context = record->context;
      event.frame = record->frame;
      event.shown = record->shown;
      std::set<std::string> relevant;
      for (const auto& mark : j.at("marks")) {
        const auto id = detail::required<std::string>(mark, "media_id");
        if (std::find(event.shown.begin(), event.shown.end(), id) == event.shown.end()) {
          throw Error(ErrorCode::InvalidFeedback, "mark refers to media that was not shown", id);
        }
        if (detail::required<bool>(mark, "relevant")) relevant.insert(id);
      }
      for (const auto& id : event.shown) {
        if (relevant.contains(id)) event.marked_relevant.push_back(id);
      }
      if (auto it = j.find("timestamp"); it != j.end() && it->is_number_integer()) event.timestamp = it->get<std::int64_t>();

      if (!params_.has_fork(user_id)) {
        try {
          params_.fork(user_id);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::AlreadyForked) throw;
        }
      }
      const auto outcome = params_.apply_feedback(event, world_.snapshot_with(record->context), parser_, config_.feedback);
      save_params(outcome.params);
      return ok(json{{"params_version", outcome.params.version}});
    });
  }

  HttpReply get_media(const std::string& id) {
    const auto media = world_.media();
    const MediaRecord* found = nullptr;
    for (const auto& m : *media) {
      if (m.id == id) found = &m;
    }
    if (!found) return error_reply(404, "UnknownMedia", "no media with this id", id);
    std::filesystem::path path(found->uri);
    if (path.is_relative() && !config_.data_dir.empty()) path = config_.data_dir / path;
    std::ifstream in(path, std::ios::binary);
    if (!in) return error_reply(410, "MediaGone", "media file is no longer available", found->uri);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    return {200, std::string(content_type_for(path)), bytes.str()};
  }

 private:
  struct QueryRecord {
    std::string text;
    UserContext context;
    Frame frame = Frame::Geomagnetic;
    std::vector<std::string> shown;
  };

  struct History {
    std::deque<std::string> order;
    std::unordered_map<std::string, QueryRecord> by_id;
  };

  static std::string describe(const ServiceConfig& c) {
    std::ostringstream s;
    s << std::setprecision(17) << "beam_cap=" << c.parser.beam_cap << ";deictic=" << c.parser.deictic_entities
      << ";max_radius=" << c.parser.geometry.max_radius_m << ";near_radius=" << c.parser.geometry.near_radius_m
      << ";here_radius=" << c.parser.geometry.here_radius_m << ";view_radius=" << c.parser.geometry.view_radius_m
      << ";feedback_eta=" << c.feedback.eta << ";demote=" << c.feedback.demote;
    return s.str();
  }

  // Owner names become file names; anything outside [A-Za-z0-9_-] is hex-escaped.
  static std::string file_stem(const std::string& owner) {
    std::string out;
    for (unsigned char c : owner) {
      if (std::isalnum(c) || c == '_' || c == '-') {
        out.push_back(static_cast<char>(c));
      } else {
        char buf[4];
        std::snprintf(buf, sizeof buf, "%%%02X", c);
        out += buf;
      }
    }
    return out;
  }

  static void write_atomically(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << content;
      if (!out) throw Error(ErrorCode::Io, "cannot write file", tmp);
    }
    std::filesystem::rename(tmp, path);
  }

  static json parse_body(const std::string& body) {
    try {
      json j = json::parse(body);
      if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
      return j;
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::InvalidArgument, "request body is not JSON", e.what());
    }
  }

  static HttpReply ok(const json& j) { return {200, "application/json", j.dump()}; }

  template <typename F>
  HttpReply guarded(F&& handler) {
    try {
      return handler();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoCandidates) {
        return error_reply(422, to_string(e.code()), e.message(), e.detail());
      }
      return error_reply(e);
    } catch (const json::exception& e) {
      return error_reply(400, "InvalidArgument", "malformed request", e.what());
    }
  }

  std::string remember(const std::string& user_id, QueryRecord record) {
    const std::string id = "q" + std::to_string(++next_query_);
    std::lock_guard lock(history_mu_);
    History& h = history_[user_id];
    h.order.push_back(id);
    h.by_id.emplace(id, std::move(record));
    while (h.order.size() > config_.query_history) {
      h.by_id.erase(h.order.front());
      h.order.pop_front();
    }
    return id;
  }

  std::optional<QueryRecord> recall(const std::string& user_id, const std::string& query_id) const {
    std::lock_guard lock(history_mu_);
    auto h = history_.find(user_id);
    if (h == history_.end()) return std::nullopt;
    auto it = h->second.by_id.find(query_id);
    if (it == h->second.by_id.end()) return std::nullopt;
    return it->second;
  }

  ServiceConfig config_;
  SemanticParser parser_;
  WorldStore world_;
  ParamStore params_;
  std::atomic<std::uint64_t> next_query_{0};
  mutable std::mutex history_mu_;
  std::map<std::string, History> history_;
};

}  // namespace xmego
