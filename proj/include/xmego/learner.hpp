#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "xmego/context.hpp"
#include "xmego/logic.hpp"
#include "xmego/parser.hpp"
#include "xmego/records.hpp"
#include "xmego/world.hpp"

namespace xmego {

struct TrainingPair {
  std::string query_text;
  UserContext context;
  std::vector<std::string> gold_ids;
  Frame frame = Frame::Geomagnetic;  // convention the query text is read in

  friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

struct FeedbackEvent {
  std::string user_id;
  std::string query_text;
  UserContext context;
  Frame frame = Frame::Geomagnetic;
  std::vector<std::string> shown;
  std::vector<std::string> marked_relevant;
  std::int64_t timestamp = 0;
};

inline bool same_set(std::vector<std::string> a, std::vector<std::string> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

// A question with its candidate trees, their features and which of them
// reproduce the gold retrievals. Candidate generation does not depend on θ,
// so this is computed once per pair and reused across epochs.
struct PreparedPair {
  std::vector<LogicalForm> forms;
  std::vector<std::string> canonical;
  std::vector<FeatureVector> features;
  std::vector<bool> consistent;

  bool any_consistent() const { return std::find(consistent.begin(), consistent.end(), true) != consistent.end(); }
};

inline PreparedPair prepare_pair(const TrainingPair& pair, const WorldSnapshot& world, const SemanticParser& parser) {
  PreparedPair prepared;
  const WorldSnapshot w = world.with_context(pair.context);
  const ResolvedQuery q = resolve(pair.query_text, pair.context, pair.frame, parser.lexicon());
  const auto tokens = parser.tokenize(q.text, w);
  std::vector<LogicalForm> forms;
  try {
    forms = parser.generate_candidates(tokens, q, w);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoCandidates) throw;
    return prepared;
  }
  for (auto& z : forms) {
    prepared.canonical.push_back(to_canonical_text(z));
    prepared.features.push_back(SemanticParser::featurize(tokens, z));
    prepared.consistent.push_back(same_set(evaluate(z, w, parser.config().geometry).media_ids, pair.gold_ids));
    prepared.forms.push_back(std::move(z));
  }
  return prepared;
}

inline std::vector<double> candidate_probabilities(const PreparedPair& p, const ParamVector& theta) {
  std::vector<double> scores;
  scores.reserve(p.features.size());
  for (const auto& phi : p.features) scores.push_back(theta.dot(phi));
  const double top = scores.empty() ? 0.0 : *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (auto& s : scores) z += (s = std::exp(s - top));
  for (auto& s : scores) s /= z;
  return scores;
}

// log Σ_{z consistent} p(z|x,θ); -inf when nothing is consistent.
inline double log_marginal(const PreparedPair& p, const ParamVector& theta) {
  const auto probs = candidate_probabilities(p, theta);
  double mass = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (p.consistent[i]) mass += probs[i];
  }
  return std::log(mass);
}

// E_{p(z|x,θ, z consistent)}[φ] − E_{p(z|x,θ)}[φ], the gradient of
// log_marginal. Empty when no candidate is consistent.
inline std::optional<FeatureVector> marginal_gradient(const PreparedPair& p, const ParamVector& theta) {
  if (!p.any_consistent()) return std::nullopt;
  const auto probs = candidate_probabilities(p, theta);
  double mass = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (p.consistent[i]) mass += probs[i];
  }
  FeatureVector g;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double w = (p.consistent[i] ? probs[i] / mass : 0.0) - probs[i];
    if (w == 0.0) continue;
    for (const auto& [k, v] : p.features[i].entries()) g.add(k, w * v);
  }
  g.entries();
  return g;
}

// Beam members whose denotation equals the gold set.
inline std::vector<BeamEntry> consistent_forms(const TrainingPair& pair, const WorldSnapshot& world,
                                               const ParamVector& theta, const SemanticParser& parser) {
  const WorldSnapshot w = world.with_context(pair.context);
  const ResolvedQuery q = resolve(pair.query_text, pair.context, pair.frame, parser.lexicon());
  std::vector<BeamEntry> out;
  ParseResult r;
  try {
    r = parser.parse_topk(q, w, theta, parser.config().beam_cap);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoCandidates) throw;
    return out;
  }
  for (auto& b : r.beam) {
    if (same_set(evaluate(b.form, w, parser.config().geometry).media_ids, pair.gold_ids)) out.push_back(std::move(b));
  }
  return out;
}

struct GradStep {
  ParamVector params;
  bool skipped = false;
};

inline GradStep grad_step(const PreparedPair& prepared, const ParamVector& theta, double eta) {
  GradStep out{theta, false};
  auto g = marginal_gradient(prepared, theta);
  if (!g) {
    out.skipped = true;
    return out;
  }
  out.params.add_scaled(*g, eta);
  return out;
}

inline GradStep grad_step(const TrainingPair& pair, const WorldSnapshot& world, const ParamVector& theta, double eta,
                          const SemanticParser& parser) {
  return grad_step(prepare_pair(pair, world, parser), theta, eta);
}

struct TrainConfig {
  int epochs = 10;
  double eta = 0.1;
  double l2 = 1e-4;
  std::optional<std::uint64_t> seed;
  int max_halvings = 10;

  std::string describe() const {
    std::ostringstream s;
    s << std::setprecision(17) << "epochs=" << epochs << ";eta=" << eta << ";l2=" << l2
      << ";seed=" << (seed ? std::to_string(*seed) : "none") << ";max_halvings=" << max_halvings;
    return s.str();
  }
};

struct EpochReport {
  double objective = 0.0;  // regularised, after the epoch
  double eta = 0.0;        // step size actually taken (0 if rejected)
  int halvings = 0;
  bool accepted = true;
  std::size_t skipped_pairs = 0;
};

struct TrainReport {
  double initial_objective = 0.0;
  std::vector<EpochReport> epochs;
};

struct TrainResult {
  ParamVector params;
  TrainReport report;
};

// Σ_pairs log Σ_{z consistent} p(z|x,θ) − N·l2/2·‖θ‖²; pairs with no
// consistent candidate contribute only through N.
inline double regularized_objective(const std::vector<PreparedPair>& data, const ParamVector& theta, double l2) {
  double ll = 0.0;
  for (const auto& p : data) {
    if (p.any_consistent()) ll += log_marginal(p, theta);
  }
  return ll - static_cast<double>(data.size()) * l2 / 2.0 * theta.squared_norm();
}

// Marginal-likelihood ascent. Each epoch sums the per-pair gradients at the
// epoch's starting point (in seeded shuffled order), then takes the largest
// step η/2^h, h ≤ max_halvings, that does not lower the objective. If no
// such step exists the epoch is rejected and θ stays put.
inline TrainResult train(const std::vector<PreparedPair>& data, const TrainConfig& config,
                         ParamVector init = ParamVector{}) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  if (!config.seed) throw Error(ErrorCode::InvalidArgument, "training requires a seed");
  std::mt19937_64 rng(*config.seed);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  result.params = std::move(init);
  const double n = static_cast<double>(data.size());
  double current = regularized_objective(data, result.params, config.l2);
  result.report.initial_objective = current;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochReport er;
    std::map<std::string, double, std::less<>> sum;
    for (std::size_t i : order) {
      auto g = marginal_gradient(data[i], result.params);
      if (!g) {
        ++er.skipped_pairs;
        continue;
      }
      for (const auto& [k, v] : g->entries()) sum[k] += v;
    }
    for (const auto& [k, v] : result.params.weights) sum[k] -= n * config.l2 * v;

    er.accepted = false;
    double step = config.eta;
    for (int h = 0; h <= config.max_halvings; ++h, step /= 2.0) {
      ParamVector candidate = result.params;
      for (const auto& [k, v] : sum) candidate.weights[k] += step * v;
      const double obj = regularized_objective(data, candidate, config.l2);
      if (obj >= current) {
        result.params = std::move(candidate);
        current = obj;
        er.accepted = true;
        er.halvings = h;
        er.eta = step;
        break;
      }
    }
    if (!er.accepted) er.halvings = config.max_halvings;
    er.objective = current;
    result.report.epochs.push_back(er);
  }
  ++result.params.version;
  return result;
}

inline TrainResult train(const std::vector<TrainingPair>& dataset, const WorldSnapshot& world,
                         const TrainConfig& config, const SemanticParser& parser, ParamVector init = ParamVector{}) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  std::vector<PreparedPair> data;
  data.reserve(dataset.size());
  for (const auto& pair : dataset) data.push_back(prepare_pair(pair, world, parser));
  return train(data, config, std::move(init));
}

// ---------------------------------------------------------------------------
// Online relevance feedback

struct FeedbackConfig {
  double eta = 0.1;
  // Push the shown tree down when no candidate reproduces the marked set.
  bool demote = true;
};

struct FeedbackOutcome {
  ParamVector params;
  enum class Kind { Promoted, Demoted, Skipped } kind = Kind::Skipped;
};

// One online update of a user's parameters from relevance marks on the
// retrievals of that user's current argmax tree.
//  - marks reproduce some candidate's denotation: marginal-likelihood step
//    with gold = marked items;
//  - nothing marked, or the marked subset matches no candidate while some
//    shown items were rejected: demotion,
//    θ' = θ − η(φ(argmax) − E_p[φ]);
//  - otherwise θ is unchanged.
// The version advances on every call.
inline FeedbackOutcome feedback_update(const FeedbackEvent& event, const WorldSnapshot& world,
                                       const ParamVector& theta, const SemanticParser& parser,
                                       const FeedbackConfig& config = {}) {
  for (const auto& id : event.marked_relevant) {
    if (std::find(event.shown.begin(), event.shown.end(), id) == event.shown.end()) {
      throw Error(ErrorCode::InvalidFeedback, "marked media was not shown", id);
    }
  }
  FeedbackOutcome out{theta, FeedbackOutcome::Kind::Skipped};
  out.params.version = theta.version + 1;

  const WorldSnapshot w = world.with_context(event.context);
  const ResolvedQuery q = resolve(event.query_text, event.context, event.frame, parser.lexicon());
  const auto tokens = parser.tokenize(q.text, w);
  std::vector<LogicalForm> forms;
  try {
    forms = parser.generate_candidates(tokens, q, w);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoCandidates) throw;
    return out;
  }
  PreparedPair prepared;
  for (auto& z : forms) {
    prepared.canonical.push_back(to_canonical_text(z));
    prepared.features.push_back(SemanticParser::featurize(tokens, z));
    prepared.consistent.push_back(!event.marked_relevant.empty() &&
                                  same_set(evaluate(z, w, parser.config().geometry).media_ids, event.marked_relevant));
    prepared.forms.push_back(std::move(z));
  }

  if (prepared.any_consistent()) {
    auto g = marginal_gradient(prepared, theta);
    out.params.add_scaled(*g, config.eta);
    out.kind = FeedbackOutcome::Kind::Promoted;
    return out;
  }
  const bool rejected_something = event.marked_relevant.size() < event.shown.size() || event.shown.empty();
  if (!config.demote || !rejected_something) return out;

  const auto probs = candidate_probabilities(prepared, theta);
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best] || (probs[i] == probs[best] && prepared.canonical[i] < prepared.canonical[best])) {
      best = i;
    }
  }
  FeatureVector g;
  for (const auto& [k, v] : prepared.features[best].entries()) g.add(k, -v);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    for (const auto& [k, v] : prepared.features[i].entries()) g.add(k, probs[i] * v);
  }
  out.params.add_scaled(g, config.eta);
  out.kind = FeedbackOutcome::Kind::Demoted;
  return out;
}

inline ParamVector fork_params(const std::string& user_id, const ParamVector& shared) {
  ParamVector fork = shared;
  fork.owner = user_id;
  return fork;
}

// Shared θ plus per-user forks. Readers get immutable snapshots; every
// update publishes a new one.
class ParamStore {
 public:
  using Snapshot = std::shared_ptr<const ParamVector>;

  explicit ParamStore(ParamVector shared = {}) : shared_(std::make_shared<const ParamVector>(std::move(shared))) {}

  Snapshot shared() const {
    std::lock_guard lock(mu_);
    return shared_;
  }

  void publish_shared(ParamVector p) {
    p.owner = "shared";
    auto next = std::make_shared<const ParamVector>(std::move(p));
    std::lock_guard lock(mu_);
    shared_ = std::move(next);
  }

  // The user's fork if there is one, otherwise the shared parameters.
  Snapshot for_user(const std::string& user_id) const {
    std::lock_guard lock(mu_);
    auto it = forks_.find(user_id);
    return it == forks_.end() ? shared_ : it->second;
  }

  bool has_fork(const std::string& user_id) const {
    std::lock_guard lock(mu_);
    return forks_.contains(user_id);
  }

  Snapshot fork(const std::string& user_id) {
    std::lock_guard lock(mu_);
    if (forks_.contains(user_id)) throw Error(ErrorCode::AlreadyForked, "user already has a fork", user_id);
    auto f = std::make_shared<const ParamVector>(fork_params(user_id, *shared_));
    forks_.emplace(user_id, f);
    return f;
  }

  void restore_fork(ParamVector p) {
    std::lock_guard lock(mu_);
    const std::string owner = p.owner;
    forks_[owner] = std::make_shared<const ParamVector>(std::move(p));
  }

  // Applies feedback to the user's fork. Updates for one user are
  // serialised; other users are untouched.
  FeedbackOutcome apply_feedback(const FeedbackEvent& event, const WorldSnapshot& world,
                                 const SemanticParser& parser, const FeedbackConfig& config = {}) {
    std::lock_guard user_lock(user_mutex(event.user_id));
    Snapshot current;
    {
      std::lock_guard lock(mu_);
      auto it = forks_.find(event.user_id);
      if (it == forks_.end()) throw Error(ErrorCode::UnknownUser, "user has no parameter fork", event.user_id);
      current = it->second;
    }
    FeedbackOutcome outcome = feedback_update(event, world, *current, parser, config);
    auto next = std::make_shared<const ParamVector>(outcome.params);
    std::lock_guard lock(mu_);
    forks_[event.user_id] = std::move(next);
    return outcome;
  }

  std::vector<std::string> users() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [u, p] : forks_) out.push_back(u);
    return out;
  }

 private:
  std::mutex& user_mutex(const std::string& user_id) {
    std::lock_guard lock(mu_);
    auto& m = user_mutexes_[user_id];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
  }

  mutable std::mutex mu_;
  Snapshot shared_;
  std::map<std::string, Snapshot> forks_;
  std::map<std::string, std::unique_ptr<std::mutex>> user_mutexes_;
};

// ---------------------------------------------------------------------------
// Parameter files: a small header, then one "key<TAB>weight" line per
// feature, sorted by key.
//
//   # xmego-params 1
//   owner=shared
//   version=3
//   config_hash=9f2c...
//   lex:in_front_of→frontOf	1.25

inline std::string config_hash(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

inline void write_params(std::ostream& out, const ParamVector& p, std::string_view cfg_hash = {}) {
  out << "# xmego-params 1\n";
  out << "owner=" << p.owner << "\n";
  out << "version=" << p.version << "\n";
  out << "config_hash=" << cfg_hash << "\n";
  out << std::setprecision(17);
  for (const auto& [k, v] : p.weights) out << k << '\t' << v << '\n';
}

inline ParamVector read_params(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "# xmego-params 1") {
    throw Error(ErrorCode::InvalidArgument, "not a parameter file", line);
  }
  ParamVector p;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::InvalidArgument, "bad header line", line);
      const auto key = line.substr(0, eq);
      const auto value = line.substr(eq + 1);
      if (key == "owner") p.owner = value;
      else if (key == "version") p.version = std::stoull(value);
      continue;
    }
    p.weights[line.substr(0, tab)] = std::stod(line.substr(tab + 1));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Corpus files: one JSON object per line {query_text, context, gold_ids}.

inline json to_json(const TrainingPair& p) {
  json j{{"query_text", p.query_text}, {"context", to_json(p.context)}, {"gold_ids", p.gold_ids}};
  if (p.frame != Frame::Geomagnetic) j["frame"] = std::string(to_string(p.frame));
  return j;
}

inline TrainingPair pair_from_json(const json& j) {
  TrainingPair p;
  p.query_text = detail::required<std::string>(j, "query_text");
  p.context = context_from_json(j.at("context"));
  p.gold_ids = detail::required<std::vector<std::string>>(j, "gold_ids");
  if (p.gold_ids.empty()) throw Error(ErrorCode::InvalidArgument, "gold_ids is empty", p.query_text);
  if (j.contains("frame")) p.frame = parse_frame(j.at("frame").get<std::string>());
  return p;
}

inline void write_corpus(std::ostream& out, const std::vector<TrainingPair>& pairs) {
  for (const auto& p : pairs) out << to_json(p).dump() << '\n';
}

inline std::vector<TrainingPair> read_corpus(std::istream& in) {
  std::vector<TrainingPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      pairs.push_back(pair_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, "bad corpus line", "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return pairs;
}

}  // namespace xmego
