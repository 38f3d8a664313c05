#pragma once

#include <algorithm>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "xmego/learner.hpp"
#include "xmego/parser.hpp"
#include "xmego/records.hpp"
#include "xmego/synth.hpp"

namespace xmego {

struct EvalReport {
  std::optional<double> accuracy;         // exact set match, when gold is known
  double precision = 0.0;                 // relevant / retrieved
  double recall = 0.0;                    // relevant / n_queries
  double f1 = 0.0;
  std::optional<double> standard_recall;  // relevant / Σ|gold|, when gold is known
  std::size_t n_queries = 0;
  std::size_t n_retrievals = 0;
  std::size_t n_relevant = 0;
};

inline double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

struct QueryOutcome {
  std::vector<std::string> retrieved;
  std::vector<bool> relevant;  // one label per retrieved item
  std::optional<std::vector<std::string>> gold;
};

// Precision and recall as percentages-free fractions. Recall divides by the
// number of queries, not by the number of relevant items, so it can exceed 1
// when queries return several relevant items.
inline EvalReport score_run(const std::vector<QueryOutcome>& run, std::size_t n_queries) {
  EvalReport r;
  r.n_queries = n_queries;
  bool all_gold = !run.empty();
  std::size_t exact = 0;
  std::size_t gold_items = 0;
  for (const auto& q : run) {
    if (q.relevant.size() != q.retrieved.size()) {
      throw Error(ErrorCode::InvalidArgument, "relevance labels must cover every retrieved item");
    }
    r.n_retrievals += q.retrieved.size();
    r.n_relevant += static_cast<std::size_t>(std::count(q.relevant.begin(), q.relevant.end(), true));
    if (q.gold) {
      exact += same_set(q.retrieved, *q.gold) ? 1 : 0;
      gold_items += q.gold->size();
    } else {
      all_gold = false;
    }
  }
  r.precision = r.n_retrievals == 0 ? 0.0 : static_cast<double>(r.n_relevant) / static_cast<double>(r.n_retrievals);
  r.recall = n_queries == 0 ? 0.0 : static_cast<double>(r.n_relevant) / static_cast<double>(n_queries);
  r.f1 = f1_score(r.precision, r.recall);
  if (all_gold) {
    r.accuracy = static_cast<double>(exact) / static_cast<double>(run.size());
    r.standard_recall = gold_items == 0 ? 0.0 : static_cast<double>(r.n_relevant) / static_cast<double>(gold_items);
  }
  return r;
}

inline json to_json(const EvalReport& r) {
  json j{{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1},
         {"n_queries", r.n_queries}, {"n_retrievals", r.n_retrievals}, {"n_relevant", r.n_relevant}};
  j["accuracy"] = r.accuracy ? json(*r.accuracy) : json(nullptr);
  j["standard_recall"] = r.standard_recall ? json(*r.standard_recall) : json(nullptr);
  return j;
}

// Exact-match accuracy of the argmax tree. When several trees share the top
// score each gets an equal share of the query, so θ = 0 scores the expected
// accuracy of picking a candidate uniformly at random.
inline double exact_match_accuracy(const std::vector<PreparedPair>& data, const ParamVector& theta) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : data) {
    if (p.features.empty()) continue;
    std::vector<double> scores;
    for (const auto& phi : p.features) scores.push_back(theta.dot(phi));
    const double top = *std::max_element(scores.begin(), scores.end());
    std::size_t tied = 0, good = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] == top) {
        ++tied;
        good += p.consistent[i] ? 1 : 0;
      }
    }
    total += static_cast<double>(good) / static_cast<double>(tied);
  }
  return total / static_cast<double>(data.size());
}

inline std::vector<PreparedPair> prepare_all(const std::vector<TrainingPair>& pairs, const WorldSnapshot& w,
                                             const SemanticParser& parser) {
  std::vector<PreparedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(prepare_pair(p, w, parser));
  return out;
}

// Runs the argmax tree for every pair and scores retrievals against gold.
inline EvalReport evaluate_corpus(const std::vector<TrainingPair>& pairs, const WorldSnapshot& world,
                                  const ParamVector& theta, const SemanticParser& parser) {
  std::vector<QueryOutcome> run;
  for (const auto& pair : pairs) {
    QueryOutcome q;
    q.gold = pair.gold_ids;
    const WorldSnapshot w = world.with_context(pair.context);
    try {
      const auto r = parser.parse_topk(resolve(pair.query_text, pair.context, pair.frame, parser.lexicon()), w,
                                       theta, 1);
      q.retrieved = evaluate(r.argmax().form, w, parser.config().geometry).media_ids;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoCandidates) throw;
    }
    for (const auto& id : q.retrieved) {
      q.relevant.push_back(std::find(pair.gold_ids.begin(), pair.gold_ids.end(), id) != pair.gold_ids.end());
    }
    run.push_back(std::move(q));
  }
  return score_run(run, pairs.size());
}

// ---------------------------------------------------------------------------
// Learning curves

struct CurvePoint {
  std::size_t size = 0;
  double accuracy = 0.0;
};

inline std::vector<CurvePoint> learning_curve(const WorldSnapshot& world, synth::DatasetConfig generator,
                                              const std::vector<std::size_t>& sizes,
                                              const std::vector<TrainingPair>& eval_set,
                                              const TrainConfig& train_config, const SemanticParser& parser) {
  if (!std::is_sorted(sizes.begin(), sizes.end())) {
    throw Error(ErrorCode::InvalidArgument, "training-set sizes must be ascending");
  }
  const auto held_out = prepare_all(eval_set, world, parser);
  std::vector<CurvePoint> curve;
  for (std::size_t n : sizes) {
    ParamVector theta;
    if (n > 0) {
      generator.n = n;
      theta = train(synth::generate_dataset(world, generator, parser.config().geometry), world, train_config, parser)
                  .params;
    }
    curve.push_back({n, exact_match_accuracy(held_out, theta)});
  }
  return curve;
}

inline void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "size,accuracy\n";
  for (const auto& p : curve) out << p.size << ',' << p.accuracy << '\n';
}

// ---------------------------------------------------------------------------
// Personalization

struct Probe {
  std::string query_text;
  UserContext context;
  Frame frame = Frame::Geomagnetic;
};

// Argmax retrievals of one model for one probe; empty if nothing parses.
inline std::vector<std::string> answer(const Probe& probe, const WorldSnapshot& world, const ParamVector& theta,
                                       const SemanticParser& parser) {
  const WorldSnapshot w = world.with_context(probe.context);
  try {
    const auto r =
        parser.parse_topk(resolve(probe.query_text, probe.context, probe.frame, parser.lexicon()), w, theta, 1);
    return evaluate(r.argmax().form, w, parser.config().geometry).media_ids;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoCandidates) throw;
    return {};
  }
}

// Entry (i, j): model i's retrievals judged by annotator j.
inline std::vector<std::vector<EvalReport>> cross_user_matrix(const std::vector<ParamVector>& models,
                                                              const std::vector<synth::ScriptedAnnotator>& annotators,
                                                              const std::vector<Probe>& probes,
                                                              const WorldSnapshot& world,
                                                              const SemanticParser& parser) {
  if (models.size() < 2 || models.size() != annotators.size()) {
    throw Error(ErrorCode::InvalidArgument, "need one annotator per model and at least two users");
  }
  std::vector<std::vector<std::vector<std::string>>> answers(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (const auto& p : probes) answers[i].push_back(answer(p, world, models[i], parser));
  }
  std::vector<std::vector<EvalReport>> matrix(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t j = 0; j < annotators.size(); ++j) {
      std::vector<QueryOutcome> run;
      for (std::size_t k = 0; k < probes.size(); ++k) {
        const WorldSnapshot w = world.with_context(probes[k].context);
        run.push_back({answers[i][k], annotators[j].judge(probes[k].query_text, answers[i][k], w), std::nullopt});
      }
      matrix[i].push_back(score_run(run, probes.size()));
    }
  }
  return matrix;
}

// Fraction of probes on which the model's argmax retrievals equal what the
// annotator means.
inline double agreement(const ParamVector& theta, const synth::ScriptedAnnotator& annotator,
                        const std::vector<Probe>& probes, const WorldSnapshot& world, const SemanticParser& parser) {
  if (probes.empty()) return 0.0;
  std::size_t agree = 0;
  for (const auto& p : probes) {
    const WorldSnapshot w = world.with_context(p.context);
    agree += same_set(answer(p, world, theta, parser), annotator.relevant_set(p.query_text, w)) ? 1 : 0;
  }
  return static_cast<double>(agree) / static_cast<double>(probes.size());
}

struct SimulatedUser {
  std::string user_id;
  Frame convention = Frame::Geomagnetic;
};

struct PersonalizationConfig {
  std::vector<SimulatedUser> users = {{"u_geomagnetic", Frame::Geomagnetic}, {"u_user_centric", Frame::UserCentric}};
  std::size_t rounds = 100;
  std::size_t probes = 60;
  std::uint64_t seed = 11;
  double heading_deg = 90.0;  // every annotator faces this way
  FeedbackConfig feedback{0.5, true};
};

struct PersonalizationResult {
  std::vector<ParamVector> models;
  std::vector<synth::ScriptedAnnotator> annotators;
  std::vector<Probe> probes;
  std::vector<double> agreement_before;
  std::vector<double> agreement_after;
  std::vector<std::vector<EvalReport>> matrix;
};

// Spatial queries where every annotator means a non-empty set.
inline std::vector<Probe> spatial_probes(const WorldSnapshot& world, std::size_t n, std::uint64_t seed,
                                         double heading_deg, const std::vector<synth::ScriptedAnnotator>& annotators) {
  synth::DatasetConfig cfg;
  cfg.n = 4 * n;
  cfg.seed = seed;
  cfg.heading_deg = heading_deg;
  cfg.patterns = {true, false, false};
  cfg.query_time = world.context().query_time;
  std::vector<Probe> probes;
  for (const auto& a : synth::generate_annotated(world, cfg)) {
    if (probes.size() >= n) break;
    const WorldSnapshot w = world.with_context(a.pair.context);
    const bool covered = std::all_of(annotators.begin(), annotators.end(), [&](const auto& ann) {
      return !ann.relevant_set(a.pair.query_text, w).empty();
    });
    if (covered) probes.push_back({a.pair.query_text, a.pair.context, Frame::Geomagnetic});
  }
  return probes;
}

// Each simulated user forks `base`, asks `rounds` spatial questions, and
// marks the shown retrievals with their own annotator. The resulting forks
// are then cross-evaluated on a shared probe set.
inline PersonalizationResult run_personalization(const WorldSnapshot& world, const PersonalizationConfig& cfg,
                                                 const SemanticParser& parser, const ParamVector& base = {}) {
  PersonalizationResult out;
  const Cardinal facing = quantize_heading(cfg.heading_deg);
  for (const auto& u : cfg.users) out.annotators.emplace_back(u.convention, facing, parser.lexicon(),
                                                              parser.config().geometry);
  out.probes = spatial_probes(world, cfg.probes, cfg.seed + 1000, cfg.heading_deg, out.annotators);

  ParamStore store(base);
  for (std::size_t u = 0; u < cfg.users.size(); ++u) {
    const auto& user = cfg.users[u];
    const auto& annotator = out.annotators[u];
    store.fork(user.user_id);
    out.agreement_before.push_back(agreement(*store.for_user(user.user_id), annotator, out.probes, world, parser));

    synth::DatasetConfig qcfg;
    qcfg.n = cfg.rounds;
    qcfg.seed = cfg.seed + u;
    qcfg.heading_deg = cfg.heading_deg;
    qcfg.frame = user.convention;
    qcfg.patterns = {true, false, false};
    qcfg.query_time = world.context().query_time;
    qcfg.user_id = user.user_id;
    for (const auto& a : synth::generate_annotated(world, qcfg, parser.config().geometry)) {
      const Probe ask{a.pair.query_text, a.pair.context, Frame::Geomagnetic};
      const WorldSnapshot w = world.with_context(ask.context);
      FeedbackEvent event;
      event.user_id = user.user_id;
      event.query_text = ask.query_text;
      event.context = ask.context;
      event.frame = ask.frame;
      event.shown = answer(ask, world, *store.for_user(user.user_id), parser);
      const auto marks = annotator.judge(ask.query_text, event.shown, w);
      for (std::size_t k = 0; k < marks.size(); ++k) {
        if (marks[k]) event.marked_relevant.push_back(event.shown[k]);
      }
      store.apply_feedback(event, world, parser, cfg.feedback);
    }
    out.models.push_back(*store.for_user(user.user_id));
    out.agreement_after.push_back(agreement(out.models.back(), annotator, out.probes, world, parser));
  }
  out.matrix = cross_user_matrix(out.models, out.annotators, out.probes, world, parser);
  return out;
}

inline bool diagonally_dominant(const std::vector<std::vector<EvalReport>>& m) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m[i].size(); ++j) {
      if (i != j && !(m[i][i].f1 > m[i][j].f1)) return false;
    }
  }
  return true;
}

}  // namespace xmego
