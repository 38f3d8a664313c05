#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "xmego/learner.hpp"
#include "xmego/synth.hpp"

using namespace xmego;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an xmego::Error";
  return ErrorCode::Io;
}

constexpr double kLat = 49.2563;
constexpr double kLon = 7.0437;

// campus_center with one photo in each cardinal cone and one on top of it.
//   front_of = {v1, n1}, right_of = {e1}, behind = {s1}, left_of = {},
//   near = {v1}, view = {v1}
WorldSnapshot cones_world() {
  std::vector<GeoFact> facts = {make_fact("university", "campus_center", kLat, kLon)};
  std::vector<MediaRecord> media = {
      make_media("n1", MediaKind::Image, kLat + 0.0010, kLon, 20150510, "n1.jpg"),
      make_media("e1", MediaKind::Image, kLat, kLon + 0.0015, 20150510, "e1.jpg"),
      make_media("s1", MediaKind::Image, kLat - 0.0010, kLon, 20150510, "s1.jpg"),
      make_media("v1", MediaKind::Image, kLat + 0.0002, kLon, 20150510, "v1.jpg"),
  };
  return WorldSnapshot(std::move(facts), std::move(media), UserContext{"u", 49.2500, 7.0400, 0.0, 20150516});
}

UserContext ctx(double heading = 0.0) { return {"u", 49.2500, 7.0400, heading, 20150516}; }

TrainingPair right_of_pair() {
  return {"what is there on the right of the campus center?", ctx(), {"e1"}, Frame::Geomagnetic};
}

FeatureVector fv(std::initializer_list<std::pair<const char*, double>> entries) {
  FeatureVector f;
  for (const auto& [k, v] : entries) f.add(k, v);
  return f;
}

PreparedPair two_candidates() {
  PreparedPair p;
  p.forms = {LogicalForm::spatial(Symbol::FrontOf, "x"), LogicalForm::spatial(Symbol::Behind, "x")};
  p.canonical = {to_canonical_text(p.forms[0]), to_canonical_text(p.forms[1])};
  p.features = {fv({{"a", 1.0}, {"b", 2.0}}), fv({{"b", 1.0}, {"c", 3.0}})};
  p.consistent = {true, false};
  return p;
}

std::map<std::string, double> dense(const FeatureVector& f) {
  return {f.entries().begin(), f.entries().end()};
}

const BeamEntry* argmax_of(const SemanticParser& parser, const WorldSnapshot& w, const FeedbackEvent& e,
                           const ParamVector& theta, ParseResult& keep) {
  const auto q = resolve(e.query_text, e.context, e.frame);
  keep = parser.parse_topk(q, w.with_context(e.context), theta, 1);
  return &keep.argmax();
}

}  // namespace

// --- consistent_forms ------------------------------------------------------

TEST(ConsistentForms, EastMediaSelectRightOf) {
  const auto beam = consistent_forms(right_of_pair(), cones_world(), ParamVector{}, SemanticParser{});
  ASSERT_EQ(beam.size(), 1u);
  EXPECT_EQ(beam[0].canonical, "answer(A,(rightOf(A,B),const(B,'campus_center')))");
}

TEST(ConsistentForms, UnreachableGoldGivesEmpty) {
  TrainingPair p = right_of_pair();
  p.gold_ids = {"e1", "s1"};
  EXPECT_TRUE(consistent_forms(p, cones_world(), ParamVector{}, SemanticParser{}).empty());
}

TEST(ConsistentForms, IdenticalDenotationsAreBothReturned) {
  TrainingPair p{"what is near the campus center", ctx(), {"v1"}, Frame::Geomagnetic};
  const auto beam = consistent_forms(p, cones_world(), ParamVector{}, SemanticParser{});
  std::vector<std::string> got;
  for (const auto& b : beam) got.push_back(b.canonical);
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, (std::vector<std::string>{"answer(A,(near(A,B),const(B,'campus_center')))",
                                           "answer(A,(view(A),const(A,'campus_center')))"}));
}

// --- gradient --------------------------------------------------------------

TEST(GradStep, SingleConsistentCandidateIsStationary) {
  PreparedPair p;
  p.forms = {LogicalForm::spatial(Symbol::Near, "x")};
  p.canonical = {to_canonical_text(p.forms[0])};
  p.features = {fv({{"a", 1.0}, {"b", -2.0}})};
  p.consistent = {true};
  ParamVector theta;
  theta.weights["a"] = 0.3;
  const auto step = grad_step(p, theta, 0.5);
  EXPECT_FALSE(step.skipped);
  EXPECT_EQ(step.params, theta);
}

TEST(GradStep, TwoCandidatesAtZeroWeights) {
  const auto g = marginal_gradient(two_candidates(), ParamVector{});
  ASSERT_TRUE(g);
  // φ1 − ½(φ1 + φ2) = ½(φ1 − φ2)
  EXPECT_EQ(dense(*g), (std::map<std::string, double>{{"a", 0.5}, {"b", 0.5}, {"c", -1.5}}));
  const auto step = grad_step(two_candidates(), ParamVector{}, 0.2);
  EXPECT_NEAR(step.params.get("a"), 0.1, 1e-15);
  EXPECT_NEAR(step.params.get("c"), -0.3, 1e-15);
}

TEST(GradStep, NoConsistentCandidateIsSkipped) {
  auto p = two_candidates();
  p.consistent = {false, false};
  ParamVector theta;
  theta.weights["a"] = 1.0;
  const auto step = grad_step(p, theta, 0.1);
  EXPECT_TRUE(step.skipped);
  EXPECT_EQ(step.params, theta);
}

TEST(GradStep, RealQueryMovesTowardRightOf) {
  const SemanticParser parser;
  const auto w = cones_world();
  const auto step = grad_step(right_of_pair(), w, ParamVector{}, 1.0, parser);
  ASSERT_FALSE(step.skipped);

  // Independent: φ(rightOf) − mean φ over the six candidates.
  const auto q = resolve(right_of_pair().query_text, ctx(), Frame::Geomagnetic);
  const auto toks = parser.tokenize(q.text, w);
  const auto forms = parser.generate_candidates(toks, q, w);
  ASSERT_EQ(forms.size(), 6u);
  std::map<std::string, double> expected;
  for (const auto& z : forms) {
    const auto phi = SemanticParser::featurize(toks, z);
    for (const auto& [k, v] : phi.entries()) expected[k] -= v / 6.0;
  }
  const auto right = SemanticParser::featurize(toks, LogicalForm::spatial(Symbol::RightOf, "campus_center"));
  for (const auto& [k, v] : right.entries()) expected[k] += v;
  for (const auto& [k, v] : expected) EXPECT_NEAR(step.params.get(k), v, 1e-12) << k;
  EXPECT_GT(step.params.get("lex:on_the_right_of→rightOf"), 0.0);
  EXPECT_LT(step.params.get("lex:on_the_right_of→frontOf"), 0.0);
}

TEST(GradientProperty, MatchesCentralDifferences) {
  const auto world = synth::generate_world({});
  synth::DatasetConfig dc;
  dc.n = 40;
  dc.seed = 3;
  const SemanticParser parser;
  std::mt19937_64 rng(17);
  std::normal_distribution<double> weight(0.0, 0.7);
  int checked = 0;
  for (const auto& pair : synth::generate_dataset(world, dc)) {
    const auto p = prepare_pair(pair, world, parser);
    if (!p.any_consistent()) continue;
    ParamVector theta;
    std::set<std::string> keys;
    for (const auto& f : p.features)
      for (const auto& [k, v] : f.entries()) keys.insert(k);
    for (const auto& k : keys) {
      if (theta.weights.size() < 50) theta.weights[k] = weight(rng);
    }
    const auto g = marginal_gradient(p, theta);
    ASSERT_TRUE(g);
    for (const auto& k : keys) {
      const double h = 1e-5;
      ParamVector up = theta, down = theta;
      up.weights[k] += h;
      down.weights[k] -= h;
      const double fd = (log_marginal(p, up) - log_marginal(p, down)) / (2 * h);
      const double an = g->get(k);
      const double scale = std::max({std::abs(fd), std::abs(an), 1e-6});
      EXPECT_LT(std::abs(fd - an) / scale, 1e-4) << pair.query_text << " " << k;
    }
    ++checked;
  }
  EXPECT_GE(checked, 10);
}

// --- train -----------------------------------------------------------------

TEST(Train, EmptyDatasetAndMissingSeed) {
  TrainConfig cfg;
  cfg.seed = 1;
  EXPECT_EQ(code_of([&] { train(std::vector<PreparedPair>{}, cfg); }), ErrorCode::EmptyDataset);
  EXPECT_EQ(code_of([&] { train(std::vector<TrainingPair>{}, cones_world(), cfg, SemanticParser{}); }),
            ErrorCode::EmptyDataset);
  EXPECT_EQ(code_of([&] { train({right_of_pair()}, cones_world(), TrainConfig{}, SemanticParser{}); }),
            ErrorCode::InvalidArgument);
}

TEST(Train, LearnsTheRightOfReading) {
  TrainConfig cfg;
  cfg.seed = 2;
  cfg.eta = 1.0;
  const SemanticParser parser;
  const auto w = cones_world();
  const auto result = train({right_of_pair()}, w, cfg, parser);
  EXPECT_EQ(result.params.version, 1u);
  const auto q = resolve(right_of_pair().query_text, ctx(), Frame::Geomagnetic);
  EXPECT_EQ(parser.parse_topk(q, w.with_context(ctx()), result.params, 1).argmax().canonical,
            "answer(A,(rightOf(A,B),const(B,'campus_center')))");
}

class TrainOnSynth : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    world_ = new WorldSnapshot(synth::generate_world({}));
    synth::DatasetConfig dc;
    dc.n = 60;
    dc.seed = 4;
    pairs_ = new std::vector<TrainingPair>(synth::generate_dataset(*world_, dc));
    data_ = new std::vector<PreparedPair>();
    for (const auto& p : *pairs_) data_->push_back(prepare_pair(p, *world_, SemanticParser{}));
  }
  static void TearDownTestSuite() {
    delete world_;
    delete pairs_;
    delete data_;
  }
  static TrainConfig config(double eta = 0.1) {
    TrainConfig c;
    c.seed = 12;
    c.eta = eta;
    c.epochs = 6;
    return c;
  }
  static WorldSnapshot* world_;
  static std::vector<TrainingPair>* pairs_;
  static std::vector<PreparedPair>* data_;
};
WorldSnapshot* TrainOnSynth::world_ = nullptr;
std::vector<TrainingPair>* TrainOnSynth::pairs_ = nullptr;
std::vector<PreparedPair>* TrainOnSynth::data_ = nullptr;

TEST_F(TrainOnSynth, ObjectiveNeverDecreases) {
  for (double eta : {0.01, 0.1, 1.0, 10.0}) {
    const auto r = train(*data_, config(eta));
    double prev = r.report.initial_objective;
    ASSERT_EQ(r.report.epochs.size(), 6u);
    for (const auto& e : r.report.epochs) {
      EXPECT_GE(e.objective, prev) << "eta " << eta;
      EXPECT_LE(e.halvings, 10);
      prev = e.objective;
    }
    EXPECT_NEAR(regularized_objective(*data_, r.params, 1e-4), prev, 1e-9);
  }
}

TEST_F(TrainOnSynth, SeededRunsAreBitIdentical) {
  const auto a = train(*data_, config());
  const auto b = train(*data_, config());
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(train(*pairs_, *world_, config(), SemanticParser{}).params, a.params);
}

TEST_F(TrainOnSynth, DuplicatedDataWithHalfStepFollowsTheSameTrajectory) {
  std::vector<PreparedPair> doubled;
  for (const auto& p : *data_) {
    doubled.push_back(p);
    doubled.push_back(p);
  }
  for (int epochs = 1; epochs <= 4; ++epochs) {
    auto c1 = config(0.2);
    c1.epochs = epochs;
    auto c2 = config(0.1);
    c2.epochs = epochs;
    const auto a = train(*data_, c1);
    const auto b = train(doubled, c2);
    std::set<std::string> keys;
    for (const auto& [k, v] : a.params.weights) keys.insert(k);
    for (const auto& [k, v] : b.params.weights) keys.insert(k);
    for (const auto& k : keys) EXPECT_NEAR(a.params.get(k), b.params.get(k), 1e-9) << k;
    EXPECT_NEAR(b.report.epochs.back().objective, 2 * a.report.epochs.back().objective, 1e-7);
  }
}

TEST_F(TrainOnSynth, SkippedPairsAreCounted) {
  auto data = *data_;
  data.push_back(PreparedPair{});
  const auto r = train(data, config());
  for (const auto& e : r.report.epochs) EXPECT_EQ(e.skipped_pairs, 1u + std::count_if(data_->begin(), data_->end(), [](const PreparedPair& p) { return !p.any_consistent(); }));
}

// --- feedback --------------------------------------------------------------

TEST(Feedback, ConfirmingTheArgmaxDoesNotLowerItsScore) {
  const SemanticParser parser;
  const auto world = synth::generate_world({});
  synth::DatasetConfig dc;
  dc.n = 40;
  dc.seed = 21;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> weight(0.0, 0.5);
  int checked = 0;
  for (const auto& pair : synth::generate_dataset(world, dc)) {
    ParamVector theta;
    for (const auto& k : {"lex:in_front_of→frontOf", "lex:behind→behind", "edge:view→const", "lex:<num>→day",
                          "unmatched_spatial", "edge:answer→near"}) {
      theta.weights[k] = weight(rng);
    }
    FeedbackEvent e{"u", pair.query_text, pair.context, pair.frame, {}, {}, 0};
    ParseResult before;
    const auto* top = argmax_of(parser, world, e, theta, before);
    e.shown = evaluate(top->form, world.with_context(pair.context)).media_ids;
    if (e.shown.empty()) continue;
    e.marked_relevant = e.shown;
    const auto out = feedback_update(e, world, theta, parser, {0.5, true});
    EXPECT_EQ(out.kind, FeedbackOutcome::Kind::Promoted);
    const auto toks = parser.tokenize(resolve(e.query_text, e.context, e.frame).text, world);
    const auto phi = SemanticParser::featurize(toks, top->form);
    EXPECT_GE(out.params.dot(phi), theta.dot(phi) - 1e-12) << pair.query_text;
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

TEST(Feedback, EmptyMarksWithSingleCandidateLeaveWeightsUnchanged) {
  // "yesterday" with no deixis yields day and month forms; restrict the beam
  // to one candidate through the cap.
  ParserConfig pc;
  pc.beam_cap = 1;
  const SemanticParser parser(pc);
  ParamVector theta;
  theta.weights["edge:view→day"] = 0.4;
  theta.version = 3;
  FeedbackEvent e{"u", "what happened yesterday", ctx(), Frame::Geomagnetic, {"n1"}, {}, 0};
  const auto out = feedback_update(e, cones_world(), theta, parser);
  EXPECT_EQ(out.kind, FeedbackOutcome::Kind::Demoted);
  EXPECT_EQ(out.params.weights, theta.weights);
  EXPECT_EQ(out.params.version, 4u);
}

TEST(Feedback, RejectingEverythingDemotesTheArgmax) {
  const SemanticParser parser;
  ParamVector theta;
  theta.weights["lex:on_the_right_of→frontOf"] = 1.0;
  FeedbackEvent e{"u", "what is there on the right of the campus center?", ctx(), Frame::Geomagnetic, {"v1", "n1"}, {}, 0};
  const auto out = feedback_update(e, cones_world(), theta, parser, {0.5, true});
  EXPECT_EQ(out.kind, FeedbackOutcome::Kind::Demoted);
  EXPECT_LT(out.params.get("lex:on_the_right_of→frontOf"), 1.0);
  const auto off = feedback_update(e, cones_world(), theta, parser, {0.5, false});
  EXPECT_EQ(off.kind, FeedbackOutcome::Kind::Skipped);
  EXPECT_EQ(off.params.weights, theta.weights);
}

TEST(Feedback, MarkOutsideShownIsInvalid) {
  FeedbackEvent e{"u", "what is near the campus center", ctx(), Frame::Geomagnetic, {"v1"}, {"e1"}, 0};
  EXPECT_EQ(code_of([&] { feedback_update(e, cones_world(), ParamVector{}, SemanticParser{}); }),
            ErrorCode::InvalidFeedback);
}

TEST(Forks, IndependentCopies) {
  ParamVector shared;
  shared.weights["a"] = 1.0;
  ParamStore store(shared);
  const auto fork = store.fork("alice");
  EXPECT_EQ(fork->owner, "alice");
  EXPECT_EQ(fork->weights, shared.weights);
  EXPECT_EQ(code_of([&] { store.fork("alice"); }), ErrorCode::AlreadyForked);

  ParamVector retrained = shared;
  retrained.weights["a"] = 9.0;
  store.publish_shared(retrained);
  EXPECT_EQ(store.for_user("alice")->get("a"), 1.0);
  EXPECT_EQ(store.for_user("bob")->get("a"), 9.0);
  EXPECT_FALSE(store.has_fork("bob"));
}

TEST(Forks, FeedbackTouchesOnlyTheFork) {
  ParamStore store;
  store.fork("alice");
  store.fork("bob");
  const auto shared_before = *store.shared();
  const auto bob_before = *store.for_user("bob");
  FeedbackEvent e{"alice", "what is there on the right of the campus center?", ctx(), Frame::Geomagnetic,
                  {"e1"}, {"e1"}, 0};
  const auto out = store.apply_feedback(e, cones_world(), SemanticParser{});
  EXPECT_EQ(out.kind, FeedbackOutcome::Kind::Promoted);
  EXPECT_EQ(*store.shared(), shared_before);
  EXPECT_EQ(*store.for_user("bob"), bob_before);
  EXPECT_EQ(store.for_user("alice")->version, 1u);
  e.user_id = "carol";
  EXPECT_EQ(code_of([&] { store.apply_feedback(e, cones_world(), SemanticParser{}); }), ErrorCode::UnknownUser);
  EXPECT_EQ(store.users(), (std::vector<std::string>{"alice", "bob"}));
}

TEST(Forks, OppositeFeedbackGivesDifferentArgmax) {
  ParamStore store;
  store.fork("north");
  store.fork("east");
  const SemanticParser parser;
  const auto w = cones_world();
  const std::string query = "what is there in front of the campus center?";
  FeedbackEvent a{"north", query, ctx(), Frame::Geomagnetic, {"v1", "n1", "e1"}, {"v1", "n1"}, 0};
  FeedbackEvent b{"east", query, ctx(), Frame::Geomagnetic, {"v1", "n1", "e1"}, {"e1"}, 0};
  for (int i = 0; i < 5; ++i) {
    store.apply_feedback(a, w, parser, {0.5, true});
    store.apply_feedback(b, w, parser, {0.5, true});
  }
  const auto q = resolve(query, ctx(), Frame::Geomagnetic);
  const auto wn = w.with_context(ctx());
  EXPECT_EQ(parser.parse_topk(q, wn, *store.for_user("north"), 1).argmax().canonical,
            "answer(A,(frontOf(A,B),const(B,'campus_center')))");
  EXPECT_EQ(parser.parse_topk(q, wn, *store.for_user("east"), 1).argmax().canonical,
            "answer(A,(rightOf(A,B),const(B,'campus_center')))");
}

// --- files -----------------------------------------------------------------

TEST(ParamsFile, RoundTripsExactly) {
  ParamVector p;
  p.owner = "alice";
  p.version = 42;
  p.weights["lex:in_front_of→frontOf"] = 0.1 + 0.2;
  p.weights["edge:answer→near"] = -1e-300;
  p.weights["count:predicates"] = 3.0;
  std::stringstream s;
  write_params(s, p, config_hash("x"));
  const std::string text = s.str();
  EXPECT_EQ(text.rfind("# xmego-params 1\nowner=alice\nversion=42\nconfig_hash=", 0), 0u);
  EXPECT_LT(text.find("count:predicates"), text.find("edge:answer"));
  EXPECT_EQ(read_params(s), p);
  std::stringstream bad("hello\n");
  EXPECT_EQ(code_of([&] { read_params(bad); }), ErrorCode::InvalidArgument);
}

TEST(ParamsFile, ConfigHashIsStable) {
  EXPECT_EQ(config_hash(""), "cbf29ce484222325");
  EXPECT_EQ(config_hash("a"), "af63dc4c8601ec8c");
  TrainConfig c;
  c.seed = 5;
  EXPECT_EQ(config_hash(c.describe()), config_hash(c.describe()));
}

TEST(CorpusFile, RoundTripsAndRejectsEmptyGold) {
  std::vector<TrainingPair> pairs = {right_of_pair(),
                                     {"what is in front of postbank", ctx(90), {"a", "b"}, Frame::UserCentric}};
  std::stringstream s;
  write_corpus(s, pairs);
  EXPECT_EQ(read_corpus(s), pairs);
  std::stringstream empty_gold(R"({"query_text":"q","context":{"user_id":"u","lat":1,"lon":2,"heading_deg":0,"query_time":20150516},"gold_ids":[]})");
  EXPECT_EQ(code_of([&] { read_corpus(empty_gold); }), ErrorCode::InvalidArgument);
}
