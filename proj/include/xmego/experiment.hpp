#pragma once

#include <istream>
#include <vector>

#include "xmego/eval.hpp"
#include "xmego/records.hpp"
#include "xmego/synth.hpp"

namespace xmego {

// One synthetic experiment: world, training and held-out corpora, trainer,
// learning-curve sizes and the personalization simulation. Every section and
// field is optional; missing ones keep the library defaults.
struct ExperimentConfig {
  synth::WorldConfig world;
  synth::DatasetConfig dataset;
  synth::DatasetConfig eval;
  TrainConfig train;
  std::vector<std::size_t> curve_sizes = {0, 10, 25, 50, 100, 200, 400};
  PersonalizationConfig personalization;

  ExperimentConfig() {
    eval.n = 300;
    eval.seed = 99;
    train.seed = 5;
  }
};

namespace detail {

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

inline void read_dataset(const json& j, synth::DatasetConfig& d) {
  read_if(j, "n", d.n);
  read_if(j, "seed", d.seed);
  read_if(j, "query_time", d.query_time);
  if (auto it = j.find("frame"); it != j.end()) d.frame = parse_frame(it->get<std::string>());
  if (auto it = j.find("heading_deg"); it != j.end() && !it->is_null()) d.heading_deg = it->get<double>();
  if (auto it = j.find("fixed_here"); it != j.end() && !it->is_null()) {
    d.fixed_here = geo::LatLon{it->at(0).get<double>(), it->at(1).get<double>()};
  }
}

}  // namespace detail

inline ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (auto w = j.find("world"); w != j.end()) {
      detail::read_if(*w, "seed", c.world.seed);
      detail::read_if(*w, "n_facts", c.world.n_facts);
      detail::read_if(*w, "n_media", c.world.n_media);
      detail::read_if(*w, "fact_spread_m", c.world.fact_spread_m);
      detail::read_if(*w, "media_spread_m", c.world.media_spread_m);
      detail::read_if(*w, "here_fraction", c.world.here_fraction);
      detail::read_if(*w, "query_time", c.world.query_time);
      if (auto ctr = w->find("center"); ctr != w->end()) {
        c.world.center = {ctr->at(0).get<double>(), ctr->at(1).get<double>()};
      }
    }
    c.dataset.query_time = c.world.query_time;
    c.eval.query_time = c.world.query_time;
    if (auto d = j.find("dataset"); d != j.end()) detail::read_dataset(*d, c.dataset);
    c.eval.frame = c.dataset.frame;
    if (auto e = j.find("eval"); e != j.end()) detail::read_dataset(*e, c.eval);
    if (auto t = j.find("train"); t != j.end()) {
      detail::read_if(*t, "epochs", c.train.epochs);
      detail::read_if(*t, "eta", c.train.eta);
      detail::read_if(*t, "l2", c.train.l2);
      detail::read_if(*t, "max_halvings", c.train.max_halvings);
      if (auto s = t->find("seed"); s != t->end()) {
        c.train.seed = s->is_null() ? std::nullopt : std::optional<std::uint64_t>(s->get<std::uint64_t>());
      }
    }
    if (auto cv = j.find("curve"); cv != j.end()) detail::read_if(*cv, "sizes", c.curve_sizes);
    if (auto p = j.find("personalization"); p != j.end()) {
      detail::read_if(*p, "rounds", c.personalization.rounds);
      detail::read_if(*p, "probes", c.personalization.probes);
      detail::read_if(*p, "seed", c.personalization.seed);
      detail::read_if(*p, "heading_deg", c.personalization.heading_deg);
      detail::read_if(*p, "feedback_eta", c.personalization.feedback.eta);
      detail::read_if(*p, "demote", c.personalization.feedback.demote);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "bad experiment config", e.what());
  }
  return c;
}

inline ExperimentConfig read_experiment(std::istream& in) {
  try {
    return experiment_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidArgument, "experiment config is not JSON", e.what());
  }
}

}  // namespace xmego
