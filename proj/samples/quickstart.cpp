// Builds a tiny world in memory, trains on synthetic template questions and
// answers a few queries in both reference frames.

#include <iostream>

#include "xmego/xmego.hpp"

using namespace xmego;

int main() {
  const WorldSnapshot world = synth::generate_world({});
  std::cout << "world: " << world.facts().size() << " facts, " << world.media().size() << " media\n";

  synth::DatasetConfig data;
  data.n = 200;
  TrainConfig config;
  config.seed = 5;
  const SemanticParser parser;
  const auto trained = train(synth::generate_dataset(world, data), world, config, parser);
  std::cout << "objective " << trained.report.initial_objective << " -> " << trained.report.epochs.back().objective
            << "\n\n";

  const UserContext me{"me", 49.2563, 7.0437, 90.0, 20150516};
  const WorldSnapshot here = world.with_context(me);
  for (Frame frame : {Frame::Geomagnetic, Frame::UserCentric}) {
    for (const char* text : {"what is there in front of postbank?", "what happened here 3 weeks ago?",
                             "what did this place look like in December?"}) {
      const ResolvedQuery q = resolve(text, me, frame);
      const auto parse = parser.parse_topk(q, here, trained.params, 3);
      const auto hits = evaluate(parse.argmax().form, here).media_ids;
      std::cout << "[" << to_string(frame) << "] " << text << "\n  " << parse.argmax().canonical << "  p="
                << parse.argmax().probability << "\n  " << hits.size() << " media";
      for (std::size_t i = 0; i < hits.size() && i < 5; ++i) std::cout << (i ? ", " : ": ") << hits[i];
      std::cout << "\n";
    }
  }
}
