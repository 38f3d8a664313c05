// Command-line front end: ingestion, synthetic corpora, training,
// evaluation, and the HTTP service.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "xmego/experiment.hpp"
#include "xmego/http.hpp"
#include "xmego/xmego.hpp"

using namespace xmego;
namespace fs = std::filesystem;

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open file", path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write file", path);
  return out;
}

ExperimentConfig load_experiment(const std::string& path) {
  auto in = open_input(path);
  return read_experiment(in);
}

ServiceConfig service_config(const std::string& data_dir) {
  if (data_dir.empty()) throw Error(ErrorCode::InvalidArgument, "--data-dir (or XMEGO_DATA_DIR) is required");
  ServiceConfig c;
  c.data_dir = data_dir;
  return c;
}

WorldSnapshot stored_world(Service& service) {
  return WorldSnapshot(*service.world().facts(), *service.world().media(), UserContext{});
}

void print_report_table(std::ostream& out, const EvalReport& r) {
  out << std::fixed << std::setprecision(2);
  if (r.accuracy) out << "accuracy         " << 100 * *r.accuracy << " %\n";
  out << "precision        " << 100 * r.precision << " %\n"
      << "recall           " << 100 * r.recall << " %   (relevant / queries)\n"
      << "f1               " << 100 * r.f1 << "\n";
  if (r.standard_recall) out << "standard recall  " << 100 * *r.standard_recall << " %   (relevant / gold items)\n";
  out << "queries " << r.n_queries << ", retrievals " << r.n_retrievals << ", relevant " << r.n_relevant << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contextual spatio-temporal media retrieval"};
  app.set_config("--config", "", "TOML/INI file with flag values");
  app.require_subcommand(1);

  std::string data_dir;
  app.add_option("--data-dir", data_dir, "directory holding facts, media and parameters")
      ->envname("XMEGO_DATA_DIR");

  std::string osm_file;
  auto* ingest_osm = app.add_subcommand("ingest-osm", "add named OSM nodes as geographic facts");
  ingest_osm->add_option("file", osm_file, "OSM XML file")->required()->check(CLI::ExistingFile);

  std::string manifest_file;
  auto* ingest_media = app.add_subcommand("ingest-media", "add media records from a JSONL manifest");
  ingest_media->add_option("manifest", manifest_file, "manifest file")->required()->check(CLI::ExistingFile);

  std::string experiment_file, train_out, eval_out;
  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic world and template corpora");
  gen->add_option("config", experiment_file, "experiment JSON")->required()->check(CLI::ExistingFile);
  gen->add_option("--train-out", train_out, "training corpus path")->required();
  gen->add_option("--eval-out", eval_out, "held-out corpus path");

  std::string corpus_file;
  std::optional<int> epochs;
  std::optional<double> eta, l2;
  std::optional<std::uint64_t> seed;
  auto* train_cmd = app.add_subcommand("train", "train the shared parameters on a corpus");
  train_cmd->add_option("corpus", corpus_file, "JSONL corpus")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--epochs", epochs);
  train_cmd->add_option("--eta", eta);
  train_cmd->add_option("--l2", l2);
  train_cmd->add_option("--seed", seed, "required for training");

  std::string eval_user;
  auto* eval_cmd = app.add_subcommand("eval", "score the stored parameters on a corpus");
  eval_cmd->add_option("corpus", corpus_file, "JSONL corpus")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--user", eval_user, "evaluate this user's fork instead of the shared parameters");

  std::string curve_out;
  auto* curve = app.add_subcommand("curve", "accuracy versus training-set size, as CSV");
  curve->add_option("config", experiment_file, "experiment JSON")->required()->check(CLI::ExistingFile);
  curve->add_option("--out", curve_out, "CSV path; default stdout");

  auto* crossuser = app.add_subcommand("crossuser", "simulated personalization and the cross-user F1 matrix");
  crossuser->add_option("config", experiment_file, "experiment JSON")->required()->check(CLI::ExistingFile);

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  serve->add_option("--host", host);
  serve->add_option("--port", port)->check(CLI::Range(1, 65535));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest_osm) {
      Service service(service_config(data_dir));
      auto in = open_input(osm_file);
      const auto r = service.world().ingest_osm_xml(in);
      service.save_world();
      std::cout << json{{"facts_added", r.facts_added}, {"nodes_skipped", r.nodes_skipped},
                        {"duplicates", r.duplicates}, {"warnings", r.warnings}}
                       .dump()
                << "\n";
    } else if (*ingest_media) {
      Service service(service_config(data_dir));
      auto in = open_input(manifest_file);
      const auto r = service.world().ingest_media_manifest(in);
      service.save_world();
      json invalid = json::array();
      for (const auto& i : r.invalid) invalid.push_back({{"line", i.line}, {"reason", i.reason}});
      std::cout << json{{"added", r.added}, {"invalid", invalid}}.dump() << "\n";
    } else if (*gen) {
      const auto cfg = load_experiment(experiment_file);
      const auto world = synth::generate_world(cfg.world);
      if (!data_dir.empty()) {
        Service service(service_config(data_dir));
        service.world().replace_world(world.facts(), world.media());
        service.save_world();
      }
      auto out = open_output(train_out);
      write_corpus(out, synth::generate_dataset(world, cfg.dataset));
      if (!eval_out.empty()) {
        auto held = open_output(eval_out);
        write_corpus(held, synth::generate_dataset(world, cfg.eval));
      }
      std::cerr << "world: " << world.facts().size() << " facts, " << world.media().size() << " media\n";
    } else if (*train_cmd) {
      Service service(service_config(data_dir));
      TrainConfig tc;
      if (epochs) tc.epochs = *epochs;
      if (eta) tc.eta = *eta;
      if (l2) tc.l2 = *l2;
      tc.seed = seed;
      auto in = open_input(corpus_file);
      const auto pairs = read_corpus(in);
      auto result = train(pairs, stored_world(service), tc, service.parser(), *service.params().shared());
      std::cout << json{{"epoch", 0}, {"objective", result.report.initial_objective}}.dump() << "\n";
      for (std::size_t e = 0; e < result.report.epochs.size(); ++e) {
        const auto& er = result.report.epochs[e];
        std::cout << json{{"epoch", e + 1},      {"objective", er.objective}, {"eta", er.eta},
                          {"halvings", er.halvings}, {"accepted", er.accepted}, {"skipped_pairs", er.skipped_pairs}}
                         .dump()
                  << "\n";
      }
      service.publish_shared(std::move(result.params));
    } else if (*eval_cmd) {
      Service service(service_config(data_dir));
      auto in = open_input(corpus_file);
      const auto pairs = read_corpus(in);
      const auto theta = eval_user.empty() ? service.params().shared() : service.params().for_user(eval_user);
      const auto r = evaluate_corpus(pairs, stored_world(service), *theta, service.parser());
      std::cout << to_json(r).dump() << "\n";
      print_report_table(std::cerr, r);
    } else if (*curve) {
      const auto cfg = load_experiment(experiment_file);
      const auto world = synth::generate_world(cfg.world);
      const SemanticParser parser;
      const auto held_out = synth::generate_dataset(world, cfg.eval);
      const auto points = learning_curve(world, cfg.dataset, cfg.curve_sizes, held_out, cfg.train, parser);
      if (curve_out.empty()) {
        write_curve_csv(std::cout, points);
      } else {
        auto out = open_output(curve_out);
        write_curve_csv(out, points);
      }
    } else if (*crossuser) {
      const auto cfg = load_experiment(experiment_file);
      const auto world = synth::generate_world(cfg.world);
      const auto r = run_personalization(world, cfg.personalization, SemanticParser{});
      for (std::size_t i = 0; i < r.matrix.size(); ++i) {
        for (std::size_t j = 0; j < r.matrix[i].size(); ++j) {
          json row = to_json(r.matrix[i][j]);
          row["model"] = cfg.personalization.users[i].user_id;
          row["annotator"] = cfg.personalization.users[j].user_id;
          std::cout << row.dump() << "\n";
        }
      }
      std::cerr << std::fixed << std::setprecision(2) << "F1 (rows: models, columns: annotators)\n";
      for (const auto& row : r.matrix) {
        for (const auto& cell : row) std::cerr << std::setw(10) << 100 * cell.f1;
        std::cerr << "\n";
      }
      for (std::size_t u = 0; u < r.models.size(); ++u) {
        std::cerr << cfg.personalization.users[u].user_id << ": agreement " << r.agreement_before[u] << " -> "
                  << r.agreement_after[u] << "\n";
      }
      std::cerr << (diagonally_dominant(r.matrix) ? "diagonally dominant\n" : "NOT diagonally dominant\n");
    } else if (*serve) {
      Service service(service_config(data_dir));
      httplib::Server server;
      mount(server, service);
      std::cerr << "listening on " << host << ":" << port << " (data " << data_dir << ")\n";
      if (!server.listen(host, port)) throw Error(ErrorCode::Io, "cannot listen", host + ":" + std::to_string(port));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.message();
    if (!e.detail().empty()) std::cerr << " (" << e.detail() << ")";
    std::cerr << "\n";
    return 1;
  }
  return 0;
}
