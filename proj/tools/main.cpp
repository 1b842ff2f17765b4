// Command-line driver: train the full-data network, predict an interval
// hyper-network from leave-one-out retrainings, verify LDCP at the configured
// neighborhoods, and compare against the exact naive baseline.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ldcp/io.hpp"
#include "ldcp/parallel.hpp"
#include "ldcp/verify.hpp"

namespace {

using Json = nlohmann::ordered_json;
using namespace ldcp;

/// Configuration / input problems exit with code 2; internal failures with 3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOpts {
  std::string config_path;
  bool has_dataset = false, has_schema = false, has_out = false;
  std::string dataset, schema, out;
  long synth_n = -1;
  int synth_d = -1;
  std::vector<int> hidden;
  long epochs = -1;
  double lr = -1.0, l1 = -1.0, alpha = -1.0, stop_m = -1.0, stop_r = -1.0;
  long batch = -1, k = -1, max_networks = -1, node_budget = -1, threads = -1;
  long train_seed = -1, sample_seed = -1, synth_seed = -1;
};

void add_common_options(CLI::App* cmd, CommonOpts& opt) {
  // Repeated flags take the last value, so overrides can be appended.
  cmd->add_option("--config", opt.config_path, "run configuration JSON file")->take_last();
  cmd->add_option("--dataset", opt.dataset, "dataset CSV path")
      ->take_last()
      ->each([&opt](const std::string&) { opt.has_dataset = true; });
  cmd->add_option("--schema", opt.schema, "schema JSON sidecar path")
      ->take_last()
      ->each([&opt](const std::string&) { opt.has_schema = true; });
  cmd->add_option("--synth-n", opt.synth_n, "synthetic dataset size")->take_last();
  cmd->add_option("--synth-d", opt.synth_d, "synthetic dataset dimension")->take_last();
  cmd->add_option("--synth-seed", opt.synth_seed, "synthetic dataset seed")->take_last();
  cmd->add_option("--hidden", opt.hidden, "hidden layer sizes");
  cmd->add_option("--epochs", opt.epochs, "training epochs")->take_last();
  cmd->add_option("--lr", opt.lr, "learning rate")->take_last();
  cmd->add_option("--batch", opt.batch, "batch size")->take_last();
  cmd->add_option("--l1", opt.l1, "L1 regularization coefficient")->take_last();
  cmd->add_option("--seed", opt.train_seed, "training seed")->take_last();
  cmd->add_option("--alpha", opt.alpha, "abstraction miss probability")->take_last();
  cmd->add_option("--k", opt.k, "networks trained per iteration")->take_last();
  cmd->add_option("--stop-m", opt.stop_m, "fraction of parameters that must settle (M)")
      ->take_last();
  cmd->add_option("--stop-r", opt.stop_r, "Jaccard distance threshold (R)")->take_last();
  cmd->add_option("--max-networks", opt.max_networks, "cap on trained networks")->take_last();
  cmd->add_option("--sample-seed", opt.sample_seed, "entry sampling seed")->take_last();
  cmd->add_option("--out", opt.out, "output directory")
      ->take_last()
      ->each([&opt](const std::string&) { opt.has_out = true; });
  cmd->add_option("--threads", opt.threads, "worker pool size (0: all cores)")->take_last();
  cmd->add_option("--node-budget", opt.node_budget, "branch-and-bound node budget per solve")
      ->take_last();
}

// Flags win over the config file.
RunConfig resolve_config(CommonOpts& opt) {
  RunConfig cfg;
  if (!opt.config_path.empty()) {
    try {
      cfg = load_run_config(opt.config_path);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  if (opt.has_dataset) cfg.dataset_csv = opt.dataset;
  if (opt.has_schema) cfg.schema_json = opt.schema;
  if (opt.synth_n >= 0) cfg.synth_n = static_cast<std::size_t>(opt.synth_n);
  if (opt.synth_d >= 0) cfg.synth_d = opt.synth_d;
  if (opt.synth_seed >= 0) cfg.synth_seed = static_cast<std::uint64_t>(opt.synth_seed);
  if (!opt.hidden.empty()) cfg.hidden_layers = opt.hidden;
  if (opt.epochs >= 0) cfg.train.epochs = static_cast<int>(opt.epochs);
  if (opt.lr >= 0.0) cfg.train.learning_rate = opt.lr;
  if (opt.batch >= 0) cfg.train.batch_size = static_cast<int>(opt.batch);
  if (opt.l1 >= 0.0) cfg.train.l1_coefficient = opt.l1;
  if (opt.train_seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(opt.train_seed);
  if (opt.alpha >= 0.0) cfg.hyper.alpha = opt.alpha;
  if (opt.k >= 0) cfg.hyper.networks_per_iteration = static_cast<int>(opt.k);
  if (opt.stop_m >= 0.0) cfg.hyper.converged_fraction = opt.stop_m;
  if (opt.stop_r >= 0.0) cfg.hyper.distance_threshold = opt.stop_r;
  if (opt.max_networks >= 0) cfg.hyper.max_networks = static_cast<std::size_t>(opt.max_networks);
  if (opt.sample_seed >= 0) cfg.hyper.sample_seed = static_cast<std::uint64_t>(opt.sample_seed);
  if (opt.has_out) cfg.out_dir = opt.out;
  if (opt.threads >= 0) cfg.parallelism = static_cast<unsigned>(opt.threads);
  if (opt.node_budget >= 0) cfg.node_budget = opt.node_budget;
  return cfg;
}

struct LoadedRun {
  RunConfig cfg;
  std::string hash;
  EncodedDataset data;
  MlpArchitecture arch;
};

LoadedRun load_run(CommonOpts& opt) {
  LoadedRun run;
  run.cfg = resolve_config(opt);
  run.hash = config_hash(run.cfg);
  try {
    run.data = load_configured_dataset(run.cfg);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  run.arch = make_architecture(run.cfg, run.data.dim());
  std::filesystem::create_directories(run.cfg.out_dir);
  return run;
}

std::string path_in(const RunConfig& cfg, const char* name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

const char* decision_name(Decision d) { return d == Decision::Ldcp ? "LDCP" : "not-LDCP"; }

int cmd_train(CommonOpts& opt) {
  LoadedRun run = load_run(opt);
  const auto t0 = std::chrono::steady_clock::now();
  const MlpNetwork net = train(run.arch, run.data, run.cfg.train);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::string out = path_in(run.cfg, "network.json");
  save_network(net, run.cfg.train, run.hash, out);
  save_run_config(run.cfg, path_in(run.cfg, "config.json"));
  std::printf("trained on %zu entries in %.2fs, accuracy %.2f%%, wrote %s\n", run.data.size(),
              secs, 100.0 * accuracy(net, run.data), out.c_str());
  return 0;
}

int cmd_predict(CommonOpts& opt, const std::string& network_path) {
  LoadedRun run = load_run(opt);
  const std::string net_path =
      network_path.empty() ? path_in(run.cfg, "network.json") : network_path;
  MlpNetwork net;
  try {
    net = load_network(net_path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!(net.architecture == run.arch)) {
    throw ConfigError("network file architecture does not match the configuration");
  }
  if (run.data.size() < static_cast<std::size_t>(run.cfg.hyper.networks_per_iteration)) {
    throw ConfigError("k (" + std::to_string(run.cfg.hyper.networks_per_iteration) +
                      ") exceeds dataset size " + std::to_string(run.data.size()));
  }

  const LooTrainerCache trainer(run.arch, run.data, run.cfg.train);
  auto loo = [&](std::size_t omitted) { return trainer(omitted); };
  const PredictedHyperNet predicted =
      pred_hyper_net(net, run.data, loo, run.cfg.hyper, run.cfg.parallelism);
  for (std::size_t i = 0; i < predicted.converged_fraction_log.size(); ++i) {
    std::printf("iteration %zu: converged fraction %.4f\n", i + 1,
                predicted.converged_fraction_log[i]);
  }

  HyperNetArtifact artifact;
  artifact.hyper = predicted.hyper;
  artifact.alpha = run.cfg.hyper.alpha;
  artifact.trained_count = predicted.trained_count;
  artifact.truncated = predicted.truncated;
  artifact.sample_seed = run.cfg.hyper.sample_seed;
  artifact.entry_indices = predicted.entry_indices;
  artifact.hash = run.hash;
  const std::string out = path_in(run.cfg, "hypernet.json");
  save_hypernet(artifact, out);
  std::printf("trained %zu of %zu networks%s, wrote %s\n", predicted.trained_count,
              run.data.size() + 1, predicted.truncated ? " (truncated)" : "", out.c_str());
  return 0;
}

int cmd_verify(CommonOpts& opt, const std::string& network_path, const std::string& hyper_path) {
  LoadedRun run = load_run(opt);
  MlpNetwork net;
  HyperNetArtifact artifact;
  try {
    net = load_network(network_path.empty() ? path_in(run.cfg, "network.json") : network_path);
    artifact = load_hypernet(hyper_path.empty() ? path_in(run.cfg, "hypernet.json") : hyper_path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (!(artifact.hyper.architecture == net.architecture)) {
    throw ConfigError("hyper-network and network architectures do not match");
  }
  if (!artifact.hash.empty() && artifact.hash != run.hash) {
    throw ConfigError("hyper-network was produced under a different configuration (hash " +
                      artifact.hash + " vs " + run.hash + ")");
  }

  const std::vector<Neighborhood> neighborhoods =
      resolve_neighborhoods(run.cfg.neighborhoods, run.data, net);
  std::vector<NeighborhoodResult> results(neighborhoods.size());
  parallel_for(
      neighborhoods.size(),
      [&](std::size_t i) {
        results[i].neighborhood = neighborhoods[i];
        try {
          results[i].verdict = decide_ldcp(artifact.hyper, neighborhoods[i], run.cfg.node_budget);
        } catch (const std::exception& e) {
          // A failed neighborhood is recorded conservatively; the run continues.
          results[i].verdict.decision = Decision::NotLdcp;
          results[i].error = e.what();
        }
      },
      run.cfg.parallelism);

  const std::string out = path_in(run.cfg, "results.json");
  save_results(results, run.hash, out);

  std::printf("%-4s %-12s %-9s %12s %10s\n", "#", "kind", "verdict", "objective", "ms");
  long not_ldcp = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const char* kind = r.neighborhood.kind == Neighborhood::Kind::Membership ? "membership"
                       : r.neighborhood.kind == Neighborhood::Kind::LinfBall ? "linf"
                                                                             : "sensitivity";
    std::printf("%-4zu %-12s %-9s %12.6f %10.1f%s%s%s\n", i, kind,
                decision_name(r.verdict.decision), r.verdict.objective_bound,
                r.verdict.wall_time_ms, r.verdict.budget_exceeded ? " (budget)" : "",
                r.error.empty() ? "" : " error: ", r.error.c_str());
    if (r.verdict.decision == Decision::NotLdcp) ++not_ldcp;
  }
  std::printf("wrote %s (%zu neighborhoods, %ld not LDCP)\n", out.c_str(), results.size(),
              not_ldcp);
  return not_ldcp > 0 ? 1 : 0;
}

int cmd_baseline(CommonOpts& opt, const std::string& network_path, const std::string& hyper_path) {
  LoadedRun run = load_run(opt);
  MlpNetwork net;
  try {
    net = load_network(network_path.empty() ? path_in(run.cfg, "network.json") : network_path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }

  const std::vector<Neighborhood> neighborhoods =
      resolve_neighborhoods(run.cfg.neighborhoods, run.data, net);

  const LooTrainerCache trainer(run.arch, run.data, run.cfg.train);
  const auto t0 = std::chrono::steady_clock::now();
  trainer.pretrain_all(run.cfg.parallelism);

  std::vector<NaiveResult> naive(neighborhoods.size());
  auto loo = [&](long omitted) -> const MlpNetwork& {
    return trainer(static_cast<std::size_t>(omitted));
  };
  for (std::size_t i = 0; i < neighborhoods.size(); ++i) {
    naive[i] = naive_ldcp(net, run.data, loo, neighborhoods[i], run.cfg.node_budget,
                          run.cfg.parallelism);
  }
  const double naive_secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  Json report;
  report["config_hash"] = run.hash;
  Json naive_json = Json::array();
  long ldcp_count = 0;
  for (std::size_t i = 0; i < naive.size(); ++i) {
    const auto& r = naive[i];
    naive_json.push_back(Json{{"index", i},
                              {"verdict", r.verdict.decision == Decision::Ldcp ? "ldcp" : "not_ldcp"},
                              {"violating_networks", r.violating},
                              {"wall_time_ms", r.verdict.wall_time_ms}});
    if (r.verdict.decision == Decision::Ldcp) ++ldcp_count;
  }
  report["naive"] = naive_json;
  report["naive_wall_time_s"] = naive_secs;
  std::printf("naive baseline: %ld of %zu neighborhoods LDCP (%.1fs, %zu networks)\n", ldcp_count,
              naive.size(), naive_secs, run.data.size() + 1);

  // Coverage of the predicted hyper-network against the exact abstraction.
  std::vector<MlpNetwork> all_nets;
  all_nets.push_back(trainer.full());
  for (std::size_t i = 0; i < run.data.size(); ++i) all_nets.push_back(trainer(i));
  const IntervalHyperNetwork optimal = interval_abstraction(all_nets);

  const std::string hpath = hyper_path.empty() ? path_in(run.cfg, "hypernet.json") : hyper_path;
  bool have_hyper = false;
  HyperNetArtifact artifact;
  try {
    artifact = load_hypernet(hpath);
    have_hyper = true;
  } catch (const std::exception&) {
    std::fprintf(stderr, "warning: no hyper-network at %s, coverage section omitted\n",
                 hpath.c_str());
  }
  if (have_hyper) {
    const CoverageMetrics cov = coverage_metrics(artifact.hyper, optimal, all_nets);
    report["coverage"] = Json{{"weight_abstraction_rate", cov.weight_abstraction_rate},
                              {"network_abstraction_rate", cov.network_abstraction_rate},
                              {"miscoverage", cov.miscoverage},
                              {"overcoverage", cov.overcoverage},
                              {"overcoverage_excluded", cov.overcoverage_excluded},
                              {"trained_networks", artifact.trained_count}};
    std::printf("coverage: weight %.2f%%, network %.2f%%, miscoverage %.4g, overcoverage %.4g\n",
                cov.weight_abstraction_rate, cov.network_abstraction_rate, cov.miscoverage,
                cov.overcoverage);
  }

  // Confusion against a prior verify run, when available.
  const std::string rpath = path_in(run.cfg, "results.json");
  std::vector<NeighborhoodResult> prior;
  bool have_results = false;
  try {
    prior = load_results(rpath);
    have_results = true;
  } catch (const std::exception&) {
    std::fprintf(stderr, "warning: no verification results at %s, confusion section omitted\n",
                 rpath.c_str());
  }
  if (have_results) {
    if (prior.size() != naive.size()) {
      throw ConfigError("results file has " + std::to_string(prior.size()) +
                        " entries, baseline has " + std::to_string(naive.size()));
    }
    std::vector<Decision> ours, truth;
    double verify_ms = 0.0;
    for (std::size_t i = 0; i < prior.size(); ++i) {
      ours.push_back(prior[i].verdict.decision);
      truth.push_back(naive[i].verdict.decision);
      verify_ms += prior[i].verdict.wall_time_ms;
    }
    const ConfusionMatrix cm = confusion(ours, truth);
    const double naive_ms =
        std::accumulate(naive.begin(), naive.end(), 0.0, [](double acc, const NaiveResult& r) {
          return acc + r.verdict.wall_time_ms;
        });
    const double speedup = verify_ms > 0.0 ? naive_ms / verify_ms : 0.0;
    report["confusion"] = Json{{"tp", cm.tp}, {"tn", cm.tn}, {"fp", cm.fp}, {"fn", cm.fn}};
    report["verify_speedup"] = speedup;
    std::printf("confusion: TP %ld TN %ld FP %ld FN %ld (agreement %.1f%%), verify speedup %.1fx\n",
                cm.tp, cm.tn, cm.fp, cm.fn,
                100.0 * static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total()),
                speedup);
  }

  const std::string out = path_in(run.cfg, "baseline.json");
  {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write file: " + out);
    f << report.dump(2) << "\n";
  }
  std::printf("wrote %s\n", out.c_str());
  for (const auto& r : naive) {
    if (r.verdict.decision == Decision::NotLdcp) return 1;
  }
  return 0;
}

int cmd_report(CommonOpts& opt) {
  RunConfig cfg = resolve_config(opt);
  bool printed = false;
  const std::string rpath = path_in(cfg, "results.json");
  try {
    const std::vector<NeighborhoodResult> results = load_results(rpath);
    long ldcp = 0;
    double total_ms = 0.0;
    for (const auto& r : results) {
      if (r.verdict.decision == Decision::Ldcp) ++ldcp;
      total_ms += r.verdict.wall_time_ms;
    }
    std::printf("verification results (%s): %ld/%zu LDCP, mean %.1f ms per neighborhood\n",
                rpath.c_str(), ldcp, results.size(),
                results.empty() ? 0.0 : total_ms / static_cast<double>(results.size()));
    printed = true;
  } catch (const std::exception&) {
  }
  const std::string bpath = path_in(cfg, "baseline.json");
  try {
    std::ifstream f(bpath);
    if (!f) throw std::runtime_error("missing");
    Json j;
    f >> j;
    if (j.contains("confusion")) {
      const auto& cm = j["confusion"];
      std::printf("confusion (%s): TP %ld TN %ld FP %ld FN %ld\n", bpath.c_str(),
                  cm["tp"].get<long>(), cm["tn"].get<long>(), cm["fp"].get<long>(),
                  cm["fn"].get<long>());
    }
    if (j.contains("coverage")) {
      const auto& cov = j["coverage"];
      std::printf("coverage: weight %.2f%% network %.2f%% miscoverage %.4g overcoverage %.4g\n",
                  cov["weight_abstraction_rate"].get<double>(),
                  cov["network_abstraction_rate"].get<double>(), cov["miscoverage"].get<double>(),
                  cov["overcoverage"].get<double>());
    }
    printed = true;
  } catch (const std::exception&) {
  }
  if (!printed) throw ConfigError("nothing to report in " + cfg.out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local differential classification privacy checker for ReLU classifiers"};
  app.require_subcommand(1);

  CommonOpts opt;
  std::string network_path, hyper_path;

  CLI::App* train_cmd = app.add_subcommand("train", "train the full-data network");
  CLI::App* predict_cmd = app.add_subcommand("predict", "predict an interval hyper-network");
  CLI::App* verify_cmd = app.add_subcommand("verify", "verify LDCP at the configured neighborhoods");
  CLI::App* baseline_cmd = app.add_subcommand("baseline", "exact naive baseline and metrics report");
  CLI::App* report_cmd = app.add_subcommand("report", "print summaries of existing artifacts");
  for (CLI::App* cmd : {train_cmd, predict_cmd, verify_cmd, baseline_cmd, report_cmd}) {
    add_common_options(cmd, opt);
  }
  for (CLI::App* cmd : {predict_cmd, verify_cmd, baseline_cmd}) {
    cmd->add_option("--network", network_path, "trained network JSON");
  }
  for (CLI::App* cmd : {verify_cmd, baseline_cmd}) {
    cmd->add_option("--hypernet", hyper_path, "hyper-network JSON");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(opt);
    if (predict_cmd->parsed()) return cmd_predict(opt, network_path);
    if (verify_cmd->parsed()) return cmd_verify(opt, network_path, hyper_path);
    if (baseline_cmd->parsed()) return cmd_baseline(opt, network_path, hyper_path);
    if (report_cmd->parsed()) return cmd_report(opt);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
  return 2;
}
