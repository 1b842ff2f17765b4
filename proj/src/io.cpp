#include "ldcp/io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace ldcp {
namespace {

using Json = nlohmann::ordered_json;

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": invalid JSON: " + e.what());
  }
  return j;
}

void write_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Json train_config_to_json(const TrainConfig& cfg) {
  return Json{{"epochs", cfg.epochs},
              {"learning_rate", cfg.learning_rate},
              {"batch_size", cfg.batch_size},
              {"l1_coefficient", cfg.l1_coefficient},
              {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig cfg;
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.l1_coefficient = j.value("l1_coefficient", cfg.l1_coefficient);
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

Json hyper_config_to_json(const HyperNetConfig& cfg) {
  return Json{{"alpha", cfg.alpha},
              {"k", cfg.networks_per_iteration},
              {"M", cfg.converged_fraction},
              {"R", cfg.distance_threshold},
              {"max_networks", cfg.max_networks},
              {"sample_seed", cfg.sample_seed}};
}

HyperNetConfig hyper_config_from_json(const Json& j) {
  HyperNetConfig cfg;
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.networks_per_iteration = j.value("k", cfg.networks_per_iteration);
  cfg.converged_fraction = j.value("M", cfg.converged_fraction);
  cfg.distance_threshold = j.value("R", cfg.distance_threshold);
  cfg.max_networks = j.value("max_networks", cfg.max_networks);
  cfg.sample_seed = j.value("sample_seed", cfg.sample_seed);
  return cfg;
}

Json run_config_to_json(const RunConfig& cfg) {
  Json specs = Json::array();
  for (const auto& s : cfg.neighborhoods) {
    specs.push_back(Json{{"kind", s.kind},
                         {"row", s.row},
                         {"center", s.center},
                         {"epsilon", s.epsilon},
                         {"features", s.features},
                         {"label", s.label}});
  }
  return Json{{"dataset_csv", cfg.dataset_csv},
              {"schema_json", cfg.schema_json},
              {"synth_n", cfg.synth_n},
              {"synth_d", cfg.synth_d},
              {"synth_seed", cfg.synth_seed},
              {"hidden_layers", cfg.hidden_layers},
              {"train", train_config_to_json(cfg.train)},
              {"hyper", hyper_config_to_json(cfg.hyper)},
              {"neighborhoods", specs},
              {"out_dir", cfg.out_dir},
              {"parallelism", cfg.parallelism},
              {"node_budget", cfg.node_budget}};
}

Neighborhood::Kind parse_kind(const std::string& kind) {
  if (kind == "membership") return Neighborhood::Kind::Membership;
  if (kind == "linf") return Neighborhood::Kind::LinfBall;
  if (kind == "sensitivity") return Neighborhood::Kind::Sensitivity;
  throw std::runtime_error("unknown neighborhood kind: " + kind);
}

std::string kind_name(Neighborhood::Kind kind) {
  switch (kind) {
    case Neighborhood::Kind::Membership: return "membership";
    case Neighborhood::Kind::LinfBall: return "linf";
    case Neighborhood::Kind::Sensitivity: return "sensitivity";
  }
  return "membership";
}

Json architecture_to_json(const MlpArchitecture& arch) {
  return Json{{"layer_sizes", arch.layer_sizes}};
}

MlpArchitecture architecture_from_json(const Json& j) {
  MlpArchitecture arch;
  arch.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  arch.validate();
  return arch;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  const Json j = read_json_file(path);
  RunConfig cfg;
  cfg.dataset_csv = j.value("dataset_csv", cfg.dataset_csv);
  cfg.schema_json = j.value("schema_json", cfg.schema_json);
  cfg.synth_n = j.value("synth_n", cfg.synth_n);
  cfg.synth_d = j.value("synth_d", cfg.synth_d);
  cfg.synth_seed = j.value("synth_seed", cfg.synth_seed);
  cfg.hidden_layers = j.value("hidden_layers", cfg.hidden_layers);
  if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
  if (j.contains("hyper")) cfg.hyper = hyper_config_from_json(j.at("hyper"));
  if (j.contains("neighborhoods")) {
    for (const auto& s : j.at("neighborhoods")) {
      NeighborhoodSpec spec;
      spec.kind = s.value("kind", spec.kind);
      spec.row = s.value("row", spec.row);
      spec.center = s.value("center", spec.center);
      spec.epsilon = s.value("epsilon", spec.epsilon);
      spec.features = s.value("features", spec.features);
      spec.label = s.value("label", spec.label);
      cfg.neighborhoods.push_back(std::move(spec));
    }
  }
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.parallelism = j.value("parallelism", cfg.parallelism);
  cfg.node_budget = j.value("node_budget", cfg.node_budget);
  return cfg;
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
  write_json_file(run_config_to_json(cfg), path);
}

std::string config_hash(const RunConfig& cfg) {
  // Covers what determines the trained artifacts: the dataset, the
  // architecture, and the training recipe. Verify-time options
  // (neighborhoods, output paths, parallelism) may differ between runs.
  const Json provenance{{"dataset_csv", cfg.dataset_csv},
                        {"schema_json", cfg.schema_json},
                        {"synth_n", cfg.synth_n},
                        {"synth_d", cfg.synth_d},
                        {"synth_seed", cfg.synth_seed},
                        {"hidden_layers", cfg.hidden_layers},
                        {"train", train_config_to_json(cfg.train)}};
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(provenance.dump())));
  return buf;
}

FeatureSchema load_schema(const std::string& path) {
  const Json j = read_json_file(path);
  FeatureSchema schema;
  for (const auto& c : j.at("columns")) {
    ColumnSpec col;
    col.name = c.at("name").get<std::string>();
    const std::string kind = c.at("kind").get<std::string>();
    const Json params = c.value("params", Json::object());
    if (kind == "continuous") {
      col.kind = ColumnSpec::Kind::Continuous;
      col.min = params.at("min").get<double>();
      col.max = params.at("max").get<double>();
    } else if (kind == "categorical") {
      col.kind = ColumnSpec::Kind::Categorical;
      col.categories = params.at("categories").get<std::vector<std::string>>();
    } else if (kind == "binary") {
      col.kind = ColumnSpec::Kind::Binary;
      col.categories = params.at("categories").get<std::vector<std::string>>();
    } else {
      throw std::runtime_error(path + ": unknown column kind '" + kind + "'");
    }
    schema.columns.push_back(std::move(col));
  }
  schema.label_name = j.at("label").at("name").get<std::string>();
  schema.label_positive = j.at("label").at("positive").get<std::string>();
  schema.validate();
  return schema;
}

EncodedDataset load_configured_dataset(const RunConfig& cfg) {
  if (!cfg.dataset_csv.empty()) {
    if (cfg.schema_json.empty()) {
      throw std::runtime_error("config: dataset_csv given without schema_json");
    }
    return load_csv(cfg.dataset_csv, load_schema(cfg.schema_json));
  }
  return synth_dataset(cfg.synth_n, cfg.synth_d, cfg.synth_seed);
}

MlpArchitecture make_architecture(const RunConfig& cfg, int input_dim) {
  MlpArchitecture arch;
  arch.layer_sizes.push_back(input_dim);
  for (const int h : cfg.hidden_layers) arch.layer_sizes.push_back(h);
  arch.layer_sizes.push_back(1);
  arch.validate();
  return arch;
}

void save_network(const MlpNetwork& net, const TrainConfig& cfg, const std::string& hash,
                  const std::string& path) {
  Json j{{"architecture", architecture_to_json(net.architecture)},
         {"weights", net.weights},
         {"biases", net.biases},
         {"seed", cfg.seed},
         {"train_config", train_config_to_json(cfg)},
         {"config_hash", hash}};
  write_json_file(j, path);
}

MlpNetwork load_network(const std::string& path, std::string* hash) {
  const Json j = read_json_file(path);
  MlpNetwork net;
  net.architecture = architecture_from_json(j.at("architecture"));
  net.weights = j.at("weights").get<std::vector<std::vector<double>>>();
  net.biases = j.at("biases").get<std::vector<std::vector<double>>>();
  if (hash) *hash = j.value("config_hash", "");

  const auto& sizes = net.architecture.layer_sizes;
  if (net.weights.size() != net.architecture.num_layers() ||
      net.biases.size() != net.architecture.num_layers()) {
    throw std::runtime_error(path + ": layer count mismatch");
  }
  for (std::size_t m = 0; m < net.weights.size(); ++m) {
    const std::size_t expect_w = static_cast<std::size_t>(sizes[m + 1]) *
                                 static_cast<std::size_t>(sizes[m]);
    if (net.weights[m].size() != expect_w ||
        net.biases[m].size() != static_cast<std::size_t>(sizes[m + 1])) {
      throw std::runtime_error(path + ": parameter shape mismatch at layer " + std::to_string(m + 1));
    }
  }
  return net;
}

void save_hypernet(const HyperNetArtifact& artifact, const std::string& path) {
  auto lowers = [](const std::vector<std::vector<Interval>>& layers) {
    std::vector<std::vector<double>> out;
    for (const auto& layer : layers) {
      std::vector<double> row;
      row.reserve(layer.size());
      for (const Interval& iv : layer) row.push_back(iv.lo);
      out.push_back(std::move(row));
    }
    return out;
  };
  auto uppers = [](const std::vector<std::vector<Interval>>& layers) {
    std::vector<std::vector<double>> out;
    for (const auto& layer : layers) {
      std::vector<double> row;
      row.reserve(layer.size());
      for (const Interval& iv : layer) row.push_back(iv.hi);
      out.push_back(std::move(row));
    }
    return out;
  };
  Json j{{"architecture", architecture_to_json(artifact.hyper.architecture)},
         {"weight_lower", lowers(artifact.hyper.weight_intervals)},
         {"weight_upper", uppers(artifact.hyper.weight_intervals)},
         {"bias_lower", lowers(artifact.hyper.bias_intervals)},
         {"bias_upper", uppers(artifact.hyper.bias_intervals)},
         {"alpha", artifact.alpha},
         {"K", artifact.trained_count},
         {"truncated", artifact.truncated},
         {"manifest", Json{{"seed", artifact.sample_seed}, {"entry_indices", artifact.entry_indices}}},
         {"config_hash", artifact.hash}};
  write_json_file(j, path);
}

HyperNetArtifact load_hypernet(const std::string& path) {
  const Json j = read_json_file(path);
  HyperNetArtifact artifact;
  artifact.hyper.architecture = architecture_from_json(j.at("architecture"));
  const auto wl = j.at("weight_lower").get<std::vector<std::vector<double>>>();
  const auto wu = j.at("weight_upper").get<std::vector<std::vector<double>>>();
  const auto bl = j.at("bias_lower").get<std::vector<std::vector<double>>>();
  const auto bu = j.at("bias_upper").get<std::vector<std::vector<double>>>();
  if (wl.size() != wu.size() || bl.size() != bu.size() ||
      wl.size() != artifact.hyper.architecture.num_layers()) {
    throw std::runtime_error(path + ": bound shape mismatch");
  }
  for (std::size_t m = 0; m < wl.size(); ++m) {
    if (wl[m].size() != wu[m].size() || bl[m].size() != bu[m].size()) {
      throw std::runtime_error(path + ": bound shape mismatch at layer " + std::to_string(m + 1));
    }
    std::vector<Interval> w, b;
    for (std::size_t i = 0; i < wl[m].size(); ++i) w.emplace_back(wl[m][i], wu[m][i]);
    for (std::size_t i = 0; i < bl[m].size(); ++i) b.emplace_back(bl[m][i], bu[m][i]);
    artifact.hyper.weight_intervals.push_back(std::move(w));
    artifact.hyper.bias_intervals.push_back(std::move(b));
  }
  artifact.alpha = j.value("alpha", 0.1);
  artifact.trained_count = j.value("K", std::size_t{0});
  artifact.truncated = j.value("truncated", false);
  if (j.contains("manifest")) {
    artifact.sample_seed = j.at("manifest").value("seed", std::uint64_t{0});
    artifact.entry_indices =
        j.at("manifest").value("entry_indices", std::vector<std::size_t>{});
  }
  artifact.hash = j.value("config_hash", "");
  return artifact;
}

void save_results(const std::vector<NeighborhoodResult>& results, const std::string& hash,
                  const std::string& path) {
  Json arr = Json::array();
  for (const auto& r : results) {
    Json entry{
        {"neighborhood", Json{{"kind", kind_name(r.neighborhood.kind)},
                              {"center", r.neighborhood.center},
                              {"label", r.neighborhood.expected_label},
                              {"epsilon", r.neighborhood.epsilon},
                              {"features", r.neighborhood.sensitive_features}}},
        {"verdict", r.verdict.decision == Decision::Ldcp ? "ldcp" : "not_ldcp"},
        {"objective_bound", r.verdict.objective_bound},
        {"wall_time_ms", r.verdict.wall_time_ms},
        {"budget_exceeded", r.verdict.budget_exceeded}};
    if (!r.error.empty()) entry["error"] = r.error;
    arr.push_back(std::move(entry));
  }
  write_json_file(Json{{"config_hash", hash}, {"results", arr}}, path);
}

std::vector<NeighborhoodResult> load_results(const std::string& path, std::string* hash) {
  const Json j = read_json_file(path);
  if (hash) *hash = j.value("config_hash", "");
  std::vector<NeighborhoodResult> results;
  for (const auto& r : j.at("results")) {
    NeighborhoodResult out;
    const auto& n = r.at("neighborhood");
    out.neighborhood.kind = parse_kind(n.at("kind").get<std::string>());
    out.neighborhood.center = n.at("center").get<std::vector<double>>();
    out.neighborhood.expected_label = n.at("label").get<int>();
    out.neighborhood.epsilon = n.value("epsilon", 0.0);
    out.neighborhood.sensitive_features = n.value("features", std::vector<int>{});
    out.verdict.decision =
        r.at("verdict").get<std::string>() == "ldcp" ? Decision::Ldcp : Decision::NotLdcp;
    out.verdict.objective_bound = r.value("objective_bound", 0.0);
    out.verdict.wall_time_ms = r.value("wall_time_ms", 0.0);
    out.verdict.budget_exceeded = r.value("budget_exceeded", false);
    out.error = r.value("error", std::string{});
    results.push_back(std::move(out));
  }
  return results;
}

std::vector<Neighborhood> resolve_neighborhoods(const std::vector<NeighborhoodSpec>& specs,
                                                const EncodedDataset& data,
                                                const MlpNetwork& network) {
  std::vector<Neighborhood> out;
  for (const auto& spec : specs) {
    Neighborhood nbh;
    nbh.kind = parse_kind(spec.kind);
    if (spec.row >= 0) {
      if (spec.row >= static_cast<long>(data.size())) {
        throw std::runtime_error("neighborhood row " + std::to_string(spec.row) +
                                 " out of range (dataset has " + std::to_string(data.size()) +
                                 " rows)");
      }
      nbh.center = data.inputs[static_cast<std::size_t>(spec.row)];
    } else if (!spec.center.empty()) {
      nbh.center = spec.center;
    } else {
      throw std::runtime_error("neighborhood needs a row or an explicit center");
    }
    nbh.epsilon = spec.epsilon;
    nbh.sensitive_features = spec.features;
    nbh.expected_label = spec.label != 0 ? spec.label : network.classify(nbh.center);
    out.push_back(std::move(nbh));
  }
  return out;
}

}  // namespace ldcp
