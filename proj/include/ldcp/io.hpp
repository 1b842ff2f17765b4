#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldcp/dataset.hpp"
#include "ldcp/hypernet.hpp"
#include "ldcp/mlp.hpp"
#include "ldcp/verify.hpp"

namespace ldcp {

/// One neighborhood request before resolution against a dataset/network:
/// the center is either an explicit vector or a dataset row, and label 0
/// means "classify the center with the full-data network".
struct NeighborhoodSpec {
  std::string kind = "membership";  // membership | linf | sensitivity
  long row = -1;
  std::vector<double> center;
  double epsilon = 0.05;
  std::vector<int> features;
  int label = 0;
};

struct RunConfig {
  // Data: either a CSV + schema pair or a synthetic spec.
  std::string dataset_csv;
  std::string schema_json;
  std::size_t synth_n = 200;
  int synth_d = 5;
  std::uint64_t synth_seed = 1;

  std::vector<int> hidden_layers{5, 5};
  TrainConfig train;
  HyperNetConfig hyper;
  std::vector<NeighborhoodSpec> neighborhoods;

  std::string out_dir = "out";
  unsigned parallelism = 0;  // 0: hardware concurrency
  long node_budget = 200000;
};

RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

/// FNV-1a hash of the canonical JSON serialization; embedded in every
/// artifact so downstream commands can refuse mismatched inputs.
std::string config_hash(const RunConfig& cfg);

FeatureSchema load_schema(const std::string& path);

/// Loads the configured dataset (CSV + schema, or synthetic when no CSV is
/// given).
EncodedDataset load_configured_dataset(const RunConfig& cfg);

MlpArchitecture make_architecture(const RunConfig& cfg, int input_dim);

void save_network(const MlpNetwork& net, const TrainConfig& cfg, const std::string& hash,
                  const std::string& path);
MlpNetwork load_network(const std::string& path, std::string* hash = nullptr);

struct HyperNetArtifact {
  IntervalHyperNetwork hyper;
  double alpha = 0.1;
  std::size_t trained_count = 0;
  bool truncated = false;
  std::uint64_t sample_seed = 0;
  std::vector<std::size_t> entry_indices;
  std::string hash;
};

void save_hypernet(const HyperNetArtifact& artifact, const std::string& path);
HyperNetArtifact load_hypernet(const std::string& path);

struct NeighborhoodResult {
  Neighborhood neighborhood;
  Verdict verdict;
  std::string error;  // non-empty when this neighborhood failed to verify
};

void save_results(const std::vector<NeighborhoodResult>& results, const std::string& hash,
                  const std::string& path);
std::vector<NeighborhoodResult> load_results(const std::string& path, std::string* hash = nullptr);

/// Resolves neighborhood specs against the dataset and the trained network
/// (row centers, default labels).
std::vector<Neighborhood> resolve_neighborhoods(const std::vector<NeighborhoodSpec>& specs,
                                                const EncodedDataset& data,
                                                const MlpNetwork& network);

}  // namespace ldcp
