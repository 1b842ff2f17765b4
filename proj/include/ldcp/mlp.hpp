#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "ldcp/dataset.hpp"

namespace ldcp {

/// Layer sizes of a fully-connected ReLU binary classifier:
/// input dim, one or more hidden sizes, output size 1.
struct MlpArchitecture {
  std::vector<int> layer_sizes;

  void validate() const;
  int input_dim() const { return layer_sizes.front(); }
  /// Number of affine layers (hidden layers + output layer).
  std::size_t num_layers() const { return layer_sizes.size() - 1; }
  std::size_t param_count() const;
  bool operator==(const MlpArchitecture&) const = default;
};

/// Concrete network: per-layer weight matrices (row-major, one row per
/// output neuron) and bias vectors. ReLU follows every affine layer except
/// the last; the last layer's output is the raw score.
struct MlpNetwork {
  MlpArchitecture architecture;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static MlpNetwork zeros(const MlpArchitecture& arch);

  double forward(std::span<const double> x) const;
  /// +1 iff forward(x) >= 0, else -1.
  int classify(std::span<const double> x) const;

  std::size_t param_count() const { return architecture.param_count(); }
  /// Flat parameter order: per layer, weights row-major then biases.
  double param(std::size_t flat_index) const;
  void set_param(std::size_t flat_index, double value);
  std::vector<double> flat_params() const;
  void set_flat_params(std::span<const double> params);
};

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 0.1;
  int batch_size = 1024;
  double l1_coefficient = 1e-5;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Trains with plain SGD on sigmoid binary cross-entropy plus an L1 penalty.
/// Bit-identical results for identical (arch, data, cfg): initialization and
/// per-epoch batch shuffling are driven only by cfg.seed.
MlpNetwork train(const MlpArchitecture& arch, const EncodedDataset& data,
                 const TrainConfig& cfg);

/// Leave-one-out training: same seed and the same shuffled index stream as
/// train() on the full data, with the omitted entry skipped wherever it
/// appears. omitted < 0 trains on the full dataset.
MlpNetwork train_loo(const MlpArchitecture& arch, const EncodedDataset& data,
                     long omitted, const TrainConfig& cfg);
MlpNetwork train_loo(const MlpArchitecture& arch, const LooView& view, const TrainConfig& cfg);

/// Mean BCE-with-sigmoid loss over the batch plus l1 * sum |theta|.
double batch_loss(const MlpNetwork& net, std::span<const std::vector<double>> inputs,
                  std::span<const int> labels, double l1);

/// Analytic gradient of batch_loss with respect to the flat parameters.
std::vector<double> batch_loss_gradient(const MlpNetwork& net,
                                        std::span<const std::vector<double>> inputs,
                                        std::span<const int> labels, double l1);

double accuracy(const MlpNetwork& net, const EncodedDataset& data);

/// Memoizing leave-one-out trainer shared by the prediction loop and the
/// naive baseline. Index semantics: operator()(omitted) with omitted in
/// [0, n) trains without that entry; full() is the all-data network.
class LooTrainerCache {
 public:
  LooTrainerCache(MlpArchitecture arch, const EncodedDataset& data, TrainConfig cfg);

  const MlpNetwork& full() const;
  const MlpNetwork& operator()(std::size_t omitted) const;
  /// Trains every network up front on `threads` workers.
  void pretrain_all(unsigned threads = 0) const;
  std::size_t trained_count() const;

 private:
  const MlpNetwork& slot(std::size_t idx) const;  // idx 0 = full, 1+i = omit i

  MlpArchitecture arch_;
  const EncodedDataset* data_;
  TrainConfig cfg_;
  mutable std::vector<std::optional<MlpNetwork>> cache_;
  mutable std::vector<std::unique_ptr<std::mutex>> locks_;
};

}  // namespace ldcp
