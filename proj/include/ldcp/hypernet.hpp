#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ldcp/interval.hpp"
#include "ldcp/mlp.hpp"

namespace ldcp {

/// A network whose parameters are intervals: one closed interval per weight
/// and bias of an ordinary network of the same architecture.
struct IntervalHyperNetwork {
  MlpArchitecture architecture;
  std::vector<std::vector<Interval>> weight_intervals;
  std::vector<std::vector<Interval>> bias_intervals;

  static IntervalHyperNetwork point(const MlpNetwork& net);

  std::size_t param_count() const { return architecture.param_count(); }
  Interval param(std::size_t flat_index) const;
  void set_param(std::size_t flat_index, const Interval& value);
};

struct HyperNetConfig {
  double alpha = 0.1;               // target miss probability of the abstraction
  int networks_per_iteration = 400; // k
  double converged_fraction = 0.9;  // M: fraction of parameters that must settle
  double distance_threshold = 0.1;  // R: max Jaccard distance counted as settled
  std::size_t max_networks = 0;     // 0 means |D|+1 (uncapped)
  std::uint64_t sample_seed = 0;

  void validate() const;
};

/// Exact min/max interval abstraction of a set of same-architecture networks.
IntervalHyperNetwork interval_abstraction(std::span<const MlpNetwork> nets);

/// True iff enough parameter intervals stayed put between two consecutive
/// hyper-networks: #{w : 1 - jaccard(curr_w, prev_w) <= R} >= M * #params.
/// prev == nullptr (the first iteration) is never converged.
bool stopping_condition(const IntervalHyperNetwork* prev, const IntervalHyperNetwork& curr,
                        double distance_threshold, double converged_fraction);

struct PredictedHyperNet {
  IntervalHyperNetwork hyper;
  std::size_t trained_count = 0;  // K = |nets|, including the full network
  bool truncated = false;         // stopped by budget or dataset exhaustion
  std::vector<std::size_t> entry_indices;       // sampled omission order
  std::vector<double> converged_fraction_log;   // one value per stopping check
};

/// Iterative prediction of an interval hyper-network. Each round trains
/// networks_per_iteration leave-one-out networks on entries sampled without
/// replacement, then re-predicts every parameter's interval with
/// pred_int(values, alpha / #params); rounds repeat until the Jaccard
/// stopping condition holds or the budget runs out.
PredictedHyperNet pred_hyper_net(const MlpNetwork& network, const EncodedDataset& data,
                                 const std::function<MlpNetwork(std::size_t)>& loo_trainer,
                                 const HyperNetConfig& cfg, unsigned threads = 0);

/// True iff every parameter of the network lies inside its interval.
bool abstracts(const IntervalHyperNetwork& hyper, const MlpNetwork& net);

/// Pre-activation interval per neuron per affine layer, by forward interval
/// arithmetic. Requires the input box to lie in [0,1]^d; activations are
/// clamped to [max(0,l), max(0,u)] between layers, so every multiplication
/// sees a non-negative input interval.
std::vector<std::vector<Interval>> propagate_bounds(const IntervalHyperNetwork& hyper,
                                                    std::span<const Interval> input_box);

/// Variant matching the penalized affine encoding: first-layer inputs may
/// have negative lower bounds, and each first-layer bound is widened by
/// sum_j (u_w - l_w) * max(0, -l_x_j). Later layers are post-ReLU and follow
/// the standard propagation.
std::vector<std::vector<Interval>> propagate_bounds_penalized(
    const IntervalHyperNetwork& hyper, std::span<const Interval> input_box);

}  // namespace ldcp
