#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ldcp/hypernet.hpp"
#include "ldcp/interval.hpp"
#include "ldcp/milp.hpp"
#include "ldcp/mlp.hpp"

namespace ldcp {

/// An input region paired with the label every network must assign on it.
struct Neighborhood {
  enum class Kind { Membership, LinfBall, Sensitivity };
  Kind kind = Kind::Membership;
  std::vector<double> center;  // in [0,1]^d
  int expected_label = +1;
  double epsilon = 0.0;                 // LinfBall
  std::vector<int> sensitive_features;  // Sensitivity: coordinates freed to [0,1]
};

/// Per-coordinate input box: a point for Membership, the epsilon box clipped
/// to [0,1] for LinfBall, and for Sensitivity the center with every listed
/// coordinate freed to [0,1].
std::vector<Interval> neighborhood_box(const Neighborhood& nbh);

enum class Decision { Ldcp, NotLdcp };

struct Verdict {
  Decision decision = Decision::NotLdcp;
  double objective_bound = 0.0;  // minimized label * score
  double wall_time_ms = 0.0;
  bool budget_exceeded = false;
};

/// Decides LDCP on the hyper-network: propagate bounds, encode, solve.
/// When the propagated output interval already certifies the label the MILP
/// is skipped. A solver budget overrun is answered conservatively as
/// NotLdcp with the budget flag set.
Verdict decide_ldcp(const IntervalHyperNetwork& hyper, const Neighborhood& nbh,
                    long node_budget = 200000);

/// Ground truth: trains all |D|+1 leave-one-out networks and verifies each
/// one's robustness at the neighborhood via its point hyper-network. Ldcp
/// iff every network is robust with the expected label.
struct NaiveResult {
  Verdict verdict;
  std::vector<Verdict> per_network;        // [0] full network, [1+i] omit entry i
  std::vector<std::size_t> violating;      // indices into per_network
};

NaiveResult naive_ldcp(const MlpNetwork& network, const EncodedDataset& data,
                       const std::function<const MlpNetwork&(long)>& loo_trainer,
                       const Neighborhood& nbh, long node_budget = 200000,
                       unsigned threads = 0);

struct ConfusionMatrix {
  long tp = 0;  // both Ldcp
  long tn = 0;  // both NotLdcp
  long fp = 0;  // predicted Ldcp, ground truth NotLdcp
  long fn = 0;  // predicted NotLdcp, ground truth Ldcp
  long total() const { return tp + tn + fp + fn; }
};

ConfusionMatrix confusion(std::span<const Decision> predicted,
                          std::span<const Decision> ground_truth);

/// Interval-quality metrics of a predicted hyper-network against the exact
/// min/max abstraction of all concrete networks.
struct CoverageMetrics {
  double weight_abstraction_rate = 0.0;   // % of parameters covering all values
  double network_abstraction_rate = 0.0;  // % of networks fully abstracted
  double miscoverage = 0.0;               // mean |optimal \ predicted| / |predicted|
  double overcoverage = 1.0;              // geometric mean |predicted join optimal| / |optimal|
  std::size_t overcoverage_excluded = 0;  // parameters skipped for zero-width optimal
};

CoverageMetrics coverage_metrics(const IntervalHyperNetwork& predicted,
                                 const IntervalHyperNetwork& optimal,
                                 std::span<const MlpNetwork> all_nets);

}  // namespace ldcp
