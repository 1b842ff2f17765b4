#include "ldcp/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ldcp/parallel.hpp"

namespace ldcp {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

std::vector<Interval> neighborhood_box(const Neighborhood& nbh) {
  const std::size_t d = nbh.center.size();
  for (const double v : nbh.center) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("neighborhood: center outside [0,1]");
    }
  }
  std::vector<Interval> box;
  box.reserve(d);
  switch (nbh.kind) {
    case Neighborhood::Kind::Membership:
      for (const double v : nbh.center) box.push_back(Interval::point(v));
      break;
    case Neighborhood::Kind::LinfBall:
      if (!(nbh.epsilon > 0.0)) throw std::invalid_argument("neighborhood: epsilon must be > 0");
      for (const double v : nbh.center) {
        box.emplace_back(std::max(0.0, v - nbh.epsilon), std::min(1.0, v + nbh.epsilon));
      }
      break;
    case Neighborhood::Kind::Sensitivity: {
      if (nbh.sensitive_features.empty()) {
        throw std::invalid_argument("neighborhood: no sensitive feature given");
      }
      for (const double v : nbh.center) box.push_back(Interval::point(v));
      for (const int f : nbh.sensitive_features) {
        if (f < 0 || f >= static_cast<int>(d)) {
          throw std::invalid_argument("neighborhood: sensitive feature index out of range");
        }
        box[static_cast<std::size_t>(f)] = Interval(0.0, 1.0);
      }
      break;
    }
  }
  return box;
}

Verdict decide_ldcp(const IntervalHyperNetwork& hyper, const Neighborhood& nbh,
                    long node_budget) {
  const auto start = Clock::now();
  const std::vector<Interval> box = neighborhood_box(nbh);
  const auto bounds = propagate_bounds(hyper, box);
  const Interval out = bounds.back().front();
  const int y = nbh.expected_label;

  Verdict v;
  // Bound-only certification: the whole output interval is on the right side.
  const double interval_objective = y > 0 ? out.lo : -out.hi;
  if (certified_robust(interval_objective, y)) {
    v.decision = Decision::Ldcp;
    v.objective_bound = interval_objective;
    v.wall_time_ms = ms_since(start);
    return v;
  }

  const RobustnessEncoding enc = encode_hyper_robustness(hyper, box, y, bounds);
  const MilpSolution sol = solve_milp(enc.model, node_budget);
  switch (sol.status) {
    case SolveStatus::Optimal:
      v.decision = certified_robust(sol.objective, y) ? Decision::Ldcp : Decision::NotLdcp;
      v.objective_bound = sol.objective;
      break;
    case SolveStatus::BudgetExceeded:
      v.decision = Decision::NotLdcp;  // conservative
      v.objective_bound = sol.best_bound;
      v.budget_exceeded = true;
      break;
    case SolveStatus::Infeasible:
    case SolveStatus::Unbounded:
      throw std::runtime_error("decide_ldcp: robustness model must be feasible and bounded");
  }
  v.wall_time_ms = ms_since(start);
  return v;
}

NaiveResult naive_ldcp(const MlpNetwork& network, const EncodedDataset& data,
                       const std::function<const MlpNetwork&(long)>& loo_trainer,
                       const Neighborhood& nbh, long node_budget, unsigned threads) {
  const auto start = Clock::now();
  const std::size_t n = data.size();
  NaiveResult result;
  result.per_network.resize(n + 1);

  parallel_for(
      n + 1,
      [&](std::size_t i) {
        const MlpNetwork& net = i == 0 ? network : loo_trainer(static_cast<long>(i - 1));
        result.per_network[i] = decide_ldcp(IntervalHyperNetwork::point(net), nbh, node_budget);
      },
      threads);

  result.verdict.decision = Decision::Ldcp;
  result.verdict.objective_bound = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < result.per_network.size(); ++i) {
    const Verdict& v = result.per_network[i];
    if (v.decision == Decision::NotLdcp) {
      result.verdict.decision = Decision::NotLdcp;
      result.violating.push_back(i);
    }
    result.verdict.objective_bound = std::min(result.verdict.objective_bound, v.objective_bound);
    result.verdict.budget_exceeded |= v.budget_exceeded;
  }
  result.verdict.wall_time_ms = ms_since(start);
  return result;
}

ConfusionMatrix confusion(std::span<const Decision> predicted,
                          std::span<const Decision> ground_truth) {
  if (predicted.size() != ground_truth.size()) {
    throw std::invalid_argument("confusion: verdict lists differ in length");
  }
  ConfusionMatrix m;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] == Decision::Ldcp;
    const bool g = ground_truth[i] == Decision::Ldcp;
    if (p && g) ++m.tp;
    else if (!p && !g) ++m.tn;
    else if (p && !g) ++m.fp;
    else ++m.fn;
  }
  return m;
}

CoverageMetrics coverage_metrics(const IntervalHyperNetwork& predicted,
                                 const IntervalHyperNetwork& optimal,
                                 std::span<const MlpNetwork> all_nets) {
  if (!(predicted.architecture == optimal.architecture)) {
    throw std::invalid_argument("coverage_metrics: architecture mismatch");
  }
  const std::size_t total = predicted.param_count();
  CoverageMetrics metrics;

  std::size_t covering = 0;
  double miscoverage_sum = 0.0;
  double log_overcoverage_sum = 0.0;
  std::size_t overcoverage_count = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const Interval p = predicted.param(i);
    const Interval o = optimal.param(i);
    if (p.contains(o)) ++covering;

    const double missing = o.width() - meet_size(p, o);  // |optimal \ predicted|
    if (p.width() > 0.0) {
      miscoverage_sum += missing / p.width();
    } else if (missing > 0.0) {
      miscoverage_sum += std::numeric_limits<double>::infinity();
    }

    if (o.width() > 0.0) {
      log_overcoverage_sum += std::log(join_size(p, o) / o.width());
      ++overcoverage_count;
    } else {
      ++metrics.overcoverage_excluded;
    }
  }
  metrics.weight_abstraction_rate = 100.0 * static_cast<double>(covering) / static_cast<double>(total);
  metrics.miscoverage = miscoverage_sum / static_cast<double>(total);
  metrics.overcoverage = overcoverage_count == 0
                             ? 1.0
                             : std::exp(log_overcoverage_sum / static_cast<double>(overcoverage_count));

  std::size_t abstracted = 0;
  for (const MlpNetwork& net : all_nets) {
    if (abstracts(predicted, net)) ++abstracted;
  }
  metrics.network_abstraction_rate =
      all_nets.empty() ? 0.0
                       : 100.0 * static_cast<double>(abstracted) / static_cast<double>(all_nets.size());
  return metrics;
}

}  // namespace ldcp
