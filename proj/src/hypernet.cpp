#include "ldcp/hypernet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ldcp/parallel.hpp"
#include "ldcp/predint.hpp"
#include "ldcp/rng.hpp"

namespace ldcp {
namespace {

void check_same_architecture(const MlpArchitecture& a, const MlpArchitecture& b,
                             const char* what) {
  if (!(a == b)) throw std::invalid_argument(std::string(what) + ": architecture mismatch");
}

void check_box(const IntervalHyperNetwork& hyper, std::span<const Interval> box,
               bool require_unit_range) {
  if (static_cast<int>(box.size()) != hyper.architecture.input_dim()) {
    throw std::invalid_argument("propagate_bounds: box dimension mismatch");
  }
  for (const Interval& iv : box) {
    if (!iv.finite()) throw std::invalid_argument("propagate_bounds: non-finite input bound");
    if (require_unit_range && (iv.lo < 0.0 || iv.hi > 1.0)) {
      throw std::invalid_argument("propagate_bounds: input box outside [0,1]");
    }
  }
}

}  // namespace

IntervalHyperNetwork IntervalHyperNetwork::point(const MlpNetwork& net) {
  IntervalHyperNetwork hyper;
  hyper.architecture = net.architecture;
  hyper.weight_intervals.reserve(net.weights.size());
  hyper.bias_intervals.reserve(net.biases.size());
  for (const auto& layer : net.weights) {
    std::vector<Interval> row;
    row.reserve(layer.size());
    for (const double w : layer) row.push_back(Interval::point(w));
    hyper.weight_intervals.push_back(std::move(row));
  }
  for (const auto& layer : net.biases) {
    std::vector<Interval> row;
    row.reserve(layer.size());
    for (const double b : layer) row.push_back(Interval::point(b));
    hyper.bias_intervals.push_back(std::move(row));
  }
  return hyper;
}

Interval IntervalHyperNetwork::param(std::size_t flat_index) const {
  std::size_t idx = flat_index;
  for (std::size_t m = 0; m < weight_intervals.size(); ++m) {
    if (idx < weight_intervals[m].size()) return weight_intervals[m][idx];
    idx -= weight_intervals[m].size();
    if (idx < bias_intervals[m].size()) return bias_intervals[m][idx];
    idx -= bias_intervals[m].size();
  }
  throw std::out_of_range("hyper-network param index out of range");
}

void IntervalHyperNetwork::set_param(std::size_t flat_index, const Interval& value) {
  std::size_t idx = flat_index;
  for (std::size_t m = 0; m < weight_intervals.size(); ++m) {
    if (idx < weight_intervals[m].size()) {
      weight_intervals[m][idx] = value;
      return;
    }
    idx -= weight_intervals[m].size();
    if (idx < bias_intervals[m].size()) {
      bias_intervals[m][idx] = value;
      return;
    }
    idx -= bias_intervals[m].size();
  }
  throw std::out_of_range("hyper-network param index out of range");
}

void HyperNetConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("hyper config: alpha in (0,1)");
  if (networks_per_iteration <= 0) throw std::invalid_argument("hyper config: k must be positive");
  if (!(converged_fraction > 0.0 && converged_fraction <= 1.0)) {
    throw std::invalid_argument("hyper config: M must be in (0,1]");
  }
  if (!(distance_threshold >= 0.0 && distance_threshold < 1.0)) {
    throw std::invalid_argument("hyper config: R must be in [0,1)");
  }
}

IntervalHyperNetwork interval_abstraction(std::span<const MlpNetwork> nets) {
  if (nets.empty()) throw std::invalid_argument("interval_abstraction: no networks");
  for (const MlpNetwork& net : nets) {
    check_same_architecture(net.architecture, nets.front().architecture, "interval_abstraction");
  }
  IntervalHyperNetwork hyper = IntervalHyperNetwork::point(nets.front());
  for (std::size_t i = 1; i < nets.size(); ++i) {
    const MlpNetwork& net = nets[i];
    for (std::size_t m = 0; m < hyper.weight_intervals.size(); ++m) {
      for (std::size_t j = 0; j < hyper.weight_intervals[m].size(); ++j) {
        hyper.weight_intervals[m][j].expand(net.weights[m][j]);
      }
      for (std::size_t j = 0; j < hyper.bias_intervals[m].size(); ++j) {
        hyper.bias_intervals[m][j].expand(net.biases[m][j]);
      }
    }
  }
  return hyper;
}

bool stopping_condition(const IntervalHyperNetwork* prev, const IntervalHyperNetwork& curr,
                        double distance_threshold, double converged_fraction) {
  if (prev == nullptr) return false;
  check_same_architecture(prev->architecture, curr.architecture, "stopping_condition");
  const std::size_t total = curr.param_count();
  std::size_t settled = 0;
  for (std::size_t i = 0; i < total; ++i) {
    if (1.0 - jaccard(curr.param(i), prev->param(i)) <= distance_threshold) ++settled;
  }
  return static_cast<double>(settled) >= converged_fraction * static_cast<double>(total);
}

PredictedHyperNet pred_hyper_net(const MlpNetwork& network, const EncodedDataset& data,
                                 const std::function<MlpNetwork(std::size_t)>& loo_trainer,
                                 const HyperNetConfig& cfg, unsigned threads) {
  cfg.validate();
  const std::size_t n = data.size();
  if (n < static_cast<std::size_t>(cfg.networks_per_iteration)) {
    throw std::invalid_argument("pred_hyper_net: k exceeds dataset size");
  }
  const std::size_t max_networks = cfg.max_networks == 0 ? n + 1 : cfg.max_networks;
  const std::size_t total_params = network.param_count();
  const double alpha_prime = cfg.alpha / static_cast<double>(total_params);

  PredictedHyperNet result;
  std::vector<MlpNetwork> nets{network};
  std::optional<IntervalHyperNetwork> prev;
  result.hyper = IntervalHyperNetwork::point(network);

  Rng rng(cfg.sample_seed);
  std::vector<std::size_t> unused(n);
  std::iota(unused.begin(), unused.end(), std::size_t{0});

  for (;;) {
    if (prev.has_value()) {
      std::size_t settled = 0;
      for (std::size_t i = 0; i < total_params; ++i) {
        if (1.0 - jaccard(result.hyper.param(i), prev->param(i)) <= cfg.distance_threshold)
          ++settled;
      }
      result.converged_fraction_log.push_back(static_cast<double>(settled) /
                                              static_cast<double>(total_params));
      if (static_cast<double>(settled) >=
          cfg.converged_fraction * static_cast<double>(total_params)) {
        break;
      }
    }
    if (unused.empty() || nets.size() >= max_networks) {
      result.truncated = true;
      break;
    }
    prev = result.hyper;

    const std::size_t batch =
        std::min({static_cast<std::size_t>(cfg.networks_per_iteration), unused.size(),
                  max_networks - nets.size()});
    std::vector<std::size_t> picked;
    picked.reserve(batch);
    for (std::size_t t = 0; t < batch; ++t) {
      const std::size_t pos = static_cast<std::size_t>(rng.below(unused.size()));
      picked.push_back(unused[pos]);
      unused[pos] = unused.back();
      unused.pop_back();
    }
    const std::size_t first_new = nets.size();
    nets.resize(nets.size() + batch, MlpNetwork{});
    parallel_for(
        batch,
        [&](std::size_t t) {
          MlpNetwork trained = loo_trainer(picked[t]);
          check_same_architecture(trained.architecture, network.architecture, "pred_hyper_net");
          nets[first_new + t] = std::move(trained);
        },
        threads);
    result.entry_indices.insert(result.entry_indices.end(), picked.begin(), picked.end());

    parallel_for(
        total_params,
        [&](std::size_t i) {
          std::vector<double> values;
          values.reserve(nets.size());
          for (const MlpNetwork& net : nets) values.push_back(net.param(i));
          result.hyper.set_param(i, pred_int(values, alpha_prime));
        },
        threads);
  }

  result.trained_count = nets.size();
  return result;
}

bool abstracts(const IntervalHyperNetwork& hyper, const MlpNetwork& net) {
  check_same_architecture(hyper.architecture, net.architecture, "abstracts");
  for (std::size_t m = 0; m < hyper.weight_intervals.size(); ++m) {
    for (std::size_t j = 0; j < hyper.weight_intervals[m].size(); ++j) {
      if (!hyper.weight_intervals[m][j].contains(net.weights[m][j])) return false;
    }
    for (std::size_t j = 0; j < hyper.bias_intervals[m].size(); ++j) {
      if (!hyper.bias_intervals[m][j].contains(net.biases[m][j])) return false;
    }
  }
  return true;
}

std::vector<std::vector<Interval>> propagate_bounds(const IntervalHyperNetwork& hyper,
                                                    std::span<const Interval> input_box) {
  check_box(hyper, input_box, /*require_unit_range=*/true);
  const auto& sizes = hyper.architecture.layer_sizes;
  std::vector<std::vector<Interval>> pre(hyper.architecture.num_layers());
  std::vector<Interval> act(input_box.begin(), input_box.end());

  for (std::size_t m = 0; m < pre.size(); ++m) {
    const int out = sizes[m + 1];
    const int in = sizes[m];
    pre[m].resize(static_cast<std::size_t>(out));
    for (int k = 0; k < out; ++k) {
      const Interval& b = hyper.bias_intervals[m][static_cast<std::size_t>(k)];
      double lo = b.lo;
      double hi = b.hi;
      for (int j = 0; j < in; ++j) {
        const Interval& w =
            hyper.weight_intervals[m][static_cast<std::size_t>(k) * static_cast<std::size_t>(in) +
                                      static_cast<std::size_t>(j)];
        const Interval& x = act[static_cast<std::size_t>(j)];
        // x is non-negative here, so the product interval needs two cases.
        lo += w.lo >= 0.0 ? w.lo * x.lo : w.lo * x.hi;
        hi += w.hi >= 0.0 ? w.hi * x.hi : w.hi * x.lo;
      }
      pre[m][static_cast<std::size_t>(k)] = Interval(lo, hi);
    }
    if (m + 1 < pre.size()) {
      act.resize(static_cast<std::size_t>(out));
      for (int k = 0; k < out; ++k) {
        const Interval& p = pre[m][static_cast<std::size_t>(k)];
        act[static_cast<std::size_t>(k)] = Interval(std::max(0.0, p.lo), std::max(0.0, p.hi));
      }
    }
  }
  return pre;
}

std::vector<std::vector<Interval>> propagate_bounds_penalized(
    const IntervalHyperNetwork& hyper, std::span<const Interval> input_box) {
  check_box(hyper, input_box, /*require_unit_range=*/false);
  const auto& sizes = hyper.architecture.layer_sizes;
  std::vector<std::vector<Interval>> pre(hyper.architecture.num_layers());
  std::vector<Interval> act(input_box.begin(), input_box.end());

  for (std::size_t m = 0; m < pre.size(); ++m) {
    const int out = sizes[m + 1];
    const int in = sizes[m];
    pre[m].resize(static_cast<std::size_t>(out));
    for (int k = 0; k < out; ++k) {
      const Interval& b = hyper.bias_intervals[m][static_cast<std::size_t>(k)];
      double lo = b.lo;
      double hi = b.hi;
      double penalty = 0.0;
      for (int j = 0; j < in; ++j) {
        const Interval& w =
            hyper.weight_intervals[m][static_cast<std::size_t>(k) * static_cast<std::size_t>(in) +
                                      static_cast<std::size_t>(j)];
        const Interval& x = act[static_cast<std::size_t>(j)];
        lo += std::min(w.lo * x.lo, w.lo * x.hi);
        hi += std::max(w.hi * x.lo, w.hi * x.hi);
        penalty += (w.hi - w.lo) * std::max(0.0, -x.lo);
      }
      pre[m][static_cast<std::size_t>(k)] = Interval(lo - penalty, hi + penalty);
    }
    if (m + 1 < pre.size()) {
      act.resize(static_cast<std::size_t>(out));
      for (int k = 0; k < out; ++k) {
        const Interval& p = pre[m][static_cast<std::size_t>(k)];
        act[static_cast<std::size_t>(k)] = Interval(std::max(0.0, p.lo), std::max(0.0, p.hi));
      }
    }
  }
  return pre;
}

}  // namespace ldcp
