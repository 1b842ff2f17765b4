#include "ldcp/mlp.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ldcp/parallel.hpp"
#include "ldcp/rng.hpp"

namespace ldcp {
namespace {

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

// log(1 + e^s) without overflow.
double softplus(double s) { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

struct ForwardTrace {
  std::vector<std::vector<double>> pre;   // per affine layer
  std::vector<std::vector<double>> post;  // post[0] = input copy
};

double forward_traced(const MlpNetwork& net, std::span<const double> x, ForwardTrace* trace) {
  const auto& sizes = net.architecture.layer_sizes;
  if (static_cast<int>(x.size()) != sizes.front()) {
    throw std::invalid_argument("forward: input has size " + std::to_string(x.size()) +
                                ", layer 1 expects " + std::to_string(sizes.front()));
  }
  std::vector<double> cur(x.begin(), x.end());
  if (trace) trace->post.push_back(cur);
  const std::size_t layers = net.architecture.num_layers();
  for (std::size_t m = 0; m < layers; ++m) {
    const int out = sizes[m + 1];
    const int in = sizes[m];
    std::vector<double> nxt(static_cast<std::size_t>(out));
    const auto& w = net.weights[m];
    const auto& b = net.biases[m];
    for (int k = 0; k < out; ++k) {
      double acc = b[static_cast<std::size_t>(k)];
      const double* row = &w[static_cast<std::size_t>(k) * static_cast<std::size_t>(in)];
      for (int j = 0; j < in; ++j) acc += row[j] * cur[static_cast<std::size_t>(j)];
      nxt[static_cast<std::size_t>(k)] = acc;
    }
    if (trace) trace->pre.push_back(nxt);
    if (m + 1 < layers) {
      for (auto& v : nxt) v = std::max(0.0, v);
    }
    cur = std::move(nxt);
    if (trace && m + 1 < layers) trace->post.push_back(cur);
  }
  return cur[0];
}

// Accumulates the batch-mean BCE gradient into grad (flat layout); returns the
// batch-mean BCE loss. L1 handled by the caller.
double accumulate_bce(const MlpNetwork& net, std::span<const std::vector<double>> inputs,
                      std::span<const int> labels, std::vector<double>& grad) {
  const auto& sizes = net.architecture.layer_sizes;
  const std::size_t layers = net.architecture.num_layers();
  const double inv_n = 1.0 / static_cast<double>(inputs.size());
  double loss = 0.0;

  for (std::size_t s = 0; s < inputs.size(); ++s) {
    ForwardTrace trace;
    const double score = forward_traced(net, inputs[s], &trace);
    const double target = labels[s] > 0 ? 1.0 : 0.0;
    loss += (softplus(score) - target * score) * inv_n;

    // delta over the pre-activations, walked backwards.
    std::vector<double> delta{(sigmoid(score) - target) * inv_n};
    std::size_t offset = net.param_count();
    for (std::size_t m = layers; m-- > 0;) {
      const int out = sizes[m + 1];
      const int in = sizes[m];
      const std::size_t wcount = static_cast<std::size_t>(out) * static_cast<std::size_t>(in);
      offset -= wcount + static_cast<std::size_t>(out);
      const auto& act = trace.post[m];
      for (int k = 0; k < out; ++k) {
        const double dk = delta[static_cast<std::size_t>(k)];
        if (dk == 0.0) continue;
        double* wgrad = &grad[offset + static_cast<std::size_t>(k) * static_cast<std::size_t>(in)];
        for (int j = 0; j < in; ++j) wgrad[j] += dk * act[static_cast<std::size_t>(j)];
        grad[offset + wcount + static_cast<std::size_t>(k)] += dk;
      }
      if (m == 0) break;
      std::vector<double> prev(static_cast<std::size_t>(in), 0.0);
      const auto& w = net.weights[m];
      const auto& pre = trace.pre[m - 1];
      for (int j = 0; j < in; ++j) {
        if (pre[static_cast<std::size_t>(j)] <= 0.0) continue;  // ReLU subgradient 0 at 0
        double acc = 0.0;
        for (int k = 0; k < out; ++k) {
          acc += w[static_cast<std::size_t>(k) * static_cast<std::size_t>(in) +
                   static_cast<std::size_t>(j)] *
                 delta[static_cast<std::size_t>(k)];
        }
        prev[static_cast<std::size_t>(j)] = acc;
      }
      delta = std::move(prev);
    }
  }
  return loss;
}

}  // namespace

void MlpArchitecture::validate() const {
  if (layer_sizes.size() < 3) {
    throw std::invalid_argument("architecture: need input, at least one hidden layer, output");
  }
  for (const int s : layer_sizes) {
    if (s <= 0) throw std::invalid_argument("architecture: layer sizes must be positive");
  }
  if (layer_sizes.back() != 1) {
    throw std::invalid_argument("architecture: binary classifier output size must be 1");
  }
}

std::size_t MlpArchitecture::param_count() const {
  std::size_t total = 0;
  for (std::size_t m = 1; m < layer_sizes.size(); ++m) {
    total += static_cast<std::size_t>(layer_sizes[m]) *
                 static_cast<std::size_t>(layer_sizes[m - 1]) +
             static_cast<std::size_t>(layer_sizes[m]);
  }
  return total;
}

MlpNetwork MlpNetwork::zeros(const MlpArchitecture& arch) {
  arch.validate();
  MlpNetwork net;
  net.architecture = arch;
  for (std::size_t m = 1; m < arch.layer_sizes.size(); ++m) {
    const auto out = static_cast<std::size_t>(arch.layer_sizes[m]);
    const auto in = static_cast<std::size_t>(arch.layer_sizes[m - 1]);
    net.weights.emplace_back(out * in, 0.0);
    net.biases.emplace_back(out, 0.0);
  }
  return net;
}

double MlpNetwork::forward(std::span<const double> x) const {
  return forward_traced(*this, x, nullptr);
}

int MlpNetwork::classify(std::span<const double> x) const {
  return forward(x) >= 0.0 ? +1 : -1;
}

double MlpNetwork::param(std::size_t flat_index) const {
  std::size_t idx = flat_index;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    if (idx < weights[m].size()) return weights[m][idx];
    idx -= weights[m].size();
    if (idx < biases[m].size()) return biases[m][idx];
    idx -= biases[m].size();
  }
  throw std::out_of_range("param index out of range");
}

void MlpNetwork::set_param(std::size_t flat_index, double value) {
  std::size_t idx = flat_index;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    if (idx < weights[m].size()) {
      weights[m][idx] = value;
      return;
    }
    idx -= weights[m].size();
    if (idx < biases[m].size()) {
      biases[m][idx] = value;
      return;
    }
    idx -= biases[m].size();
  }
  throw std::out_of_range("param index out of range");
}

std::vector<double> MlpNetwork::flat_params() const {
  std::vector<double> flat;
  flat.reserve(param_count());
  for (std::size_t m = 0; m < weights.size(); ++m) {
    flat.insert(flat.end(), weights[m].begin(), weights[m].end());
    flat.insert(flat.end(), biases[m].begin(), biases[m].end());
  }
  return flat;
}

void MlpNetwork::set_flat_params(std::span<const double> params) {
  if (params.size() != param_count()) throw std::invalid_argument("flat parameter size mismatch");
  std::size_t idx = 0;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    for (auto& w : weights[m]) w = params[idx++];
    for (auto& b : biases[m]) b = params[idx++];
  }
}

void TrainConfig::validate() const {
  if (epochs <= 0) throw std::invalid_argument("train config: epochs must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning rate must be positive");
  if (batch_size <= 0) throw std::invalid_argument("train config: batch size must be positive");
  if (l1_coefficient < 0.0) throw std::invalid_argument("train config: l1 coefficient must be >= 0");
}

MlpNetwork train(const MlpArchitecture& arch, const EncodedDataset& data, const TrainConfig& cfg) {
  return train_loo(arch, data, -1, cfg);
}

MlpNetwork train_loo(const MlpArchitecture& arch, const LooView& view, const TrainConfig& cfg) {
  return train_loo(arch, *view.base, static_cast<long>(view.omitted_index), cfg);
}

MlpNetwork train_loo(const MlpArchitecture& arch, const EncodedDataset& data, long omitted,
                     const TrainConfig& cfg) {
  arch.validate();
  cfg.validate();
  const std::size_t n = data.size();
  if (n == 0 || (omitted >= 0 && n == 1)) throw std::invalid_argument("train: empty dataset");
  if (omitted >= static_cast<long>(n)) throw std::invalid_argument("train: omitted index out of range");
  if (data.dim() != arch.input_dim()) {
    throw std::invalid_argument("train: dataset dim " + std::to_string(data.dim()) +
                                " does not match input dim " + std::to_string(arch.input_dim()));
  }
  for (const int y : data.labels) {
    if (y != 1 && y != -1) throw std::invalid_argument("train: labels must be -1 or +1");
  }

  Rng rng(cfg.seed);
  MlpNetwork net = MlpNetwork::zeros(arch);
  for (std::size_t m = 0; m < net.weights.size(); ++m) {
    const double bound = std::sqrt(6.0 / static_cast<double>(arch.layer_sizes[m]));
    for (auto& w : net.weights[m]) w = rng.uniform(-bound, bound);
  }

  const std::size_t param_count = net.param_count();
  std::vector<double> grad(param_count, 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::vector<double>> batch_x;
  std::vector<int> batch_y;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    std::size_t pos = 0;
    while (pos < n) {
      batch_x.clear();
      batch_y.clear();
      while (pos < n && batch_x.size() < static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t idx = order[pos++];
        if (static_cast<long>(idx) == omitted) continue;
        batch_x.push_back(data.inputs[idx]);
        batch_y.push_back(data.labels[idx]);
      }
      if (batch_x.empty()) break;  // the omitted entry was the only one left

      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = accumulate_bce(net, batch_x, batch_y, grad);

      std::size_t flat = 0;
      double l1_sum = 0.0;
      for (std::size_t m = 0; m < net.weights.size(); ++m) {
        for (auto& w : net.weights[m]) {
          l1_sum += std::abs(w);
          w -= cfg.learning_rate * (grad[flat++] + cfg.l1_coefficient * sign_of(w));
        }
        for (auto& b : net.biases[m]) {
          l1_sum += std::abs(b);
          b -= cfg.learning_rate * (grad[flat++] + cfg.l1_coefficient * sign_of(b));
        }
      }
      loss += cfg.l1_coefficient * l1_sum;
      if (!std::isfinite(loss)) {
        throw std::runtime_error("train: non-finite loss in epoch " + std::to_string(epoch));
      }
    }
  }
  return net;
}

double batch_loss(const MlpNetwork& net, std::span<const std::vector<double>> inputs,
                  std::span<const int> labels, double l1) {
  if (inputs.empty() || inputs.size() != labels.size()) {
    throw std::invalid_argument("batch_loss: bad batch");
  }
  const double inv_n = 1.0 / static_cast<double>(inputs.size());
  double loss = 0.0;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    const double score = net.forward(inputs[s]);
    const double target = labels[s] > 0 ? 1.0 : 0.0;
    loss += (softplus(score) - target * score) * inv_n;
  }
  for (const double p : net.flat_params()) loss += l1 * std::abs(p);
  return loss;
}

std::vector<double> batch_loss_gradient(const MlpNetwork& net,
                                        std::span<const std::vector<double>> inputs,
                                        std::span<const int> labels, double l1) {
  if (inputs.empty() || inputs.size() != labels.size()) {
    throw std::invalid_argument("batch_loss_gradient: bad batch");
  }
  std::vector<double> grad(net.param_count(), 0.0);
  accumulate_bce(net, inputs, labels, grad);
  const std::vector<double> params = net.flat_params();
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += l1 * sign_of(params[i]);
  return grad;
}

double accuracy(const MlpNetwork& net, const EncodedDataset& data) {
  if (data.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (net.classify(data.inputs[i]) == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

LooTrainerCache::LooTrainerCache(MlpArchitecture arch, const EncodedDataset& data, TrainConfig cfg)
    : arch_(std::move(arch)), data_(&data), cfg_(cfg) {
  cache_.resize(data.size() + 1);
  locks_.resize(data.size() + 1);
  for (auto& l : locks_) l = std::make_unique<std::mutex>();
}

const MlpNetwork& LooTrainerCache::slot(std::size_t idx) const {
  std::lock_guard<std::mutex> lock(*locks_[idx]);
  if (!cache_[idx]) {
    cache_[idx] = train_loo(arch_, *data_, static_cast<long>(idx) - 1, cfg_);
  }
  return *cache_[idx];
}

const MlpNetwork& LooTrainerCache::full() const { return slot(0); }

const MlpNetwork& LooTrainerCache::operator()(std::size_t omitted) const {
  if (omitted >= data_->size()) throw std::invalid_argument("loo trainer: index out of range");
  return slot(omitted + 1);
}

void LooTrainerCache::pretrain_all(unsigned threads) const {
  parallel_for(cache_.size(), [&](std::size_t i) { slot(i); }, threads);
}

std::size_t LooTrainerCache::trained_count() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < cache_.size(); ++i) {
    std::lock_guard<std::mutex> lock(*locks_[i]);
    if (cache_[i]) ++count;
  }
  return count;
}

}  // namespace ldcp
