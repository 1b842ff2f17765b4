#include "ldcp/predint.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace ldcp {
namespace {

// log((1/K) sum e^{v_i}) computed via the log-sum-exp trick.
double log_mean_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (const double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (const double x : v) acc += std::exp(x - m);
  return m + std::log(acc / static_cast<double>(v.size()));
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 2.0)) {
    throw std::invalid_argument("yeo-johnson: lambda must lie in [0, 2]");
  }
}

double golden_section_max(const std::function<double(double)>& f, double a, double b) {
  // Maximizes f on [a, b]; tolerance well below the 1e-6 optimality contract.
  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  while (b - a > 1e-10) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

double median(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t k = sorted.size();
  return k % 2 == 1 ? sorted[k / 2] : 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]);
}

std::pair<std::vector<double>, NormalizationParams> normalize(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("normalize: need at least 2 values");
  NormalizationParams p;
  p.mu = median(values);
  double moment = 0.0;
  for (const double v : values) moment += std::abs(v - p.mu);
  moment /= static_cast<double>(values.size());
  if (moment > 0.0) {
    p.delta = moment;
  } else {
    p.delta = 1.0;
    p.constant_sample = true;
  }
  std::vector<double> z(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) z[i] = (values[i] - p.mu) / p.delta;
  return {std::move(z), p};
}

double inverse_normalize(double z, const NormalizationParams& p) { return p.mu + p.delta * z; }

double yeo_johnson(double z, double lambda) {
  check_lambda(lambda);
  if (z >= 0.0) {
    if (lambda == 0.0) return std::log1p(z);
    return std::expm1(lambda * std::log1p(z)) / lambda;
  }
  const double two_minus = 2.0 - lambda;
  if (two_minus == 0.0) return -std::log1p(-z);
  return -std::expm1(two_minus * std::log1p(-z)) / two_minus;
}

double yeo_johnson_inverse(double y, double lambda) {
  check_lambda(lambda);
  if (y >= 0.0) {
    if (lambda == 0.0) return std::expm1(y);
    return std::expm1(std::log1p(lambda * y) / lambda);
  }
  const double two_minus = 2.0 - lambda;
  if (two_minus == 0.0) return -std::expm1(-y);
  return -std::expm1(std::log1p(-two_minus * y) / two_minus);
}

double yeo_johnson_log_likelihood(std::span<const double> z, double lambda) {
  check_lambda(lambda);
  const std::size_t k = z.size();
  double mean = 0.0;
  std::vector<double> y(k);
  for (std::size_t i = 0; i < k; ++i) {
    y[i] = yeo_johnson(z[i], lambda);
    mean += y[i];
  }
  mean /= static_cast<double>(k);
  double var = 0.0;
  for (const double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(k);
  double log_jacobian = 0.0;
  for (const double v : z) {
    const double s = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    log_jacobian += (lambda - 1.0) * s * std::log1p(std::abs(v));
  }
  if (var <= 0.0) return std::numeric_limits<double>::infinity();  // degenerate, any lambda fits
  return -0.5 * static_cast<double>(k) * std::log(var) + log_jacobian;
}

TransformParams fit_lambda(std::span<const double> z) {
  if (z.size() < 2) throw std::invalid_argument("fit_lambda: need at least 2 values");
  auto objective = [&](double lambda) { return yeo_johnson_log_likelihood(z, lambda); };

  constexpr int kGridPoints = 21;
  double best_lambda = 1.0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGridPoints; ++i) {
    const double lambda = 2.0 * static_cast<double>(i) / (kGridPoints - 1);
    const double value = objective(lambda);
    if (value > best_value) {
      best_value = value;
      best_lambda = lambda;
    }
  }
  if (std::isinf(best_value)) return {best_lambda};  // constant transformed sample

  const double cell = 2.0 / (kGridPoints - 1);
  const double lo = std::max(0.0, best_lambda - cell);
  const double hi = std::min(2.0, best_lambda + cell);
  const double refined = golden_section_max(objective, lo, hi);
  return {objective(refined) >= best_value ? refined : best_lambda};
}

KdeModel make_kde(std::span<const double> transformed) {
  if (transformed.empty()) throw std::invalid_argument("kde: empty sample");
  KdeModel model;
  model.points.assign(transformed.begin(), transformed.end());
  const double center = median(transformed);
  double moment = 0.0;
  for (const double y : model.points) moment += std::abs(y - center);
  model.bandwidth = moment / static_cast<double>(model.points.size());
  return model;
}

double kde_cdf(const KdeModel& model, double v) {
  if (model.points.empty() || !(model.bandwidth > 0.0)) {
    throw std::invalid_argument("kde_cdf: invalid model");
  }
  const double h = model.bandwidth;
  double acc = 0.0;
  for (const double y : model.points) {
    const double t = (v - y) / h;
    acc += t <= 0.0 ? 0.5 * std::exp(t) : 1.0 - 0.5 * std::exp(-t);
  }
  return acc / static_cast<double>(model.points.size());
}

double kde_quantile_numeric(const KdeModel& model, double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("kde quantile: q must be in (0,1)");
  const auto [min_it, max_it] = std::minmax_element(model.points.begin(), model.points.end());
  const double h = model.bandwidth;
  const double reach = h * (std::log(1.0 / std::min(q, 1.0 - q)) +
                            std::log(static_cast<double>(model.points.size())) + 2.0);
  double lo = *min_it - reach;
  double hi = *max_it + reach;
  while (kde_cdf(model, lo) > q) lo -= h + (hi - lo);
  while (kde_cdf(model, hi) < q) hi += h + (hi - lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(mid))) break;
    if (kde_cdf(model, mid) < q) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

Interval confidence_interval(const KdeModel& model, double alpha_prime) {
  if (!(alpha_prime > 0.0 && alpha_prime < 1.0)) {
    throw std::invalid_argument("confidence_interval: alpha' must be in (0,1)");
  }
  if (model.points.empty() || !(model.bandwidth > 0.0)) {
    throw std::invalid_argument("confidence_interval: invalid model");
  }
  const double h = model.bandwidth;
  const auto [min_it, max_it] = std::minmax_element(model.points.begin(), model.points.end());
  const double log_inv_alpha = std::log(1.0 / alpha_prime);

  std::vector<double> scaled(model.points.size());
  for (std::size_t i = 0; i < model.points.size(); ++i) scaled[i] = -model.points[i] / h;
  double lower = -h * log_mean_exp(scaled) - h * log_inv_alpha;
  for (std::size_t i = 0; i < model.points.size(); ++i) scaled[i] = model.points[i] / h;
  double upper = h * log_mean_exp(scaled) + h * log_inv_alpha;

  // The closed form solves the pure-exponential tail equation; it is exact
  // only beyond the sample range.
  if (!(lower <= *min_it)) lower = kde_quantile_numeric(model, alpha_prime / 2.0);
  if (!(upper >= *max_it)) upper = kde_quantile_numeric(model, 1.0 - alpha_prime / 2.0);
  return Interval(lower, upper);
}

Interval pred_int(std::span<const double> values, double alpha_prime) {
  if (values.size() < 2) throw std::invalid_argument("pred_int: need at least 2 values");
  if (!(alpha_prime > 0.0 && alpha_prime < 1.0)) {
    throw std::invalid_argument("pred_int: alpha' must be in (0,1)");
  }
  auto [z, norm] = normalize(values);
  if (norm.constant_sample) {
    const double c = norm.mu;
    const double eps = std::max(1e-12, 1e-9 * std::abs(c));
    return Interval(c - eps, c + eps);
  }
  const TransformParams t = fit_lambda(z);
  std::vector<double> y(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) y[i] = yeo_johnson(z[i], t.lambda);
  const KdeModel model = make_kde(y);
  if (!(model.bandwidth > 0.0)) {
    const double c = norm.mu;
    const double eps = std::max(1e-12, 1e-9 * std::abs(c));
    return Interval(c - eps, c + eps);
  }
  const Interval ci = confidence_interval(model, alpha_prime);
  const double lo = inverse_normalize(yeo_johnson_inverse(ci.lo, t.lambda), norm);
  const double hi = inverse_normalize(yeo_johnson_inverse(ci.hi, t.lambda), norm);
  return Interval(lo, hi);
}

}  // namespace ldcp
