#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ldcp/interval.hpp"

namespace ldcp {

/// z = (w - mu) / delta with mu the sample median and delta the centered
/// absolute first moment (1/K) * sum |w_i - mu|.
struct NormalizationParams {
  double mu = 0.0;
  double delta = 1.0;
  bool constant_sample = false;  // delta fell back to 1 because all values equal
};

struct TransformParams {
  double lambda = 1.0;
};

/// Laplace-kernel density estimate over transformed samples.
/// bandwidth = (1/K) * sum |y_i - median(y)|.
struct KdeModel {
  std::vector<double> points;
  double bandwidth = 0.0;
};

/// Median with the even-count convention: midpoint of the two central order
/// statistics.
double median(std::span<const double> values);

std::pair<std::vector<double>, NormalizationParams> normalize(std::span<const double> values);
double inverse_normalize(double z, const NormalizationParams& p);

/// Piecewise power transform, strictly increasing, T(0) = 0.
/// Requires lambda in [0, 2] so the image is unbounded on both sides.
double yeo_johnson(double z, double lambda);
double yeo_johnson_inverse(double y, double lambda);

/// Profile log-likelihood of the transform against a Gaussian target, up to
/// constants: -(K/2) log(sigma_hat^2) + (lambda-1) * sum sign(z) log(1+|z|).
double yeo_johnson_log_likelihood(std::span<const double> z, double lambda);

/// Maximizes yeo_johnson_log_likelihood over [0, 2]: a 21-point grid pass
/// followed by golden-section refinement inside the best grid cell.
TransformParams fit_lambda(std::span<const double> z);

KdeModel make_kde(std::span<const double> transformed);

/// CDF of the Laplace-kernel mixture at v.
double kde_cdf(const KdeModel& model, double v);

/// Numeric inversion of kde_cdf by bisection (to ~1e-12).
double kde_quantile_numeric(const KdeModel& model, double q);

/// [F^-1(a'/2), F^-1(1 - a'/2)] in transformed space. Tail quantiles use the
/// closed form l = -h log((1/K) sum e^{-y_i/h}) - h log(1/a') (and its mirror
/// image), which is exact when the quantile lies beyond the sample range;
/// otherwise bisection on kde_cdf is used.
Interval confidence_interval(const KdeModel& model, double alpha_prime);

/// Full predictor for one network parameter: normalize, fit lambda,
/// transform, KDE confidence interval, then invert transform and
/// normalization. Constant samples yield [c - eps, c + eps] with
/// eps = max(1e-12, 1e-9 |c|).
Interval pred_int(std::span<const double> values, double alpha_prime);

}  // namespace ldcp
