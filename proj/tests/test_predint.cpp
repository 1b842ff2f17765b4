#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ldcp/predint.hpp"
#include "ldcp/rng.hpp"

using namespace ldcp;

namespace {

// Independent re-statement of the profile likelihood for the grid oracle.
double oracle_log_likelihood(const std::vector<double>& z, double lambda) {
  std::vector<double> y;
  for (const double v : z) y.push_back(yeo_johnson(v, lambda));
  double mean = 0.0;
  for (const double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double var = 0.0;
  for (const double v : y) var += (v - mean) * (v - mean);
  var /= static_cast<double>(y.size());
  double lj = 0.0;
  for (const double v : z) {
    lj += (lambda - 1.0) * (v > 0 ? 1.0 : v < 0 ? -1.0 : 0.0) * std::log(1.0 + std::abs(v));
  }
  return -0.5 * static_cast<double>(y.size()) * std::log(var) + lj;
}

double grid_best_lambda(const std::vector<double>& z, int points) {
  double best = 0.0;
  double best_ll = -1e300;
  for (int i = 0; i < points; ++i) {
    const double lambda = 2.0 * i / (points - 1);
    const double ll = oracle_log_likelihood(z, lambda);
    if (ll > best_ll) {
      best_ll = ll;
      best = lambda;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("median uses the even-count midpoint convention") {
  CHECK(median(std::vector<double>{3.0, 1.0, 2.0}) == doctest::Approx(2.0));
  CHECK(median(std::vector<double>{-4.0, 0.0, 1.0, 3.0}) == doctest::Approx(0.5));
  CHECK_THROWS(median(std::vector<double>{}));
}

TEST_CASE("normalization hand examples") {
  {
    auto [z, p] = normalize(std::vector<double>{1.0, 2.0, 3.0});
    CHECK(p.mu == doctest::Approx(2.0));
    CHECK(p.delta == doctest::Approx(2.0 / 3.0));
    CHECK(z[0] == doctest::Approx(-1.5));
    CHECK(z[1] == doctest::Approx(0.0));
    CHECK(z[2] == doctest::Approx(1.5));
  }
  {
    auto [z, p] = normalize(std::vector<double>{5.0, 5.0, 5.0});
    CHECK(p.constant_sample);
    for (const double v : z) CHECK(v == 0.0);
  }
  {
    auto [z, p] = normalize(std::vector<double>{-4.0, 0.0, 1.0, 3.0});
    CHECK(p.mu == doctest::Approx(0.5));
    CHECK(p.delta == doctest::Approx(2.0));
    CHECK(z[0] == doctest::Approx(-2.25));
    CHECK(z[1] == doctest::Approx(-0.25));
    CHECK(z[2] == doctest::Approx(0.25));
    CHECK(z[3] == doctest::Approx(1.25));
  }
  CHECK_THROWS(normalize(std::vector<double>{1.0}));
}

TEST_CASE("normalization centers and scales, and inverts exactly") {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> values;
    const int k = 2 + static_cast<int>(rng.below(40));
    for (int i = 0; i < k; ++i) values.push_back(rng.uniform(-100.0, 100.0));
    auto [z, p] = normalize(values);
    CHECK(std::abs(median(z)) < 1e-12);
    double mean_abs = 0.0;
    for (const double v : z) mean_abs += std::abs(v);
    mean_abs /= static_cast<double>(z.size());
    CHECK(mean_abs == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < values.size(); ++i) {
      CHECK(inverse_normalize(z[i], p) == doctest::Approx(values[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("yeo-johnson special points") {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const double z = rng.uniform(-20.0, 20.0);
    CHECK(yeo_johnson(z, 1.0) == doctest::Approx(z).epsilon(1e-12));  // identity at lambda=1
  }
  CHECK(yeo_johnson(std::exp(1.0) - 1.0, 0.0) == doctest::Approx(1.0));
  CHECK(yeo_johnson(-(std::exp(1.0) - 1.0), 2.0) == doctest::Approx(-1.0));
  CHECK(yeo_johnson(0.0, 0.7) == 0.0);
  CHECK_THROWS(yeo_johnson(1.0, -0.1));
  CHECK_THROWS(yeo_johnson(1.0, 2.1));
}

TEST_CASE("yeo-johnson is strictly increasing and invertible") {
  Rng rng(4);
  for (const double lambda : {0.0, 0.31, 1.0, 1.73, 2.0}) {
    double prev_y = yeo_johnson(-30.0, lambda);
    for (double z = -29.5; z <= 30.0; z += 0.5) {
      const double y = yeo_johnson(z, lambda);
      CHECK(y > prev_y);
      prev_y = y;
    }
    for (int t = 0; t < 200; ++t) {
      const double z = rng.uniform(-30.0, 30.0);
      const double back = yeo_johnson_inverse(yeo_johnson(z, lambda), lambda);
      CHECK(back == doctest::Approx(z).epsilon(1e-9));
    }
  }
}

TEST_CASE("lambda fitting tracks the grid-search oracle") {
  Rng rng(7);

  // Right-skewed sample: lambda should shrink below 1.
  std::vector<double> skewed;
  for (int i = 0; i < 200; ++i) skewed.push_back(std::exp(rng.gaussian()) - 1.0);
  const TransformParams skew_fit = fit_lambda(skewed);
  CHECK(skew_fit.lambda < 1.0);
  CHECK(grid_best_lambda(skewed, 50) < 1.0);

  // Exactly symmetric (antithetic) sample: the profile likelihood is
  // symmetric around lambda = 1, so both searches land there.
  std::vector<double> symmetric;
  for (int i = 0; i < 200; ++i) {
    const double g = rng.gaussian();
    symmetric.push_back(g);
    symmetric.push_back(-g);
  }
  const TransformParams sym_fit = fit_lambda(symmetric);
  CHECK(std::abs(sym_fit.lambda - 1.0) <= 2.0 / 49.0 + 1e-9);
  CHECK(std::abs(grid_best_lambda(symmetric, 50) - 1.0) <= 2.0 / 49.0 + 1e-12);

  // Optimality: never worse than the grid by more than 1e-6.
  for (int t = 0; t < 20; ++t) {
    std::vector<double> z;
    const int k = 10 + static_cast<int>(rng.below(60));
    for (int i = 0; i < k; ++i) z.push_back(rng.uniform(-3.0, 3.0));
    const double fitted = fit_lambda(z).lambda;
    const double grid = grid_best_lambda(z, 50);
    CHECK(oracle_log_likelihood(z, fitted) >= oracle_log_likelihood(z, grid) - 1e-6);
  }
}

TEST_CASE("laplace-kernel cdf hand values and limits") {
  const KdeModel single{{0.7}, 1.0};
  CHECK(kde_cdf(single, 0.7) == doctest::Approx(0.5));

  const KdeModel pair{{-1.0, 1.0}, 1.0};
  CHECK(kde_cdf(pair, 0.0) == doctest::Approx(0.5));
  CHECK(kde_cdf(pair, -50.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(kde_cdf(pair, 50.0) == doctest::Approx(1.0));

  double prev = 0.0;
  for (double v = -10.0; v <= 10.0; v += 0.25) {
    const double f = kde_cdf(pair, v);
    CHECK(f >= prev);
    prev = f;
  }
}

TEST_CASE("kde bandwidth is the centered absolute first moment") {
  const KdeModel model = make_kde(std::vector<double>{-1.0, 0.0, 2.0});
  // median 0, moment (1 + 0 + 2) / 3
  CHECK(model.bandwidth == doctest::Approx(1.0));
}

TEST_CASE("confidence interval closed form matches the hand example") {
  const KdeModel model{{-1.0, 1.0}, 1.0};
  const Interval ci = confidence_interval(model, 0.1);
  const double expected = std::log(std::cosh(1.0)) + std::log(10.0);
  CHECK(ci.lo == doctest::Approx(-expected).epsilon(1e-9));
  CHECK(ci.hi == doctest::Approx(expected).epsilon(1e-9));
  CHECK(ci.lo == doctest::Approx(-2.736366).epsilon(1e-6));

  CHECK_THROWS(confidence_interval(model, 0.0));
  CHECK_THROWS(confidence_interval(model, 1.0));
}

TEST_CASE("confidence interval widens as alpha' shrinks and brackets the data") {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> y;
    const int k = 3 + static_cast<int>(rng.below(50));
    for (int i = 0; i < k; ++i) y.push_back(rng.uniform(-2.0, 2.0));
    const KdeModel model = make_kde(y);
    if (!(model.bandwidth > 0.0)) continue;
    const Interval wide = confidence_interval(model, 0.01);
    const Interval narrow = confidence_interval(model, 0.2);
    CHECK(wide.lo <= narrow.lo);
    CHECK(wide.hi >= narrow.hi);
    // The median is always strictly inside any confidence interval.
    const double med = median(y);
    for (const Interval* iv : {&wide, &narrow}) {
      CHECK(iv->lo <= med);
      CHECK(iv->hi >= med);
    }
    // With alpha' below 1/K both endpoints straddle the whole sample.
    if (0.01 < 1.0 / static_cast<double>(k)) {
      CHECK(wide.lo <= *std::min_element(y.begin(), y.end()));
      CHECK(wide.hi >= *std::max_element(y.begin(), y.end()));
    }
    // Quantile contract at both ends.
    CHECK(kde_cdf(model, wide.lo) <= 0.005 + 1e-9);
    CHECK(kde_cdf(model, wide.hi) >= 1.0 - 0.005 - 1e-9);
  }
}

TEST_CASE("closed-form tail quantiles agree with bisection") {
  Rng rng(13);
  for (int t = 0; t < 300; ++t) {
    std::vector<double> y;
    const int k = 2 + static_cast<int>(rng.below(30));
    for (int i = 0; i < k; ++i) {
      y.push_back(rng.uniform01() < 0.5 ? rng.gaussian() : std::exp(rng.gaussian()));
    }
    const KdeModel model = make_kde(y);
    if (!(model.bandwidth > 0.0)) continue;
    const double alpha = std::pow(10.0, rng.uniform(-4.0, -0.7));
    const Interval ci = confidence_interval(model, alpha);
    const double lo_num = kde_quantile_numeric(model, alpha / 2.0);
    const double hi_num = kde_quantile_numeric(model, 1.0 - alpha / 2.0);
    CHECK(std::abs(ci.lo - lo_num) < 1e-9 * std::max(1.0, std::abs(lo_num)));
    CHECK(std::abs(ci.hi - hi_num) < 1e-9 * std::max(1.0, std::abs(hi_num)));
  }
}

TEST_CASE("pred_int contains the observed values and handles degenerate input") {
  Rng rng(17);
  // Keep alpha'/2 below 1/(2K) so both tail quantiles fall outside the
  // sample range and containment of every observed value is guaranteed.
  for (int t = 0; t < 40; ++t) {
    std::vector<double> values;
    const int k = 5 + static_cast<int>(rng.below(45));
    const double scale = std::pow(10.0, rng.uniform(-3.0, 3.0));
    for (int i = 0; i < k; ++i) values.push_back(scale * rng.gaussian());
    const Interval iv = pred_int(values, 0.01);
    CHECK(iv.lo < iv.hi);
    for (const double v : values) CHECK(iv.contains(v));
  }

  const Interval constant = pred_int(std::vector<double>{4.0, 4.0, 4.0, 4.0}, 0.1);
  CHECK(constant.lo == doctest::Approx(4.0 - 4e-9));
  CHECK(constant.hi == doctest::Approx(4.0 + 4e-9));
  CHECK(constant.lo < 4.0);
  CHECK(constant.hi > 4.0);

  CHECK_THROWS(pred_int(std::vector<double>{1.0}, 0.1));
  CHECK_THROWS(pred_int(std::vector<double>{1.0, 2.0}, 0.0));
}

TEST_CASE("pred_int is translation and scale equivariant") {
  Rng rng(19);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> values;
    const int k = 8 + static_cast<int>(rng.below(40));
    for (int i = 0; i < k; ++i) values.push_back(rng.gaussian());
    const double a = std::pow(10.0, rng.uniform(-2.0, 2.0));
    const double b = rng.uniform(-50.0, 50.0);
    std::vector<double> mapped;
    for (const double v : values) mapped.push_back(a * v + b);

    const Interval base = pred_int(values, 0.05);
    const Interval moved = pred_int(mapped, 0.05);
    CHECK(std::abs(moved.lo - (a * base.lo + b)) <=
          1e-7 * std::max(1.0, std::abs(a * base.lo + b)));
    CHECK(std::abs(moved.hi - (a * base.hi + b)) <=
          1e-7 * std::max(1.0, std::abs(a * base.hi + b)));
  }
}

// Ablation fixtures: stripped-down variants of the predictor, used only to
// show what each stage buys. None of these are shipped modes.
namespace ablation {

Interval min_max(const std::vector<double>& w) {
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  return Interval(*lo, *hi);
}

// KDE directly on the raw values: no normalization, no transform.
Interval no_transform(const std::vector<double>& w, double alpha_prime) {
  const KdeModel model = make_kde(w);
  if (!(model.bandwidth > 0.0)) return min_max(w);
  return confidence_interval(model, alpha_prime);
}

// Yeo-Johnson without prior normalization (KDE target kept).
Interval no_normalize(const std::vector<double>& w, double alpha_prime) {
  const double lambda = fit_lambda(w).lambda;
  std::vector<double> y;
  for (const double v : w) y.push_back(yeo_johnson(v, lambda));
  const KdeModel model = make_kde(y);
  if (!(model.bandwidth > 0.0)) return min_max(w);
  const Interval ci = confidence_interval(model, alpha_prime);
  return Interval(yeo_johnson_inverse(ci.lo, lambda), yeo_johnson_inverse(ci.hi, lambda));
}

// Gaussian target instead of KDE, with the matching L2 normalization.
Interval gaussian_target(const std::vector<double>& w, double alpha_prime) {
  double mean = 0.0;
  for (const double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  double sd = 0.0;
  for (const double v : w) sd += (v - mean) * (v - mean);
  sd = std::sqrt(sd / static_cast<double>(w.size()));
  if (!(sd > 0.0)) return min_max(w);
  std::vector<double> z;
  for (const double v : w) z.push_back((v - mean) / sd);
  const double lambda = fit_lambda(z).lambda;
  std::vector<double> y;
  for (const double v : z) y.push_back(yeo_johnson(v, lambda));
  double ym = 0.0;
  for (const double v : y) ym += v;
  ym /= static_cast<double>(y.size());
  double ys = 0.0;
  for (const double v : y) ys += (v - ym) * (v - ym);
  ys = std::sqrt(ys / static_cast<double>(y.size()));
  // Normal quantile via bisection on erf.
  auto normal_q = [&](double p) {
    double lo = -12.0, hi = 12.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  const double ql = ym + ys * normal_q(alpha_prime / 2.0);
  const double qu = ym + ys * normal_q(1.0 - alpha_prime / 2.0);
  return Interval(mean + sd * yeo_johnson_inverse(ql, lambda),
                  mean + sd * yeo_johnson_inverse(qu, lambda));
}

}  // namespace ablation

TEST_CASE("ablations: each stage of the predictor earns its keep") {
  // Skewed, shifted, rescaled population, like trained-parameter samples.
  Rng rng(29);
  auto draw = [&] { return 50.0 + 0.01 * (std::exp(0.7 * rng.gaussian()) - 1.0); };
  const double alpha_prime = 0.01;
  const int params = 100, observed_k = 40, fresh_n = 500;

  double cover_full = 0.0, cover_intabs = 0.0, cover_no_norm = 0.0, cover_gauss = 0.0,
         cover_no_transform = 0.0;
  for (int p = 0; p < params; ++p) {
    std::vector<double> w;
    for (int i = 0; i < observed_k; ++i) w.push_back(draw());
    const Interval full = pred_int(w, alpha_prime);
    const Interval intabs = ablation::min_max(w);
    const Interval no_norm = ablation::no_normalize(w, alpha_prime);
    const Interval gauss = ablation::gaussian_target(w, alpha_prime);
    const Interval no_trans = ablation::no_transform(w, alpha_prime);
    int in_full = 0, in_intabs = 0, in_no_norm = 0, in_gauss = 0, in_no_trans = 0;
    for (int i = 0; i < fresh_n; ++i) {
      const double v = draw();
      in_full += full.contains(v);
      in_intabs += intabs.contains(v);
      in_no_norm += no_norm.contains(v);
      in_gauss += gauss.contains(v);
      in_no_trans += no_trans.contains(v);
    }
    cover_full += in_full;
    cover_intabs += in_intabs;
    cover_no_norm += in_no_norm;
    cover_gauss += in_gauss;
    cover_no_transform += in_no_trans;
  }
  const double total = static_cast<double>(params) * fresh_n;
  cover_full /= total;
  cover_intabs /= total;
  cover_no_norm /= total;
  cover_gauss /= total;
  cover_no_transform /= total;

  // The full pipeline must meet its nominal coverage; the raw min/max
  // abstraction cannot cover unseen tails.
  CHECK(cover_full >= 1.0 - alpha_prime - 0.01);
  CHECK(cover_full > cover_intabs + 0.001);
  // Dropping normalization or the heavy-tailed target loses coverage on this
  // off-center, rescaled population.
  CHECK(cover_full >= cover_no_norm - 1e-9);
  CHECK(cover_full >= cover_gauss - 1e-9);
  CHECK(cover_full >= cover_no_transform - 1e-9);
}

TEST_CASE("the full transform chain round-trips") {
  Rng rng(23);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> values;
    const int k = 5 + static_cast<int>(rng.below(30));
    for (int i = 0; i < k; ++i) values.push_back(rng.uniform(-10.0, 10.0));
    auto [z, p] = normalize(values);
    if (p.constant_sample) continue;
    const double lambda = fit_lambda(z).lambda;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double y = yeo_johnson(z[i], lambda);
      const double back = inverse_normalize(yeo_johnson_inverse(y, lambda), p);
      CHECK(back == doctest::Approx(values[i]).epsilon(1e-9));
    }
  }
}
