#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "ldcp/milp.hpp"
#include "ldcp/rng.hpp"
#include "oracles.hpp"

using namespace ldcp;
namespace oracle = ldcp::testing;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("one-dimensional lp solved by constraints") {
  MilpModel m;
  const int x = m.add_variable(-kInf, kInf, false, "x");
  m.add_constraint({{x, 1.0}}, MilpModel::Rel::Ge, 3.0);
  m.add_constraint({{x, 1.0}}, MilpModel::Rel::Le, 10.0);
  m.set_objective(x, 1.0);
  const MilpSolution sol = solve_lp(m);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(3.0));
  CHECK(sol.assignment[0] == doctest::Approx(3.0));
}

TEST_CASE("two-variable lp with box bounds") {
  MilpModel m;
  const int x = m.add_variable(0.0, 5.0, false, "x");
  const int y = m.add_variable(0.0, 5.0, false, "y");
  m.add_constraint({{x, 1.0}, {y, 1.0}}, MilpModel::Rel::Ge, 2.0);
  m.set_objective(x, 1.0);
  m.set_objective(y, 1.0);
  const MilpSolution sol = solve_lp(m);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(2.0));
}

TEST_CASE("equality rows and maximization via negation") {
  MilpModel m;
  const int x = m.add_variable(0.0, 10.0, false, "x");
  const int y = m.add_variable(0.0, 10.0, false, "y");
  m.add_constraint({{x, 1.0}, {y, 2.0}}, MilpModel::Rel::Eq, 8.0);
  m.set_objective(x, -1.0);  // maximize x
  const MilpSolution sol = solve_lp(m);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(-8.0));
  CHECK(sol.assignment[static_cast<std::size_t>(y)] == doctest::Approx(0.0));
}

TEST_CASE("lp detects unboundedness and infeasibility") {
  {
    MilpModel m;
    const int x = m.add_variable(-kInf, kInf, false, "x");
    m.add_constraint({{x, 1.0}}, MilpModel::Rel::Le, 5.0);
    m.set_objective(x, 1.0);
    CHECK(solve_lp(m).status == SolveStatus::Unbounded);
  }
  {
    MilpModel m;
    const int x = m.add_variable(-kInf, kInf, false, "x");
    m.add_constraint({{x, 1.0}}, MilpModel::Rel::Ge, 3.0);
    m.add_constraint({{x, 1.0}}, MilpModel::Rel::Le, 2.0);
    m.set_objective(x, 1.0);
    CHECK(solve_lp(m).status == SolveStatus::Infeasible);
  }
}

TEST_CASE("random lps match the vertex-enumeration oracle") {
  Rng rng(31);
  for (int inst = 0; inst < 3; ++inst) {
    const std::size_t n = 10, rows = 10;
    std::vector<std::vector<double>> a(rows, std::vector<double>(n));
    std::vector<double> b(rows), c(n);
    for (auto& row : a) {
      for (auto& v : row) v = rng.uniform(0.05, 1.0);
    }
    for (auto& v : b) v = rng.uniform(1.0, 10.0);
    for (auto& v : c) v = rng.uniform(-1.0, 1.0);

    MilpModel m;
    for (std::size_t j = 0; j < n; ++j) {
      m.add_variable(0.0, kInf, false, "x" + std::to_string(j));
      m.set_objective(static_cast<int>(j), c[j]);
    }
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<std::pair<int, double>> terms;
      for (std::size_t j = 0; j < n; ++j) terms.push_back({static_cast<int>(j), a[r][j]});
      m.add_constraint(std::move(terms), MilpModel::Rel::Le, b[r]);
    }
    const MilpSolution sol = solve_lp(m);
    REQUIRE(sol.status == SolveStatus::Optimal);
    const double expected = oracle::vertex_enumeration_lp_min(a, b, c);
    CHECK(sol.objective == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("beale's cycling example terminates at its optimum") {
  // Degenerate under naive Dantzig pricing; the Bland fallback must kick in.
  MilpModel m;
  for (int j = 0; j < 4; ++j) m.add_variable(0.0, kInf, false, "x" + std::to_string(j));
  m.set_objective(0, -0.75);
  m.set_objective(1, 150.0);
  m.set_objective(2, -0.02);
  m.set_objective(3, 6.0);
  m.add_constraint({{0, 0.25}, {1, -60.0}, {2, -1.0 / 25.0}, {3, 9.0}}, MilpModel::Rel::Le, 0.0);
  m.add_constraint({{0, 0.5}, {1, -90.0}, {2, -1.0 / 50.0}, {3, 3.0}}, MilpModel::Rel::Le, 0.0);
  m.add_constraint({{2, 1.0}}, MilpModel::Rel::Le, 1.0);
  const MilpSolution sol = solve_lp(m);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(-0.05).epsilon(1e-9));
}

TEST_CASE("degenerate assignment lps match the brute-force matching") {
  Rng rng(89);
  for (int inst = 0; inst < 5; ++inst) {
    const int n = 5;
    std::vector<double> cost(static_cast<std::size_t>(n * n));
    for (auto& c : cost) c = rng.uniform(0.0, 10.0);

    MilpModel m;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const int var = m.add_variable(0.0, 1.0, false, "");
        m.set_objective(var, cost[static_cast<std::size_t>(i * n + j)]);
      }
    }
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<int, double>> row_terms, col_terms;
      for (int j = 0; j < n; ++j) {
        row_terms.push_back({i * n + j, 1.0});
        col_terms.push_back({j * n + i, 1.0});
      }
      m.add_constraint(std::move(row_terms), MilpModel::Rel::Eq, 1.0);
      m.add_constraint(std::move(col_terms), MilpModel::Rel::Eq, 1.0);
    }
    const MilpSolution sol = solve_lp(m);
    REQUIRE(sol.status == SolveStatus::Optimal);

    // The assignment polytope has integral vertices, so the LP optimum is the
    // cheapest permutation.
    std::vector<int> perm{0, 1, 2, 3, 4};
    double best = kInf;
    do {
      double total = 0.0;
      for (int i = 0; i < n; ++i) total += cost[static_cast<std::size_t>(i * n + perm[static_cast<std::size_t>(i)])];
      best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(sol.objective == doctest::Approx(best).epsilon(1e-7));
  }
}

TEST_CASE("lp optimum is invariant under row scaling, permutation, redundancy") {
  Rng rng(97);
  for (int inst = 0; inst < 10; ++inst) {
    const std::size_t n = 6, rows = 7;
    std::vector<std::vector<double>> a(rows, std::vector<double>(n));
    std::vector<double> b(rows), c(n), lo(n), hi(n);
    for (auto& row : a) {
      for (auto& v : row) v = rng.uniform(-1.0, 1.0);
    }
    for (auto& v : b) v = rng.uniform(0.5, 4.0);
    for (auto& v : c) v = rng.uniform(-1.0, 1.0);
    for (std::size_t j = 0; j < n; ++j) {
      lo[j] = rng.uniform(-2.0, 0.0);
      hi[j] = rng.uniform(0.5, 3.0);
    }

    auto build = [&](bool scale_rows, bool permute, bool add_redundant) {
      std::vector<std::size_t> order(n);
      for (std::size_t j = 0; j < n; ++j) order[j] = j;
      if (permute) std::reverse(order.begin(), order.end());
      MilpModel m;
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        m.add_variable(lo[src], hi[src], false, "x" + std::to_string(src));
        m.set_objective(static_cast<int>(j), c[src]);
      }
      for (std::size_t r = 0; r < rows; ++r) {
        const double f = scale_rows ? rng.uniform(0.1, 10.0) : 1.0;
        std::vector<std::pair<int, double>> terms;
        for (std::size_t j = 0; j < n; ++j) {
          terms.push_back({static_cast<int>(j), f * a[r][order[j]]});
        }
        m.add_constraint(std::move(terms), MilpModel::Rel::Le, f * b[r]);
        if (add_redundant && r == 0) {
          std::vector<std::pair<int, double>> again;
          for (std::size_t j = 0; j < n; ++j) {
            again.push_back({static_cast<int>(j), a[r][order[j]]});
          }
          m.add_constraint(std::move(again), MilpModel::Rel::Le, b[r]);
        }
      }
      return m;
    };

    const MilpSolution base = solve_lp(build(false, false, false));
    REQUIRE(base.status == SolveStatus::Optimal);  // bounded box keeps it solvable
    for (const bool scale : {false, true}) {
      for (const bool permute : {false, true}) {
        const MilpSolution variant = solve_lp(build(scale, permute, true));
        REQUIRE(variant.status == SolveStatus::Optimal);
        CHECK(variant.objective == doctest::Approx(base.objective).epsilon(1e-7));
      }
    }
  }
}

TEST_CASE("milp with binaries fixed by bounds reduces to the lp") {
  MilpModel m;
  const int x = m.add_variable(0.0, 4.0, false, "x");
  const int b0 = m.add_variable(1.0, 1.0, true, "b0");
  const int b1 = m.add_variable(0.0, 0.0, true, "b1");
  m.add_constraint({{x, 1.0}, {b0, -2.0}, {b1, -2.0}}, MilpModel::Rel::Ge, 0.5);
  m.set_objective(x, 1.0);
  const MilpSolution milp = solve_milp(m);
  const MilpSolution lp = solve_lp(m);
  REQUIRE(milp.status == SolveStatus::Optimal);
  CHECK(milp.objective == doctest::Approx(lp.objective));
  CHECK(milp.objective == doctest::Approx(2.5));
  CHECK(milp.nodes == 1);
}

TEST_CASE("knapsack instances match brute force over all assignments") {
  Rng rng(37);
  for (int inst = 0; inst < 10; ++inst) {
    const int n = 5;
    std::vector<double> value(n), weight(n);
    for (auto& v : value) v = rng.uniform(1.0, 10.0);
    for (auto& w : weight) w = rng.uniform(1.0, 6.0);
    const double cap = rng.uniform(5.0, 14.0);

    MilpModel m;
    std::vector<std::pair<int, double>> terms;
    for (int j = 0; j < n; ++j) {
      m.add_variable(0.0, 1.0, true, "b" + std::to_string(j));
      m.set_objective(j, -value[static_cast<std::size_t>(j)]);  // maximize value
      terms.push_back({j, weight[static_cast<std::size_t>(j)]});
    }
    m.add_constraint(std::move(terms), MilpModel::Rel::Le, cap);

    double best = 0.0;
    for (int mask = 0; mask < (1 << n); ++mask) {
      double w = 0.0, v = 0.0;
      for (int j = 0; j < n; ++j) {
        if (mask & (1 << j)) {
          w += weight[static_cast<std::size_t>(j)];
          v += value[static_cast<std::size_t>(j)];
        }
      }
      if (w <= cap) best = std::max(best, v);
    }

    const MilpSolution sol = solve_milp(m);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(-sol.objective == doctest::Approx(best).epsilon(1e-9));
    for (const int j : {0, 1, 2, 3, 4}) {
      const double v = sol.assignment[static_cast<std::size_t>(j)];
      CHECK(std::min(v, 1.0 - v) <= 1e-6);  // integral within tolerance
    }
    CHECK(sol.best_bound == doctest::Approx(sol.objective).epsilon(1e-6));
  }
}

TEST_CASE("contradictory binary requirements are infeasible") {
  MilpModel m;
  const int b = m.add_variable(0.0, 1.0, true, "b");
  m.add_constraint({{b, 1.0}}, MilpModel::Rel::Ge, 0.6);
  m.add_constraint({{b, 1.0}}, MilpModel::Rel::Le, 0.4);
  m.set_objective(b, 1.0);
  CHECK(solve_milp(m).status == SolveStatus::Infeasible);
}

TEST_CASE("node budget overrun reports the incumbent and a valid bound") {
  Rng rng(43);
  const int n = 12;
  MilpModel m;
  std::vector<std::pair<int, double>> terms;
  for (int j = 0; j < n; ++j) {
    m.add_variable(0.0, 1.0, true, "b" + std::to_string(j));
    m.set_objective(j, -rng.uniform(1.0, 2.0));
    terms.push_back({j, rng.uniform(1.0, 2.0)});
  }
  m.add_constraint(std::move(terms), MilpModel::Rel::Le, 7.7);

  const MilpSolution full = solve_milp(m, 1000000);
  REQUIRE(full.status == SolveStatus::Optimal);
  const MilpSolution cut = solve_milp(m, 4);
  if (cut.status == SolveStatus::BudgetExceeded) {
    CHECK(cut.best_bound <= full.objective + 1e-9);
    if (!cut.assignment.empty()) CHECK(cut.objective >= full.objective - 1e-9);
  } else {
    CHECK(cut.status == SolveStatus::Optimal);  // solved within 4 nodes
  }
}

TEST_CASE("milp solving is deterministic") {
  Rng rng(47);
  MilpModel m;
  std::vector<std::pair<int, double>> terms;
  for (int j = 0; j < 8; ++j) {
    m.add_variable(0.0, 1.0, true, "b" + std::to_string(j));
    m.set_objective(j, -rng.uniform(0.5, 1.5));
    terms.push_back({j, rng.uniform(0.5, 1.5)});
  }
  m.add_constraint(std::move(terms), MilpModel::Rel::Le, 3.3);
  const MilpSolution a = solve_milp(m);
  const MilpSolution b = solve_milp(m);
  CHECK(a.objective == b.objective);
  CHECK(a.assignment == b.assignment);
  CHECK(a.nodes == b.nodes);
}

TEST_CASE("hyper robustness encoding matches the hand example") {
  // One hidden neuron with weight intervals [1,3],[1,2], bias [1,1]; inputs
  // pinned at (1,0); identity output layer reading the hidden neuron.
  IntervalHyperNetwork hyper;
  hyper.architecture = MlpArchitecture{{2, 1, 1}};
  hyper.weight_intervals = {{Interval(1.0, 3.0), Interval(1.0, 2.0)}, {Interval(1.0, 1.0)}};
  hyper.bias_intervals = {{Interval(1.0, 1.0)}, {Interval(0.0, 0.0)}};
  const std::vector<Interval> box{Interval::point(1.0), Interval::point(0.0)};

  const auto bounds = propagate_bounds(hyper, box);
  CHECK(bounds[0][0].lo == doctest::Approx(2.0));
  CHECK(bounds[0][0].hi == doctest::Approx(4.0));

  const RobustnessEncoding enc = encode_hyper_robustness(hyper, box, +1, bounds);
  const MilpSolution sol = solve_milp(enc.model);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(2.0));  // lower corner attained
}

TEST_CASE("point hyper-networks match the concrete equality encoding") {
  Rng rng(53);
  for (int t = 0; t < 25; ++t) {
    const MlpArchitecture arch{{2, 3, 1}};
    const IntervalHyperNetwork hyper = oracle::random_hypernet(arch, rng, 0.0);
    MlpNetwork net = MlpNetwork::zeros(arch);
    for (std::size_t i = 0; i < net.param_count(); ++i) net.set_param(i, hyper.param(i).lo);

    std::vector<Interval> box;
    for (int j = 0; j < 2; ++j) {
      const double c = rng.uniform01();
      const double eps = rng.uniform(0.0, 0.2);
      box.emplace_back(std::max(0.0, c - eps), std::min(1.0, c + eps));
    }
    const int label = rng.uniform01() < 0.5 ? -1 : 1;
    const auto bounds = propagate_bounds(hyper, box);

    const RobustnessEncoding ours = encode_hyper_robustness(hyper, box, label, bounds);
    const RobustnessEncoding ref = oracle::encode_concrete(net, box, label, bounds);
    const MilpSolution s1 = solve_milp(ours.model);
    const MilpSolution s2 = solve_milp(ref.model);
    REQUIRE(s1.status == SolveStatus::Optimal);
    REQUIRE(s2.status == SolveStatus::Optimal);
    CHECK(s1.objective == doctest::Approx(s2.objective).epsilon(1e-9));
  }
}

TEST_CASE("milp optimum equals the phase-enumeration oracle") {
  Rng rng(59);
  int done = 0;
  while (done < 20) {
    const MlpArchitecture arch =
        rng.uniform01() < 0.5 ? MlpArchitecture{{2, 4, 1}} : MlpArchitecture{{2, 3, 3, 1}};
    const IntervalHyperNetwork hyper = oracle::random_hypernet(arch, rng, 0.3);
    std::vector<Interval> box;
    for (int j = 0; j < 2; ++j) {
      const double c = rng.uniform01();
      const double eps = rng.uniform(0.0, 0.3);
      box.emplace_back(std::max(0.0, c - eps), std::min(1.0, c + eps));
    }
    const auto bounds = propagate_bounds(hyper, box);
    const int label = rng.uniform01() < 0.5 ? -1 : 1;
    const RobustnessEncoding enc = encode_hyper_robustness(hyper, box, label, bounds);
    if (enc.unstable_relus > 8) continue;
    ++done;

    const MilpSolution sol = solve_milp(enc.model);
    REQUIRE(sol.status == SolveStatus::Optimal);
    const double expected = oracle::phase_enumeration_optimum(hyper, box, label, bounds);
    CHECK(sol.objective == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("widening weight intervals never raises the minimized objective") {
  Rng rng(61);
  for (int t = 0; t < 10; ++t) {
    const MlpArchitecture arch{{2, 3, 1}};
    IntervalHyperNetwork tight = oracle::random_hypernet(arch, rng, 0.2);
    IntervalHyperNetwork wide = tight;
    for (auto& layer : wide.weight_intervals) {
      for (auto& iv : layer) iv = Interval(iv.lo - 0.1, iv.hi + 0.1);
    }
    const std::vector<Interval> box{Interval(0.2, 0.6), Interval(0.1, 0.8)};
    const int label = 1;
    const MilpSolution st =
        solve_milp(encode_hyper_robustness(tight, box, label, propagate_bounds(tight, box)).model);
    const MilpSolution sw =
        solve_milp(encode_hyper_robustness(wide, box, label, propagate_bounds(wide, box)).model);
    REQUIRE(st.status == SolveStatus::Optimal);
    REQUIRE(sw.status == SolveStatus::Optimal);
    CHECK(sw.objective <= st.objective + 1e-9);
  }
}

TEST_CASE("negative-lower-bound encoding reduces to the primary one at zero") {
  Rng rng(67);
  const MlpArchitecture arch{{2, 3, 1}};
  const IntervalHyperNetwork hyper = oracle::random_hypernet(arch, rng, 0.2);
  const std::vector<Interval> box{Interval(0.1, 0.5), Interval(0.0, 0.9)};
  const auto bounds = propagate_bounds(hyper, box);
  const std::vector<double> zeros{0.0, 0.0};

  const RobustnessEncoding plain = encode_hyper_robustness(hyper, box, 1, bounds);
  const RobustnessEncoding penal = encode_with_negative_lb(hyper, box, 1, bounds, zeros);
  REQUIRE(plain.model.rows.size() == penal.model.rows.size());
  for (std::size_t r = 0; r < plain.model.rows.size(); ++r) {
    CHECK(plain.model.rows[r].rhs == penal.model.rows[r].rhs);
    CHECK(plain.model.rows[r].terms == penal.model.rows[r].terms);
  }
}

TEST_CASE("penalty magnitude follows (u_w - l_w) * max(0, -l_x)") {
  // Single input, single neuron: weight [1,3], bias 0, input lower bound -1.
  IntervalHyperNetwork hyper;
  hyper.architecture = MlpArchitecture{{1, 1, 1}};
  hyper.weight_intervals = {{Interval(1.0, 3.0)}, {Interval(1.0, 1.0)}};
  hyper.bias_intervals = {{Interval(0.0, 0.0)}, {Interval(0.0, 0.0)}};
  const std::vector<Interval> box{Interval(-1.0, 1.0)};
  const auto bounds = propagate_bounds_penalized(hyper, box);
  const std::vector<double> lower{-1.0};
  const RobustnessEncoding enc = encode_with_negative_lb(hyper, box, 1, bounds, lower);
  // First two rows: xhat >= l_w x + l_b - 2 and xhat <= u_w x + u_b + 2.
  CHECK(enc.model.rows[0].rhs == doctest::Approx(-2.0));
  CHECK(enc.model.rows[1].rhs == doctest::Approx(2.0));
}

TEST_CASE("penalized affine rows are sound for inputs in [-1,1]") {
  Rng rng(71);
  const MlpArchitecture arch{{3, 2, 1}};
  const IntervalHyperNetwork hyper = oracle::random_hypernet(arch, rng, 0.4);
  const std::vector<Interval> box{Interval(-1.0, 1.0), Interval(-1.0, 1.0), Interval(-1.0, 1.0)};
  std::vector<double> lower(3, -1.0);

  for (int t = 0; t < 1000; ++t) {
    const MlpNetwork net = oracle::sample_network(hyper, rng);
    const std::vector<double> x = oracle::sample_point(box, rng);
    for (int k = 0; k < 2; ++k) {
      double acc = net.biases[0][static_cast<std::size_t>(k)];
      double lo = hyper.bias_intervals[0][static_cast<std::size_t>(k)].lo;
      double hi = hyper.bias_intervals[0][static_cast<std::size_t>(k)].hi;
      double pen = 0.0;
      for (int j = 0; j < 3; ++j) {
        const std::size_t idx = static_cast<std::size_t>(k) * 3 + static_cast<std::size_t>(j);
        const Interval& w = hyper.weight_intervals[0][idx];
        acc += net.weights[0][idx] * x[static_cast<std::size_t>(j)];
        lo += w.lo * x[static_cast<std::size_t>(j)];
        hi += w.hi * x[static_cast<std::size_t>(j)];
        pen += (w.hi - w.lo) * std::max(0.0, -lower[static_cast<std::size_t>(j)]);
      }
      CHECK(acc >= lo - pen - 1e-12);
      CHECK(acc <= hi + pen + 1e-12);
    }
  }
}

TEST_CASE("lp format dump is emitted") {
  MilpModel m;
  const int x = m.add_variable(0.0, 1.0, true, "x");
  m.add_constraint({{x, 1.0}}, MilpModel::Rel::Le, 1.0);
  m.set_objective(x, -1.0);
  std::ostringstream out;
  write_lp_format(m, out);
  const std::string text = out.str();
  CHECK(text.find("Minimize") != std::string::npos);
  CHECK(text.find("Binaries") != std::string::npos);
  CHECK(text.find("End") != std::string::npos);
}
