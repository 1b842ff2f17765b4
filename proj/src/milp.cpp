#include "ldcp/milp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace ldcp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDualTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr double kRatioTieTol = 1e-9;

/// Two-phase bounded-variable revised simplex with a dense basis inverse.
/// Phase 1 installs one artificial per initially infeasible row and
/// minimizes their sum; phase 2 pins the artificials to zero and optimizes
/// the real objective. Dantzig pricing with a switch to Bland's rule after a
/// run of degenerate pivots guarantees termination.
class Simplex {
 public:
  Simplex(const MilpModel& model, std::span<const double> lo, std::span<const double> hi)
      : nstruct_(static_cast<int>(model.vars.size())), m_(static_cast<int>(model.rows.size())) {
    cols_.assign(static_cast<std::size_t>(nstruct_), {});
    lo_.assign(lo.begin(), lo.end());
    hi_.assign(hi.begin(), hi.end());
    b_.resize(static_cast<std::size_t>(m_));
    for (int r = 0; r < m_; ++r) {
      const auto& row = model.rows[static_cast<std::size_t>(r)];
      b_[static_cast<std::size_t>(r)] = row.rhs;
      for (const auto& [var, coeff] : row.terms) {
        column(var).push_back({r, coeff});
      }
    }
    // One slack per row makes the initial basis explicit.
    for (int r = 0; r < m_; ++r) {
      const int col = add_column();
      column(col).push_back({r, 1.0});
      switch (model.rows[static_cast<std::size_t>(r)].rel) {
        case MilpModel::Rel::Le:
          lo_.push_back(0.0);
          hi_.push_back(kInf);
          break;
        case MilpModel::Rel::Ge:
          lo_.push_back(-kInf);
          hi_.push_back(0.0);
          break;
        case MilpModel::Rel::Eq:
          lo_.push_back(0.0);
          hi_.push_back(0.0);
          break;
      }
    }
    real_cost_.assign(cols_.size(), 0.0);
    for (int j = 0; j < nstruct_; ++j) {
      real_cost_[static_cast<std::size_t>(j)] = model.objective[static_cast<std::size_t>(j)];
    }
  }

  SolveStatus solve() {
    init_basis();
    if (first_artificial_ >= 0) {
      phase1_ = true;
      const SolveStatus s = iterate();
      if (s != SolveStatus::Optimal) {
        throw std::runtime_error("simplex: phase 1 failed (" + diagnostics() + ")");
      }
      if (phase_objective() > kMilpTolerance) return SolveStatus::Infeasible;
      // Freeze the artificials at zero for phase 2.
      for (std::size_t j = static_cast<std::size_t>(first_artificial_); j < cols_.size(); ++j) {
        lo_[j] = 0.0;
        hi_[j] = 0.0;
        if (vstat_[j] != VStat::Basic) {
          vstat_[j] = VStat::AtLower;
          xn_[j] = 0.0;
        }
      }
    }
    phase1_ = false;
    refactor();
    const SolveStatus s = iterate();
    if (s == SolveStatus::Optimal) {
      refactor();  // clear accumulated drift before reporting values
      check_feasible();
    }
    return s;
  }

  double objective() const {
    double obj = 0.0;
    for (int j = 0; j < nstruct_; ++j) {
      obj += real_cost_[static_cast<std::size_t>(j)] * value(j);
    }
    return obj;
  }

  std::vector<double> assignment() const {
    std::vector<double> x(static_cast<std::size_t>(nstruct_));
    for (int j = 0; j < nstruct_; ++j) x[static_cast<std::size_t>(j)] = value(j);
    return x;
  }

 private:
  enum class VStat { Basic, AtLower, AtUpper, Free };
  struct Entry {
    int row;
    double coeff;
  };

  std::vector<Entry>& column(int col) { return cols_[static_cast<std::size_t>(col)]; }
  const std::vector<Entry>& column(int col) const { return cols_[static_cast<std::size_t>(col)]; }

  int add_column() {
    cols_.emplace_back();
    return static_cast<int>(cols_.size()) - 1;
  }

  double value(int col) const {
    const std::size_t j = static_cast<std::size_t>(col);
    if (vstat_[j] == VStat::Basic) return xb_[static_cast<std::size_t>(row_of_[j])];
    return xn_[j];
  }

  double phase_objective() const {
    double obj = 0.0;
    for (std::size_t j = 0; j < cols_.size(); ++j) obj += cost(static_cast<int>(j)) * value(static_cast<int>(j));
    return obj;
  }

  double cost(int col) const {
    if (phase1_) return col >= first_artificial_ && first_artificial_ >= 0 ? 1.0 : 0.0;
    return col < static_cast<int>(real_cost_.size()) ? real_cost_[static_cast<std::size_t>(col)] : 0.0;
  }

  void init_basis() {
    const std::size_t ncols = cols_.size();
    vstat_.assign(ncols, VStat::AtLower);
    xn_.assign(ncols, 0.0);
    row_of_.assign(ncols, -1);
    basic_.assign(static_cast<std::size_t>(m_), -1);
    xb_.assign(static_cast<std::size_t>(m_), 0.0);

    for (int j = 0; j < nstruct_; ++j) {
      const std::size_t js = static_cast<std::size_t>(j);
      if (std::isfinite(lo_[js])) {
        vstat_[js] = VStat::AtLower;
        xn_[js] = lo_[js];
      } else if (std::isfinite(hi_[js])) {
        vstat_[js] = VStat::AtUpper;
        xn_[js] = hi_[js];
      } else {
        vstat_[js] = VStat::Free;
        xn_[js] = 0.0;
      }
    }

    // Residuals with all structural variables at their chosen bounds.
    std::vector<double> q(b_);
    for (int j = 0; j < nstruct_; ++j) {
      const double v = xn_[static_cast<std::size_t>(j)];
      if (v == 0.0) continue;
      for (const Entry& e : column(j)) q[static_cast<std::size_t>(e.row)] -= e.coeff * v;
    }

    first_artificial_ = -1;
    for (int r = 0; r < m_; ++r) {
      const int slack = nstruct_ + r;
      const std::size_t ss = static_cast<std::size_t>(slack);
      const double qr = q[static_cast<std::size_t>(r)];
      if (qr >= lo_[ss] - kPivotTol && qr <= hi_[ss] + kPivotTol) {
        vstat_[ss] = VStat::Basic;
        basic_[static_cast<std::size_t>(r)] = slack;
        row_of_[ss] = r;
        xb_[static_cast<std::size_t>(r)] = qr;
      } else {
        const double sb = std::clamp(qr, lo_[ss], hi_[ss]);
        vstat_[ss] = sb == lo_[ss] ? VStat::AtLower : VStat::AtUpper;
        xn_[ss] = sb;
        const int art = add_column();
        const double sigma = qr - sb > 0.0 ? 1.0 : -1.0;
        column(art).push_back({r, sigma});
        lo_.push_back(0.0);
        hi_.push_back(kInf);
        vstat_.push_back(VStat::Basic);
        xn_.push_back(0.0);
        row_of_.push_back(r);
        if (first_artificial_ < 0) first_artificial_ = art;
        basic_[static_cast<std::size_t>(r)] = art;
        xb_[static_cast<std::size_t>(r)] = std::abs(qr - sb);
      }
    }
    refactor();
  }

  // Rebuilds the dense basis inverse by Gauss-Jordan and recomputes the
  // basic values from scratch.
  void refactor() {
    const std::size_t ms = static_cast<std::size_t>(m_);
    binv_.assign(ms, std::vector<double>(ms, 0.0));
    std::vector<std::vector<double>> mat(ms, std::vector<double>(ms, 0.0));
    for (int r = 0; r < m_; ++r) {
      binv_[static_cast<std::size_t>(r)][static_cast<std::size_t>(r)] = 1.0;
      for (const Entry& e : column(basic_[static_cast<std::size_t>(r)])) {
        mat[static_cast<std::size_t>(e.row)][static_cast<std::size_t>(r)] = e.coeff;
      }
    }
    for (std::size_t c = 0; c < ms; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < ms; ++r) {
        if (std::abs(mat[r][c]) > std::abs(mat[piv][c])) piv = r;
      }
      if (std::abs(mat[piv][c]) < 1e-12) {
        throw std::runtime_error("simplex: singular basis (" + diagnostics() + ")");
      }
      std::swap(mat[piv], mat[c]);
      std::swap(binv_[piv], binv_[c]);
      const double inv = 1.0 / mat[c][c];
      for (std::size_t k = 0; k < ms; ++k) {
        mat[c][k] *= inv;
        binv_[c][k] *= inv;
      }
      for (std::size_t r = 0; r < ms; ++r) {
        if (r == c) continue;
        const double f = mat[r][c];
        if (f == 0.0) continue;
        for (std::size_t k = 0; k < ms; ++k) {
          mat[r][k] -= f * mat[c][k];
          binv_[r][k] -= f * binv_[c][k];
        }
      }
    }
    recompute_basics();
  }

  void recompute_basics() {
    std::vector<double> rhs(b_);
    for (std::size_t j = 0; j < cols_.size(); ++j) {
      if (vstat_[j] == VStat::Basic) continue;
      const double v = xn_[j];
      if (v == 0.0) continue;
      for (const Entry& e : column(static_cast<int>(j))) {
        rhs[static_cast<std::size_t>(e.row)] -= e.coeff * v;
      }
    }
    for (int r = 0; r < m_; ++r) {
      double acc = 0.0;
      for (int k = 0; k < m_; ++k) {
        acc += binv_[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)] *
               rhs[static_cast<std::size_t>(k)];
      }
      xb_[static_cast<std::size_t>(r)] = acc;
    }
  }

  std::vector<double> ftran(int col) const {
    std::vector<double> w(static_cast<std::size_t>(m_), 0.0);
    for (const Entry& e : column(col)) {
      for (int r = 0; r < m_; ++r) {
        w[static_cast<std::size_t>(r)] +=
            binv_[static_cast<std::size_t>(r)][static_cast<std::size_t>(e.row)] * e.coeff;
      }
    }
    return w;
  }

  std::vector<double> duals() const {
    std::vector<double> y(static_cast<std::size_t>(m_), 0.0);
    for (int r = 0; r < m_; ++r) {
      const double cb = cost(basic_[static_cast<std::size_t>(r)]);
      if (cb == 0.0) continue;
      for (int i = 0; i < m_; ++i) {
        y[static_cast<std::size_t>(i)] +=
            cb * binv_[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)];
      }
    }
    return y;
  }

  SolveStatus iterate() {
    const long max_iters = 2000 + 200L * (m_ + static_cast<long>(cols_.size()));
    bool bland = false;
    int degenerate_run = 0;

    for (long iter = 0; iter < max_iters; ++iter) {
      if (iter > 0 && iter % 64 == 0) refactor();
      const std::vector<double> y = duals();

      int enter = -1;
      double best_score = kDualTol;
      int direction = +1;
      for (std::size_t j = 0; j < cols_.size(); ++j) {
        if (vstat_[j] == VStat::Basic) continue;
        if (hi_[j] - lo_[j] <= 0.0) continue;  // fixed, can never move
        double d = cost(static_cast<int>(j));
        for (const Entry& e : column(static_cast<int>(j))) {
          d -= y[static_cast<std::size_t>(e.row)] * e.coeff;
        }
        int dir = 0;
        if (vstat_[j] == VStat::AtLower && d < -kDualTol) dir = +1;
        else if (vstat_[j] == VStat::AtUpper && d > kDualTol) dir = -1;
        else if (vstat_[j] == VStat::Free && std::abs(d) > kDualTol) dir = d < 0.0 ? +1 : -1;
        if (dir == 0) continue;
        if (bland) {
          enter = static_cast<int>(j);
          direction = dir;
          break;
        }
        const double score = std::abs(d);
        if (score > best_score) {
          best_score = score;
          enter = static_cast<int>(j);
          direction = dir;
        }
      }
      if (enter < 0) return SolveStatus::Optimal;

      const std::size_t es = static_cast<std::size_t>(enter);
      const std::vector<double> w = ftran(enter);

      double step = kInf;  // limit from the entering variable's own range
      if (vstat_[es] != VStat::Free && std::isfinite(lo_[es]) && std::isfinite(hi_[es])) {
        step = hi_[es] - lo_[es];
      }
      int leave_row = -1;
      bool leave_at_upper = false;
      double leave_pivot = 0.0;
      for (int r = 0; r < m_; ++r) {
        const double wr = w[static_cast<std::size_t>(r)];
        if (std::abs(wr) <= kPivotTol) continue;
        const int bvar = basic_[static_cast<std::size_t>(r)];
        const std::size_t bs = static_cast<std::size_t>(bvar);
        const double rate = -direction * wr;  // change of the basic value per unit step
        double cand;
        bool at_upper;
        if (rate > 0.0) {
          if (!std::isfinite(hi_[bs])) continue;
          cand = (hi_[bs] - xb_[static_cast<std::size_t>(r)]) / rate;
          at_upper = true;
        } else {
          if (!std::isfinite(lo_[bs])) continue;
          cand = (xb_[static_cast<std::size_t>(r)] - lo_[bs]) / (-rate);
          at_upper = false;
        }
        if (cand < 0.0) cand = 0.0;
        bool take = false;
        if (cand < step - kRatioTieTol) {
          take = true;
        } else if (cand < step + kRatioTieTol && leave_row >= 0) {
          if (bland) {
            take = bvar < basic_[static_cast<std::size_t>(leave_row)];
          } else {
            take = std::abs(wr) > std::abs(leave_pivot);
          }
        } else if (cand < step + kRatioTieTol && leave_row < 0 && cand <= step) {
          take = true;
        }
        if (take) {
          step = std::min(step, cand);
          leave_row = r;
          leave_at_upper = at_upper;
          leave_pivot = wr;
        }
      }

      if (!std::isfinite(step)) {
        if (phase1_) throw std::runtime_error("simplex: unbounded phase 1 (" + diagnostics() + ")");
        return SolveStatus::Unbounded;
      }

      if (step < 1e-11) {
        if (++degenerate_run > 60) bland = true;
      } else {
        degenerate_run = 0;
      }

      if (leave_row < 0) {
        // Bound flip: the entering variable crosses to its other bound.
        for (int r = 0; r < m_; ++r) {
          xb_[static_cast<std::size_t>(r)] -= direction * step * w[static_cast<std::size_t>(r)];
        }
        vstat_[es] = direction > 0 ? VStat::AtUpper : VStat::AtLower;
        xn_[es] = direction > 0 ? hi_[es] : lo_[es];
        continue;
      }

      const double enter_value =
          (vstat_[es] == VStat::Free ? 0.0 : xn_[es]) + direction * step;
      for (int r = 0; r < m_; ++r) {
        if (r == leave_row) continue;
        xb_[static_cast<std::size_t>(r)] -= direction * step * w[static_cast<std::size_t>(r)];
      }
      const int leaving = basic_[static_cast<std::size_t>(leave_row)];
      const std::size_t ls = static_cast<std::size_t>(leaving);
      vstat_[ls] = leave_at_upper ? VStat::AtUpper : VStat::AtLower;
      xn_[ls] = leave_at_upper ? hi_[ls] : lo_[ls];
      row_of_[ls] = -1;

      basic_[static_cast<std::size_t>(leave_row)] = enter;
      vstat_[es] = VStat::Basic;
      row_of_[es] = leave_row;
      xb_[static_cast<std::size_t>(leave_row)] = enter_value;

      // Rank-one update of the basis inverse.
      const double pivot = w[static_cast<std::size_t>(leave_row)];
      std::vector<double>& prow = binv_[static_cast<std::size_t>(leave_row)];
      for (double& v : prow) v /= pivot;
      for (int r = 0; r < m_; ++r) {
        if (r == leave_row) continue;
        const double f = w[static_cast<std::size_t>(r)];
        if (f == 0.0) continue;
        std::vector<double>& row = binv_[static_cast<std::size_t>(r)];
        for (int k = 0; k < m_; ++k) {
          row[static_cast<std::size_t>(k)] -= f * prow[static_cast<std::size_t>(k)];
        }
      }
    }
    throw std::runtime_error("simplex: iteration limit exceeded (" + diagnostics() + ")");
  }

  void check_feasible() const {
    for (std::size_t j = 0; j < cols_.size(); ++j) {
      const double v = value(static_cast<int>(j));
      if (v < lo_[j] - kMilpTolerance || v > hi_[j] + kMilpTolerance) {
        throw std::runtime_error("simplex: bound violation at optimum (" + diagnostics() + ")");
      }
    }
    std::vector<double> residual(b_);
    for (std::size_t j = 0; j < cols_.size(); ++j) {
      const double v = value(static_cast<int>(j));
      if (v == 0.0) continue;
      for (const Entry& e : column(static_cast<int>(j))) {
        residual[static_cast<std::size_t>(e.row)] -= e.coeff * v;
      }
    }
    for (const double r : residual) {
      if (std::abs(r) > kMilpTolerance) {
        throw std::runtime_error("simplex: row violation at optimum (" + diagnostics() + ")");
      }
    }
  }

  std::string diagnostics() const {
    return "rows=" + std::to_string(m_) + " cols=" + std::to_string(cols_.size()) +
           " phase=" + (phase1_ ? std::string("1") : std::string("2"));
  }

  int nstruct_;
  int m_;
  std::vector<std::vector<Entry>> cols_;
  std::vector<double> lo_, hi_, b_, real_cost_;
  std::vector<VStat> vstat_;
  std::vector<double> xn_;    // values of nonbasic columns
  std::vector<double> xb_;    // values of basic columns, by row
  std::vector<int> basic_;    // column basic in each row
  std::vector<int> row_of_;   // inverse of basic_, -1 when nonbasic
  std::vector<std::vector<double>> binv_;
  int first_artificial_ = -1;
  bool phase1_ = false;
};

MilpSolution run_lp(const MilpModel& model, std::span<const double> lo,
                    std::span<const double> hi) {
  Simplex solver(model, lo, hi);
  MilpSolution sol;
  sol.status = solver.solve();
  sol.nodes = 1;
  if (sol.status == SolveStatus::Optimal) {
    sol.objective = solver.objective();
    sol.assignment = solver.assignment();
    sol.best_bound = sol.objective;
  } else if (sol.status == SolveStatus::Infeasible) {
    sol.best_bound = kInf;
  } else {
    sol.best_bound = -kInf;
  }
  return sol;
}

}  // namespace

int MilpModel::add_variable(double lo, double hi, bool is_binary, std::string name) {
  vars.push_back({lo, hi, is_binary, std::move(name)});
  objective.push_back(0.0);
  return static_cast<int>(vars.size()) - 1;
}

void MilpModel::add_constraint(std::vector<std::pair<int, double>> terms, Rel rel, double rhs) {
  for (const auto& [var, coeff] : terms) {
    if (var < 0 || var >= static_cast<int>(vars.size())) {
      throw std::invalid_argument("constraint references undeclared variable");
    }
    (void)coeff;
  }
  rows.push_back({std::move(terms), rel, rhs});
}

void MilpModel::set_objective(int var, double coeff) {
  if (var < 0 || var >= static_cast<int>(vars.size())) {
    throw std::invalid_argument("objective references undeclared variable");
  }
  objective[static_cast<std::size_t>(var)] = coeff;
}

void MilpModel::validate() const {
  for (std::size_t j = 0; j < vars.size(); ++j) {
    const Variable& v = vars[j];
    if (std::isnan(v.lo) || std::isnan(v.hi) || v.lo > v.hi) {
      throw std::invalid_argument("variable '" + v.name + "' has invalid bounds");
    }
    if (v.is_binary && (v.lo < 0.0 || v.hi > 1.0)) {
      throw std::invalid_argument("binary variable '" + v.name + "' has bounds outside [0,1]");
    }
  }
}

MilpSolution solve_lp(const MilpModel& model) {
  std::vector<double> lo, hi;
  lo.reserve(model.vars.size());
  hi.reserve(model.vars.size());
  for (const auto& v : model.vars) {
    lo.push_back(v.lo);
    hi.push_back(v.hi);
  }
  return solve_lp(model, lo, hi);
}

MilpSolution solve_lp(const MilpModel& model, std::span<const double> lo,
                      std::span<const double> hi) {
  model.validate();
  if (lo.size() != model.vars.size() || hi.size() != model.vars.size()) {
    throw std::invalid_argument("solve_lp: bound override size mismatch");
  }
  return run_lp(model, lo, hi);
}

MilpSolution solve_milp(const MilpModel& model, long node_budget) {
  model.validate();
  std::vector<int> binaries;
  for (std::size_t j = 0; j < model.vars.size(); ++j) {
    if (model.vars[j].is_binary) binaries.push_back(static_cast<int>(j));
  }

  struct Node {
    double bound;
    long seq;
    std::vector<double> lo, hi;
    std::vector<double> relaxation;
  };
  auto node_less = [](const Node& a, const Node& b) {
    return a.bound != b.bound ? a.bound < b.bound : a.seq < b.seq;
  };

  std::vector<double> root_lo, root_hi;
  for (const auto& v : model.vars) {
    root_lo.push_back(v.lo);
    root_hi.push_back(v.hi);
  }

  MilpSolution result;
  long nodes = 0;
  long seq = 0;
  double incumbent = kInf;
  std::vector<double> incumbent_assignment;
  std::vector<Node> open;

  auto fractional_binary = [&](const std::vector<double>& x) {
    for (const int b : binaries) {
      const double v = x[static_cast<std::size_t>(b)];
      if (std::min(v, 1.0 - v) > kMilpTolerance) return b;
    }
    return -1;
  };

  auto evaluate = [&](std::vector<double> lo, std::vector<double> hi) -> bool {
    // Returns false when the relaxation is unbounded.
    ++nodes;
    MilpSolution relax = run_lp(model, lo, hi);
    if (relax.status == SolveStatus::Unbounded) return false;
    if (relax.status != SolveStatus::Optimal) return true;
    if (relax.objective >= incumbent - 1e-9) return true;
    if (fractional_binary(relax.assignment) < 0) {
      incumbent = relax.objective;
      incumbent_assignment = std::move(relax.assignment);
      return true;
    }
    open.push_back({relax.objective, seq++, std::move(lo), std::move(hi),
                    std::move(relax.assignment)});
    std::push_heap(open.begin(), open.end(),
                   [&](const Node& a, const Node& b) { return node_less(b, a); });
    return true;
  };

  if (!evaluate(root_lo, root_hi)) {
    result.status = SolveStatus::Unbounded;
    result.nodes = nodes;
    result.best_bound = -kInf;
    return result;
  }

  auto open_bound = [&] {
    return open.empty() ? incumbent : open.front().bound;
  };

  while (!open.empty()) {
    if (nodes >= node_budget) {
      result.status = SolveStatus::BudgetExceeded;
      result.objective = incumbent;
      result.assignment = incumbent_assignment;
      result.best_bound = std::min(open_bound(), incumbent);
      result.nodes = nodes;
      return result;
    }
    std::pop_heap(open.begin(), open.end(),
                  [&](const Node& a, const Node& b) { return node_less(b, a); });
    Node node = std::move(open.back());
    open.pop_back();
    if (node.bound >= incumbent - 1e-9) continue;
    const int b = fractional_binary(node.relaxation);
    if (b < 0) continue;  // stale node that became integral after rounding tolerances

    std::vector<double> lo = node.lo;
    std::vector<double> hi = node.hi;
    hi[static_cast<std::size_t>(b)] = 0.0;  // down branch first
    if (!evaluate(std::move(lo), std::move(hi))) {
      result.status = SolveStatus::Unbounded;
      result.nodes = nodes;
      result.best_bound = -kInf;
      return result;
    }
    lo = node.lo;
    hi = node.hi;
    lo[static_cast<std::size_t>(b)] = 1.0;
    if (!evaluate(std::move(lo), std::move(hi))) {
      result.status = SolveStatus::Unbounded;
      result.nodes = nodes;
      result.best_bound = -kInf;
      return result;
    }
  }

  result.nodes = nodes;
  if (incumbent < kInf) {
    result.status = SolveStatus::Optimal;
    result.objective = incumbent;
    result.assignment = std::move(incumbent_assignment);
    result.best_bound = incumbent;
  } else {
    result.status = SolveStatus::Infeasible;
    result.best_bound = kInf;
  }
  return result;
}

void write_lp_format(const MilpModel& model, std::ostream& out) {
  auto var_name = [&](int j) {
    const auto& v = model.vars[static_cast<std::size_t>(j)];
    return v.name.empty() ? "v" + std::to_string(j) : v.name;
  };
  out << "Minimize\n obj:";
  bool first = true;
  for (std::size_t j = 0; j < model.objective.size(); ++j) {
    const double c = model.objective[j];
    if (c == 0.0) continue;
    out << (c < 0.0 ? " - " : (first ? " " : " + ")) << std::abs(c) << " "
        << var_name(static_cast<int>(j));
    first = false;
  }
  if (first) out << " 0 " << var_name(0);
  out << "\nSubject To\n";
  for (std::size_t r = 0; r < model.rows.size(); ++r) {
    const auto& row = model.rows[r];
    out << " c" << r << ":";
    bool row_first = true;
    for (const auto& [var, coeff] : row.terms) {
      out << (coeff < 0.0 ? " - " : (row_first ? " " : " + ")) << std::abs(coeff) << " "
          << var_name(var);
      row_first = false;
    }
    const char* rel = row.rel == MilpModel::Rel::Le ? "<=" : row.rel == MilpModel::Rel::Ge ? ">=" : "=";
    out << " " << rel << " " << row.rhs << "\n";
  }
  out << "Bounds\n";
  for (std::size_t j = 0; j < model.vars.size(); ++j) {
    const auto& v = model.vars[j];
    if (std::isfinite(v.lo) && std::isfinite(v.hi)) {
      out << " " << v.lo << " <= " << var_name(static_cast<int>(j)) << " <= " << v.hi << "\n";
    } else if (std::isfinite(v.lo)) {
      out << " " << var_name(static_cast<int>(j)) << " >= " << v.lo << "\n";
    } else if (std::isfinite(v.hi)) {
      out << " " << var_name(static_cast<int>(j)) << " <= " << v.hi << "\n";
    } else {
      out << " " << var_name(static_cast<int>(j)) << " free\n";
    }
  }
  bool any_binary = false;
  for (const auto& v : model.vars) any_binary |= v.is_binary;
  if (any_binary) {
    out << "Binaries\n";
    for (std::size_t j = 0; j < model.vars.size(); ++j) {
      if (model.vars[j].is_binary) out << " " << var_name(static_cast<int>(j)) << "\n";
    }
  }
  out << "End\n";
}

namespace {

RobustnessEncoding encode_impl(const IntervalHyperNetwork& hyper,
                               std::span<const Interval> input_box, int label,
                               const std::vector<std::vector<Interval>>& neuron_bounds,
                               std::span<const double> input_lower) {
  if (label != 1 && label != -1) throw std::invalid_argument("encode: label must be -1 or +1");
  const auto& sizes = hyper.architecture.layer_sizes;
  const std::size_t layers = hyper.architecture.num_layers();
  if (static_cast<int>(input_box.size()) != sizes.front()) {
    throw std::invalid_argument("encode: input box dimension mismatch");
  }
  if (neuron_bounds.size() != layers) {
    throw std::invalid_argument("encode: neuron bounds shape mismatch");
  }
  const bool penalized = !input_lower.empty();
  if (penalized && input_lower.size() != input_box.size()) {
    throw std::invalid_argument("encode: input lower bound size mismatch");
  }

  RobustnessEncoding enc;
  MilpModel& model = enc.model;

  std::vector<int> prev;  // variables feeding the next affine layer
  for (int j = 0; j < sizes.front(); ++j) {
    prev.push_back(model.add_variable(input_box[static_cast<std::size_t>(j)].lo,
                                      input_box[static_cast<std::size_t>(j)].hi, false,
                                      "x0_" + std::to_string(j + 1)));
  }

  for (std::size_t m = 0; m < layers; ++m) {
    const int out = sizes[m + 1];
    const int in = sizes[m];
    if (static_cast<int>(neuron_bounds[m].size()) != out) {
      throw std::invalid_argument("encode: neuron bounds shape mismatch at layer " +
                                  std::to_string(m + 1));
    }
    std::vector<int> next;
    for (int k = 0; k < out; ++k) {
      const Interval& bound = neuron_bounds[m][static_cast<std::size_t>(k)];
      if (!bound.finite()) {
        throw std::runtime_error("encode: non-finite bound for layer " + std::to_string(m + 1) +
                                 " neuron " + std::to_string(k + 1));
      }
      const std::string tag = std::to_string(m + 1) + "_" + std::to_string(k + 1);
      const int xhat = model.add_variable(bound.lo, bound.hi, false, "xh" + tag);

      double penalty = 0.0;
      std::vector<std::pair<int, double>> lo_terms{{xhat, 1.0}};
      std::vector<std::pair<int, double>> hi_terms{{xhat, 1.0}};
      for (int j = 0; j < in; ++j) {
        const Interval& w =
            hyper.weight_intervals[m][static_cast<std::size_t>(k) * static_cast<std::size_t>(in) +
                                      static_cast<std::size_t>(j)];
        lo_terms.push_back({prev[static_cast<std::size_t>(j)], -w.lo});
        hi_terms.push_back({prev[static_cast<std::size_t>(j)], -w.hi});
        if (penalized && m == 0) {
          penalty += (w.hi - w.lo) * std::max(0.0, -input_lower[static_cast<std::size_t>(j)]);
        }
      }
      const Interval& b = hyper.bias_intervals[m][static_cast<std::size_t>(k)];
      // l_W x + l_b - penalty <= xhat <= u_W x + u_b + penalty
      model.add_constraint(std::move(lo_terms), MilpModel::Rel::Ge, b.lo - penalty);
      model.add_constraint(std::move(hi_terms), MilpModel::Rel::Le, b.hi + penalty);

      if (m + 1 == layers) {
        enc.output_var = xhat;
        continue;
      }

      if (bound.lo >= 0.0) {
        // Stable active: the ReLU is the identity.
        const int x = model.add_variable(bound.lo, bound.hi, false, "x" + tag);
        model.add_constraint({{x, 1.0}, {xhat, -1.0}}, MilpModel::Rel::Eq, 0.0);
        next.push_back(x);
      } else if (bound.hi <= 0.0) {
        // Stable inactive: output pinned to zero.
        next.push_back(model.add_variable(0.0, 0.0, false, "x" + tag));
      } else {
        const int x = model.add_variable(0.0, bound.hi, false, "x" + tag);
        const int a = model.add_variable(0.0, 1.0, true, "a" + tag);
        model.add_constraint({{x, 1.0}, {xhat, -1.0}}, MilpModel::Rel::Ge, 0.0);
        model.add_constraint({{x, 1.0}, {xhat, -1.0}, {a, -bound.lo}}, MilpModel::Rel::Le,
                             -bound.lo);
        model.add_constraint({{x, 1.0}, {a, -bound.hi}}, MilpModel::Rel::Le, 0.0);
        ++enc.unstable_relus;
        next.push_back(x);
      }
    }
    if (m + 1 < layers) prev = std::move(next);
  }

  model.set_objective(enc.output_var, static_cast<double>(label));
  return enc;
}

}  // namespace

RobustnessEncoding encode_hyper_robustness(
    const IntervalHyperNetwork& hyper, std::span<const Interval> input_box, int label,
    const std::vector<std::vector<Interval>>& neuron_bounds) {
  for (const Interval& iv : input_box) {
    if (iv.lo < 0.0 || iv.hi > 1.0) {
      throw std::invalid_argument("encode_hyper_robustness: input box outside [0,1]");
    }
  }
  return encode_impl(hyper, input_box, label, neuron_bounds, {});
}

RobustnessEncoding encode_with_negative_lb(
    const IntervalHyperNetwork& hyper, std::span<const Interval> input_box, int label,
    const std::vector<std::vector<Interval>>& neuron_bounds, std::span<const double> input_lower) {
  for (const double l : input_lower) {
    if (!std::isfinite(l)) {
      throw std::invalid_argument("encode_with_negative_lb: non-finite input lower bound");
    }
  }
  return encode_impl(hyper, input_box, label, neuron_bounds, input_lower);
}

bool certified_robust(double objective, int label) {
  if (label != 1 && label != -1) throw std::invalid_argument("label must be -1 or +1");
  return label > 0 ? objective >= 0.0 : objective > 0.0;
}

}  // namespace ldcp
