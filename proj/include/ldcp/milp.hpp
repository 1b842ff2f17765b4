#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ldcp/hypernet.hpp"
#include "ldcp/interval.hpp"

namespace ldcp {

/// Mixed-integer linear program: continuous variables with bounds, binary
/// variables, sparse linear constraints, and a linear objective (minimize).
struct MilpModel {
  struct Variable {
    double lo = 0.0;
    double hi = 0.0;
    bool is_binary = false;
    std::string name;
  };
  enum class Rel { Le, Ge, Eq };
  struct Constraint {
    std::vector<std::pair<int, double>> terms;
    Rel rel = Rel::Le;
    double rhs = 0.0;
  };

  std::vector<Variable> vars;
  std::vector<Constraint> rows;
  std::vector<double> objective;

  int add_variable(double lo, double hi, bool is_binary, std::string name);
  void add_constraint(std::vector<std::pair<int, double>> terms, Rel rel, double rhs);
  void set_objective(int var, double coeff);
  void validate() const;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, BudgetExceeded };

struct MilpSolution {
  SolveStatus status = SolveStatus::Infeasible;
  double objective = 0.0;          // optimum, or best incumbent on BudgetExceeded
  std::vector<double> assignment;  // per-variable values (empty if none found)
  double best_bound = 0.0;         // proven lower bound on the optimum
  long nodes = 0;                  // LP relaxations solved
};

/// Feasibility / integrality tolerance used throughout the solver.
constexpr double kMilpTolerance = 1e-6;

/// Two-phase bounded-variable revised simplex; binary markers are ignored
/// and those variables are treated as continuous within their bounds.
MilpSolution solve_lp(const MilpModel& model);

/// Same, with per-variable bound overrides (used by branch and bound).
MilpSolution solve_lp(const MilpModel& model, std::span<const double> lo,
                      std::span<const double> hi);

/// Best-first branch and bound over fractional binaries. Deterministic:
/// branches on the lowest-index fractional binary, explores the down-branch
/// first, and breaks bound ties by node creation order.
MilpSolution solve_milp(const MilpModel& model, long node_budget = 200000);

/// Writes the model in LP textual format (diagnostic output).
void write_lp_format(const MilpModel& model, std::ostream& out);

/// MILP encoding of hyper-network local robustness over an input box.
/// Every affine neuron gets two inequality rows
///   sum l_w x + l_b <= xhat <= sum u_w x + u_b,
/// unstable ReLUs get the four-constraint big-M encoding with one binary,
/// stable ReLUs are fixed linearly, and the objective is minimize
/// label * output. neuron_bounds must come from propagate_bounds over the
/// same box.
struct RobustnessEncoding {
  MilpModel model;
  int output_var = -1;
  int unstable_relus = 0;
};

RobustnessEncoding encode_hyper_robustness(const IntervalHyperNetwork& hyper,
                                           std::span<const Interval> input_box, int label,
                                           const std::vector<std::vector<Interval>>& neuron_bounds);

/// Variant for inputs that may be negative: each first-layer affine row is
/// relaxed by the constant penalty sum_j (u_w - l_w) * max(0, -input_lower_j).
/// Rows coincide with encode_hyper_robustness when input_lower >= 0.
/// neuron_bounds must come from propagate_bounds_penalized.
RobustnessEncoding encode_with_negative_lb(const IntervalHyperNetwork& hyper,
                                           std::span<const Interval> input_box, int label,
                                           const std::vector<std::vector<Interval>>& neuron_bounds,
                                           std::span<const double> input_lower);

/// Tie convention at the decision threshold: label +1 is robust iff the
/// minimized score is >= 0, label -1 iff the minimized negated score is > 0.
bool certified_robust(double objective, int label);

}  // namespace ldcp
