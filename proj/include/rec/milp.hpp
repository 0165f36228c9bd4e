#pragma once

// Mixed-integer linear programs over bounded continuous and binary variables.
//
//   minimize    c'x + c0
//   subject to  rows (<=, =, >=)
//               lb <= x <= ub, x_j in {0,1} for binary j
//
// solve_lp() relaxes the binaries and runs a bounded-variable primal simplex;
// solve_milp() wraps it in best-bound branch-and-bound.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace rec::milp {

using VarId = int;

enum class VarKind : std::uint8_t { continuous, binary };
enum class Sense : std::uint8_t { le, eq, ge };

struct Term {
  VarId var;
  double coef;
};

// Affine expression sum(coef * var) + constant. Duplicate variables are
// allowed; they are merged when the expression becomes a row.
struct LinExpr {
  std::vector<Term> terms;
  double constant = 0.0;

  LinExpr() = default;
  LinExpr(double c) : constant(c) {}  // NOLINT(google-explicit-constructor)
  static LinExpr var(VarId v, double coef = 1.0) {
    LinExpr e;
    e.terms.push_back({v, coef});
    return e;
  }

  LinExpr& add(VarId v, double coef) {
    terms.push_back({v, coef});
    return *this;
  }
  LinExpr& operator+=(const LinExpr& o) {
    terms.insert(terms.end(), o.terms.begin(), o.terms.end());
    constant += o.constant;
    return *this;
  }
  LinExpr& operator-=(const LinExpr& o) {
    for (const Term& t : o.terms) terms.push_back({t.var, -t.coef});
    constant -= o.constant;
    return *this;
  }
  LinExpr& operator*=(double s) {
    for (Term& t : terms) t.coef *= s;
    constant *= s;
    return *this;
  }
  bool is_constant() const { return terms.empty(); }
  double evaluate(std::span<const double> values) const;
};

inline LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
inline LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
inline LinExpr operator*(double s, LinExpr a) { return a *= s; }

struct Variable {
  std::string name;
  double lb = 0.0;
  double ub = 0.0;
  VarKind kind = VarKind::continuous;
};

// One linear constraint: sum(coef * var) sense rhs.
struct ConstraintRow {
  std::string name;
  std::vector<Term> terms;
  Sense sense = Sense::le;
  double rhs = 0.0;
};

class Problem {
 public:
  VarId add_variable(std::string name, double lb, double ub, VarKind kind = VarKind::continuous);
  VarId add_binary(std::string name) { return add_variable(std::move(name), 0.0, 1.0, VarKind::binary); }

  // Moves the constant of `expr` to the right-hand side and merges duplicate
  // terms. Returns the row index.
  int add_row(std::string name, const LinExpr& expr, Sense sense, double rhs);

  void add_objective(const LinExpr& expr);
  void set_bounds(VarId v, double lb, double ub);

  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<ConstraintRow>& rows() const { return rows_; }
  const std::vector<double>& objective() const { return cost_; }
  double objective_constant() const { return cost_constant_; }
  int num_variables() const { return static_cast<int>(vars_.size()); }
  int num_rows() const { return static_cast<int>(rows_.size()); }
  int num_binaries() const;

  std::optional<VarId> find(const std::string& name) const;
  double objective_value(std::span<const double> values) const;

  // Throws std::invalid_argument when an invariant is broken: infinite or
  // inverted bounds, binaries outside [0,1], rows referencing unknown vars.
  void check() const;

 private:
  std::vector<Variable> vars_;
  std::vector<ConstraintRow> rows_;
  std::vector<double> cost_;
  double cost_constant_ = 0.0;
  std::unordered_map<std::string, VarId> by_name_;
};

enum class Status { optimal, infeasible, iteration_limit };
const char* to_string(Status s);

struct SolveStats {
  long pivots = 0;
  long nodes = 0;
  long lp_solves = 0;
  long weak_duality_violations = 0;
  double root_bound = 0.0;
};

struct Solution {
  Status status = Status::infeasible;
  std::vector<double> values;
  double objective = 0.0;
  SolveStats stats;

  bool has_values() const { return !values.empty(); }
  double value(VarId v) const { return values.at(static_cast<std::size_t>(v)); }
};

struct LpOptions {
  double primal_tol = 1e-9;
  double dual_tol = 1e-9;
  // Pivot budget; < 0 selects 105 * (m + n).
  long max_pivots = -1;
};

struct MilpOptions {
  double abs_gap = 1e-6;
  double rel_gap = 0.0;
  double int_tol = 1e-6;
  long max_nodes = -1;  // < 0: unlimited
  // Past this many nodes, stop at the first moment an incumbent exists and
  // report iteration_limit with that incumbent. < 0: never.
  long soft_node_limit = -1;
  LpOptions lp;
  // Optional starting assignment (indexed by VarId); only binaries are read.
  std::vector<double> start;
};

Solution solve_lp(const Problem& problem, const LpOptions& options = {});
Solution solve_milp(const Problem& problem, const MilpOptions& options = {});

// Largest absolute violation of any row or bound by `values`.
double max_violation(const Problem& problem, std::span<const double> values);

// CPLEX-style LP text dump (Minimize / Subject To / Bounds / Binaries / End).
void write_lp(const Problem& problem, std::ostream& out);

}  // namespace rec::milp
