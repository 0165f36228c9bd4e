#pragma once

// Bounded-variable revised primal simplex used for every LP relaxation.
//
// Each row i gets a logical variable r_i = a_i x whose bounds encode the row
// sense, so the working system is [A -I] (x, r) = 0 with every variable
// boxed. Phase 1 minimizes the sum of bound infeasibilities of the basic
// variables starting from whatever basis is loaded, which lets branch-and-bound
// children restart from their parent's basis.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include "rec/milp.hpp"

namespace rec::milp::detail {

enum class VarStatus : std::uint8_t { basic, at_lower, at_upper };

// B^{-1} kept as a sparse LU of the structural kernel plus a product-form eta
// file. Logical basis columns are unit vectors and never enter the kernel.
class BasisFactor {
 public:
  struct Columns {
    int n = 0;  // structural count; ids >= n are logicals
    int m = 0;
    const std::vector<int>* start = nullptr;
    const std::vector<int>* index = nullptr;
    const std::vector<double>* value = nullptr;
  };

  bool factor(const Columns& cols, const std::vector<int>& basis);
  // v (row space) -> B^{-1} v (position space)
  void ftran(std::vector<double>& v) const;
  // v (position space) -> B^{-T} v (row space)
  void btran(std::vector<double>& v) const;
  void update(int position, const std::vector<double>& alpha);
  int updates() const { return static_cast<int>(etas_.size()); }

 private:
  struct Eta {
    int position;
    double pivot;
    std::vector<std::pair<int, double>> others;
  };

  Columns cols_;
  std::vector<int> basis_;
  std::vector<int> logical_pos_of_row_;  // -1 when the row is in the kernel
  std::vector<int> kernel_row_;          // kernel index -> row
  std::vector<int> kernel_pos_;          // kernel index -> basis position
  std::vector<int> kernel_index_of_row_;
  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
  std::vector<Eta> etas_;
  mutable Eigen::VectorXd work_;
};

struct LpRun {
  Status status = Status::infeasible;
  double objective = 0.0;
  long pivots = 0;
};

class BoundedSimplex {
 public:
  explicit BoundedSimplex(const Problem& problem);

  int structurals() const { return n_; }
  void set_bounds(int j, double lb, double ub);
  double lower(int j) const { return lb_[static_cast<std::size_t>(j)]; }
  double upper(int j) const { return ub_[static_cast<std::size_t>(j)]; }

  // Warm start from `basis` when given (size n + m); otherwise reuse the
  // basis left by the previous call, or the slack basis on the first call.
  LpRun solve(const LpOptions& options, const std::vector<VarStatus>* basis = nullptr);

  const std::vector<double>& values() const { return x_; }  // first n entries are structurals
  const std::vector<VarStatus>& basis() const { return status_; }
  // Reduced cost of structural j at the last optimal solve.
  double reduced_cost(int j) const;

 private:
  void slack_basis();
  bool load_basis(const std::vector<VarStatus>& basis);
  bool refactor();
  void compute_basic_values();
  void nonbasic_to_bound(int j);
  double objective_value() const;

  int n_ = 0;
  int m_ = 0;
  bool empty_row_infeasible_ = false;
  double cost_constant_ = 0.0;
  std::vector<int> col_start_;
  std::vector<int> row_index_;
  std::vector<double> value_;
  std::vector<double> lb_, ub_, cost_, x_;
  std::vector<double> duals_;
  std::vector<VarStatus> status_;
  std::vector<int> basis_;
  BasisFactor factor_;
  bool factor_valid_ = false;
};

}  // namespace rec::milp::detail
