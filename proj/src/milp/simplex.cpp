#include "simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rec::milp::detail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;
constexpr double kEtaDropTol = 1e-14;
constexpr int kRefactorEvery = 64;

}  // namespace

// ---- BasisFactor -----------------------------------------------------------

bool BasisFactor::factor(const Columns& cols, const std::vector<int>& basis) {
  cols_ = cols;
  basis_ = basis;
  etas_.clear();
  const int m = cols.m;
  logical_pos_of_row_.assign(static_cast<std::size_t>(m), -1);
  kernel_pos_.clear();
  for (int p = 0; p < m; ++p) {
    const int j = basis[static_cast<std::size_t>(p)];
    if (j >= cols.n) {
      logical_pos_of_row_[static_cast<std::size_t>(j - cols.n)] = p;
    } else {
      kernel_pos_.push_back(p);
    }
  }
  kernel_row_.clear();
  kernel_index_of_row_.assign(static_cast<std::size_t>(m), -1);
  for (int i = 0; i < m; ++i) {
    if (logical_pos_of_row_[static_cast<std::size_t>(i)] < 0) {
      kernel_index_of_row_[static_cast<std::size_t>(i)] = static_cast<int>(kernel_row_.size());
      kernel_row_.push_back(i);
    }
  }
  const int k = static_cast<int>(kernel_row_.size());
  if (k != static_cast<int>(kernel_pos_.size())) return false;
  work_.resize(k);
  if (k == 0) return true;

  std::vector<Eigen::Triplet<double>> entries;
  for (int c = 0; c < k; ++c) {
    const int j = basis[static_cast<std::size_t>(kernel_pos_[static_cast<std::size_t>(c)])];
    for (int e = (*cols.start)[static_cast<std::size_t>(j)]; e < (*cols.start)[static_cast<std::size_t>(j) + 1]; ++e) {
      const int r = kernel_index_of_row_[static_cast<std::size_t>((*cols.index)[static_cast<std::size_t>(e)])];
      if (r >= 0) entries.emplace_back(r, c, (*cols.value)[static_cast<std::size_t>(e)]);
    }
  }
  Eigen::SparseMatrix<double> kernel(k, k);
  kernel.setFromTriplets(entries.begin(), entries.end());
  kernel.makeCompressed();
  lu_.compute(kernel);
  return lu_.info() == Eigen::Success;
}

void BasisFactor::ftran(std::vector<double>& v) const {
  const int m = cols_.m;
  const int k = static_cast<int>(kernel_row_.size());
  std::vector<double> out(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i) {
    const int p = logical_pos_of_row_[static_cast<std::size_t>(i)];
    if (p >= 0) out[static_cast<std::size_t>(p)] = -v[static_cast<std::size_t>(i)];
  }
  if (k > 0) {
    for (int c = 0; c < k; ++c) work_[c] = v[static_cast<std::size_t>(kernel_row_[static_cast<std::size_t>(c)])];
    work_ = lu_.solve(work_);
    for (int c = 0; c < k; ++c) {
      const double xs = work_[c];
      out[static_cast<std::size_t>(kernel_pos_[static_cast<std::size_t>(c)])] = xs;
      if (xs == 0.0) continue;
      const int j = basis_[static_cast<std::size_t>(kernel_pos_[static_cast<std::size_t>(c)])];
      for (int e = (*cols_.start)[static_cast<std::size_t>(j)]; e < (*cols_.start)[static_cast<std::size_t>(j) + 1]; ++e) {
        const int p = logical_pos_of_row_[static_cast<std::size_t>((*cols_.index)[static_cast<std::size_t>(e)])];
        if (p >= 0) out[static_cast<std::size_t>(p)] += (*cols_.value)[static_cast<std::size_t>(e)] * xs;
      }
    }
  }
  for (const Eta& eta : etas_) {
    const double xr = out[static_cast<std::size_t>(eta.position)] / eta.pivot;
    out[static_cast<std::size_t>(eta.position)] = xr;
    if (xr == 0.0) continue;
    for (const auto& [i, a] : eta.others) out[static_cast<std::size_t>(i)] -= a * xr;
  }
  v.swap(out);
}

void BasisFactor::btran(std::vector<double>& v) const {
  for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
    double s = v[static_cast<std::size_t>(it->position)];
    for (const auto& [i, a] : it->others) s -= a * v[static_cast<std::size_t>(i)];
    v[static_cast<std::size_t>(it->position)] = s / it->pivot;
  }
  const int m = cols_.m;
  const int k = static_cast<int>(kernel_row_.size());
  std::vector<double> y(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i) {
    const int p = logical_pos_of_row_[static_cast<std::size_t>(i)];
    if (p >= 0) y[static_cast<std::size_t>(i)] = -v[static_cast<std::size_t>(p)];
  }
  if (k > 0) {
    for (int c = 0; c < k; ++c) {
      const int pos = kernel_pos_[static_cast<std::size_t>(c)];
      double rhs = v[static_cast<std::size_t>(pos)];
      const int j = basis_[static_cast<std::size_t>(pos)];
      for (int e = (*cols_.start)[static_cast<std::size_t>(j)]; e < (*cols_.start)[static_cast<std::size_t>(j) + 1]; ++e) {
        const int row = (*cols_.index)[static_cast<std::size_t>(e)];
        if (logical_pos_of_row_[static_cast<std::size_t>(row)] >= 0)
          rhs -= (*cols_.value)[static_cast<std::size_t>(e)] * y[static_cast<std::size_t>(row)];
      }
      work_[c] = rhs;
    }
    work_ = lu_.transpose().solve(work_);
    for (int c = 0; c < k; ++c) y[static_cast<std::size_t>(kernel_row_[static_cast<std::size_t>(c)])] = work_[c];
  }
  v.swap(y);
}

void BasisFactor::update(int position, const std::vector<double>& alpha) {
  Eta eta;
  eta.position = position;
  eta.pivot = alpha[static_cast<std::size_t>(position)];
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (static_cast<int>(i) != position && std::abs(alpha[i]) > kEtaDropTol)
      eta.others.emplace_back(static_cast<int>(i), alpha[i]);
  }
  etas_.push_back(std::move(eta));
}

// ---- BoundedSimplex ---------------------------------------------------------

BoundedSimplex::BoundedSimplex(const Problem& problem) {
  n_ = problem.num_variables();
  const auto& rows = problem.rows();
  std::vector<int> kept;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!rows[r].terms.empty()) {
      kept.push_back(static_cast<int>(r));
      continue;
    }
    // Empty rows are dropped; an empty row that 0 cannot satisfy makes the
    // whole problem infeasible.
    const double rhs = rows[r].rhs;
    const bool ok = rows[r].sense == Sense::le   ? rhs >= -1e-9
                    : rows[r].sense == Sense::ge ? rhs <= 1e-9
                                                 : std::abs(rhs) <= 1e-9;
    if (!ok) empty_row_infeasible_ = true;
  }
  m_ = static_cast<int>(kept.size());

  std::vector<int> count(static_cast<std::size_t>(n_) + 1, 0);
  for (int r : kept)
    for (const Term& t : rows[static_cast<std::size_t>(r)].terms) ++count[static_cast<std::size_t>(t.var) + 1];
  col_start_.assign(static_cast<std::size_t>(n_) + 1, 0);
  for (int j = 0; j < n_; ++j)
    col_start_[static_cast<std::size_t>(j) + 1] = col_start_[static_cast<std::size_t>(j)] + count[static_cast<std::size_t>(j) + 1];
  row_index_.resize(static_cast<std::size_t>(col_start_.back()));
  value_.resize(static_cast<std::size_t>(col_start_.back()));
  std::vector<int> fill(col_start_.begin(), col_start_.end() - 1);
  for (int i = 0; i < m_; ++i) {
    for (const Term& t : rows[static_cast<std::size_t>(kept[static_cast<std::size_t>(i)])].terms) {
      const int e = fill[static_cast<std::size_t>(t.var)]++;
      row_index_[static_cast<std::size_t>(e)] = i;
      value_[static_cast<std::size_t>(e)] = t.coef;
    }
  }

  const std::size_t total = static_cast<std::size_t>(n_ + m_);
  lb_.resize(total);
  ub_.resize(total);
  cost_.assign(total, 0.0);
  x_.assign(total, 0.0);
  status_.assign(total, VarStatus::at_lower);
  const auto& vars = problem.variables();
  for (int j = 0; j < n_; ++j) {
    lb_[static_cast<std::size_t>(j)] = vars[static_cast<std::size_t>(j)].lb;
    ub_[static_cast<std::size_t>(j)] = vars[static_cast<std::size_t>(j)].ub;
    cost_[static_cast<std::size_t>(j)] = problem.objective()[static_cast<std::size_t>(j)];
  }
  for (int i = 0; i < m_; ++i) {
    const ConstraintRow& row = rows[static_cast<std::size_t>(kept[static_cast<std::size_t>(i)])];
    const std::size_t l = static_cast<std::size_t>(n_ + i);
    lb_[l] = row.sense == Sense::le ? -kInf : row.rhs;
    ub_[l] = row.sense == Sense::ge ? kInf : row.rhs;
  }
  cost_constant_ = problem.objective_constant();
}

void BoundedSimplex::set_bounds(int j, double lb, double ub) {
  lb_[static_cast<std::size_t>(j)] = lb;
  ub_[static_cast<std::size_t>(j)] = ub;
}

void BoundedSimplex::nonbasic_to_bound(int j) {
  const std::size_t s = static_cast<std::size_t>(j);
  if (status_[s] == VarStatus::at_lower && !std::isfinite(lb_[s])) status_[s] = VarStatus::at_upper;
  if (status_[s] == VarStatus::at_upper && !std::isfinite(ub_[s])) status_[s] = VarStatus::at_lower;
  x_[s] = status_[s] == VarStatus::at_lower ? lb_[s] : ub_[s];
}

void BoundedSimplex::slack_basis() {
  basis_.resize(static_cast<std::size_t>(m_));
  for (int j = 0; j < n_; ++j)
    status_[static_cast<std::size_t>(j)] = cost_[static_cast<std::size_t>(j)] < 0.0 ? VarStatus::at_upper : VarStatus::at_lower;
  for (int i = 0; i < m_; ++i) {
    status_[static_cast<std::size_t>(n_ + i)] = VarStatus::basic;
    basis_[static_cast<std::size_t>(i)] = n_ + i;
  }
  factor_valid_ = false;
}

bool BoundedSimplex::load_basis(const std::vector<VarStatus>& basis) {
  if (basis.size() != status_.size()) return false;
  if (std::count(basis.begin(), basis.end(), VarStatus::basic) != m_) return false;
  status_ = basis;
  basis_.clear();
  for (int j = 0; j < n_ + m_; ++j)
    if (status_[static_cast<std::size_t>(j)] == VarStatus::basic) basis_.push_back(j);
  factor_valid_ = false;
  return true;
}

bool BoundedSimplex::refactor() {
  BasisFactor::Columns cols{n_, m_, &col_start_, &row_index_, &value_};
  factor_valid_ = factor_.factor(cols, basis_);
  return factor_valid_;
}

void BoundedSimplex::compute_basic_values() {
  std::vector<double> rhs(static_cast<std::size_t>(m_), 0.0);
  for (int j = 0; j < n_ + m_; ++j) {
    const std::size_t s = static_cast<std::size_t>(j);
    if (status_[s] == VarStatus::basic || x_[s] == 0.0) continue;
    if (j < n_) {
      for (int e = col_start_[s]; e < col_start_[s + 1]; ++e)
        rhs[static_cast<std::size_t>(row_index_[static_cast<std::size_t>(e)])] -= value_[static_cast<std::size_t>(e)] * x_[s];
    } else {
      rhs[static_cast<std::size_t>(j - n_)] += x_[s];
    }
  }
  factor_.ftran(rhs);
  for (int p = 0; p < m_; ++p) x_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(p)])] = rhs[static_cast<std::size_t>(p)];
}

double BoundedSimplex::objective_value() const {
  double v = cost_constant_;
  for (int j = 0; j < n_; ++j) v += cost_[static_cast<std::size_t>(j)] * x_[static_cast<std::size_t>(j)];
  return v;
}

LpRun BoundedSimplex::solve(const LpOptions& options, const std::vector<VarStatus>* basis) {
  LpRun run;
  if (empty_row_infeasible_) return run;
  for (int j = 0; j < n_; ++j) {
    if (lb_[static_cast<std::size_t>(j)] > ub_[static_cast<std::size_t>(j)] + options.primal_tol) return run;
  }

  if (basis) {
    if (!load_basis(*basis)) slack_basis();
  } else if (basis_.size() != static_cast<std::size_t>(m_) || (m_ > 0 && basis_.empty())) {
    slack_basis();
  }
  if (basis_.empty() && m_ > 0) slack_basis();
  for (int j = 0; j < n_ + m_; ++j)
    if (status_[static_cast<std::size_t>(j)] != VarStatus::basic) nonbasic_to_bound(j);
  if (!factor_valid_ && !refactor()) {
    slack_basis();
    for (int j = 0; j < n_ + m_; ++j)
      if (status_[static_cast<std::size_t>(j)] != VarStatus::basic) nonbasic_to_bound(j);
    if (!refactor()) {
      run.status = Status::iteration_limit;
      return run;
    }
  }
  compute_basic_values();

  const long size = static_cast<long>(n_ + m_);
  const long max_pivots = options.max_pivots >= 0 ? options.max_pivots : 105 * size + 100;
  const long bland_after = 10 * size;
  const double ptol = options.primal_tol;
  const double dtol = options.dual_tol;
  const std::size_t m = static_cast<std::size_t>(m_);

  std::vector<double> cb(m), y(m), alpha(m);
  bool verified = false;
  long iter = 0;

  for (;;) {
    if (iter >= max_pivots) {
      run.status = Status::iteration_limit;
      run.pivots = iter;
      return run;
    }
    if (factor_.updates() >= kRefactorEvery) {
      if (!refactor()) {
        run.status = Status::iteration_limit;
        run.pivots = iter;
        return run;
      }
      compute_basic_values();
    }

    bool phase1 = false;
    for (std::size_t p = 0; p < m; ++p) {
      const std::size_t v = static_cast<std::size_t>(basis_[p]);
      if (x_[v] < lb_[v] - ptol) {
        cb[p] = -1.0;
        phase1 = true;
      } else if (x_[v] > ub_[v] + ptol) {
        cb[p] = 1.0;
        phase1 = true;
      } else {
        cb[p] = 0.0;
      }
    }
    if (!phase1)
      for (std::size_t p = 0; p < m; ++p) cb[p] = cost_[static_cast<std::size_t>(basis_[p])];
    y = cb;
    factor_.btran(y);

    // Pricing: Dantzig, switching to Bland's rule once degeneracy has eaten
    // the first 10 (m + n) iterations.
    const bool bland = iter >= bland_after;
    int q = -1;
    int dir = 0;
    double best = 0.0;
    for (int j = 0; j < n_ + m_; ++j) {
      const std::size_t s = static_cast<std::size_t>(j);
      if (status_[s] == VarStatus::basic || lb_[s] == ub_[s]) continue;
      double d = phase1 ? 0.0 : cost_[s];
      if (j < n_) {
        for (int e = col_start_[s]; e < col_start_[s + 1]; ++e)
          d -= value_[static_cast<std::size_t>(e)] * y[static_cast<std::size_t>(row_index_[static_cast<std::size_t>(e)])];
      } else {
        d += y[static_cast<std::size_t>(j - n_)];
      }
      int jdir = 0;
      if (status_[s] == VarStatus::at_lower && d < -dtol) jdir = 1;
      if (status_[s] == VarStatus::at_upper && d > dtol) jdir = -1;
      if (jdir == 0) continue;
      if (bland) {
        q = j;
        dir = jdir;
        break;
      }
      if (std::abs(d) > best) {
        best = std::abs(d);
        q = j;
        dir = jdir;
      }
    }

    if (q < 0) {
      if (!verified && factor_.updates() > 0) {
        if (!refactor()) {
          run.status = Status::iteration_limit;
          run.pivots = iter;
          return run;
        }
        compute_basic_values();
        verified = true;
        continue;
      }
      run.pivots = iter;
      if (phase1) {
        run.status = Status::infeasible;
        return run;
      }
      run.status = Status::optimal;
      run.objective = objective_value();
      duals_ = y;
      return run;
    }
    verified = false;

    std::fill(alpha.begin(), alpha.end(), 0.0);
    const std::size_t qs = static_cast<std::size_t>(q);
    if (q < n_) {
      for (int e = col_start_[qs]; e < col_start_[qs + 1]; ++e)
        alpha[static_cast<std::size_t>(row_index_[static_cast<std::size_t>(e)])] = value_[static_cast<std::size_t>(e)];
    } else {
      alpha[static_cast<std::size_t>(q - n_)] = -1.0;
    }
    factor_.ftran(alpha);

    // Ratio test. Feasible basics stop at the bound they move towards;
    // infeasible ones moving towards feasibility stop when they reach it.
    auto limit = [&](std::size_t p, double& exact, double& relaxed, double& target) -> bool {
      const double a = alpha[p];
      if (std::abs(a) <= kPivotTol) return false;
      const std::size_t v = static_cast<std::size_t>(basis_[p]);
      const double g = -dir * a;
      const double xv = x_[v];
      if (g < 0.0) {
        if (xv < lb_[v] - ptol) return false;
        target = xv > ub_[v] + ptol ? ub_[v] : lb_[v];
        if (!std::isfinite(target)) return false;
        exact = (xv - target) / -g;
        relaxed = (xv - target + ptol) / -g;
      } else {
        if (xv > ub_[v] + ptol) return false;
        target = xv < lb_[v] - ptol ? lb_[v] : ub_[v];
        if (!std::isfinite(target)) return false;
        exact = (target - xv) / g;
        relaxed = (target - xv + ptol) / g;
      }
      return true;
    };

    double theta_max = kInf;
    for (std::size_t p = 0; p < m; ++p) {
      double exact, relaxed, target;
      if (limit(p, exact, relaxed, target)) theta_max = std::min(theta_max, bland ? exact : relaxed);
    }
    int r = -1;
    double step = kInf;
    double leave_target = 0.0;
    double best_abs = 0.0;
    for (std::size_t p = 0; p < m; ++p) {
      double exact, relaxed, target;
      if (!limit(p, exact, relaxed, target) || exact > theta_max) continue;
      if (bland) {
        if (r < 0 || exact < step - 1e-12 ||
            (exact <= step + 1e-12 && basis_[p] < basis_[static_cast<std::size_t>(r)])) {
          r = static_cast<int>(p);
          step = exact;
          leave_target = target;
        }
      } else if (std::abs(alpha[p]) > best_abs) {
        best_abs = std::abs(alpha[p]);
        r = static_cast<int>(p);
        step = exact;
        leave_target = target;
      }
    }
    step = std::max(step, 0.0);
    const double flip = ub_[qs] - lb_[qs];
    const bool do_flip = std::isfinite(flip) && (r < 0 || flip <= step);
    if (r < 0 && !do_flip) {
      // Unbounded ray; impossible with boxed structurals unless numerics broke.
      run.status = Status::iteration_limit;
      run.pivots = iter;
      return run;
    }
    if (do_flip) step = flip;

    x_[qs] += dir * step;
    for (std::size_t p = 0; p < m; ++p)
      if (alpha[p] != 0.0) x_[static_cast<std::size_t>(basis_[p])] -= dir * step * alpha[p];
    ++iter;

    if (do_flip) {
      status_[qs] = dir > 0 ? VarStatus::at_upper : VarStatus::at_lower;
      x_[qs] = dir > 0 ? ub_[qs] : lb_[qs];
      continue;
    }
    const std::size_t leaving = static_cast<std::size_t>(basis_[static_cast<std::size_t>(r)]);
    x_[leaving] = leave_target;
    status_[leaving] = leave_target == lb_[leaving] ? VarStatus::at_lower : VarStatus::at_upper;
    basis_[static_cast<std::size_t>(r)] = q;
    status_[qs] = VarStatus::basic;
    factor_.update(r, alpha);
  }
}

double BoundedSimplex::reduced_cost(int j) const {
  const std::size_t s = static_cast<std::size_t>(j);
  double d = cost_[s];
  for (int e = col_start_[s]; e < col_start_[s + 1]; ++e)
    d -= value_[static_cast<std::size_t>(e)] * duals_[static_cast<std::size_t>(row_index_[static_cast<std::size_t>(e)])];
  return d;
}

}  // namespace rec::milp::detail
