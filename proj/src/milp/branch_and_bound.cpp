// Best-bound branch-and-bound over the binaries of a Problem.
//
// Search order: depth-first dive (heavier child first) until the first
// incumbent exists. After that each node's preferred child is solved next
// (a plunge) and the other child is queued; when a plunge ends the queue
// yields the best bound, ties broken by node creation order.
//
// Rows of the form sum x <= 1 or = 1 over binaries with unit coefficients
// are branched on as a whole: the candidates are split at the median of the
// LP mass and each child forbids one side. This is far more balanced than
// fixing one binary of a long choose-one row. Otherwise the most fractional
// binary is branched on, lowest index on ties.

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "rec/milp.hpp"
#include "simplex.hpp"

namespace rec::milp {

using detail::BoundedSimplex;
using detail::VarStatus;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> clamped_values(const Problem& problem, const BoundedSimplex& lp) {
  const auto& vars = problem.variables();
  std::vector<double> x(lp.values().begin(), lp.values().begin() + problem.num_variables());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = std::clamp(x[j], vars[j].lb, vars[j].ub);
  return x;
}

struct Node {
  long id = 0;
  double bound = -kInf;
  std::vector<std::pair<int, std::int8_t>> fixes;
  std::vector<VarStatus> basis;
};

struct WorseNode {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id > b.id;
  }
};

class BranchAndBound {
 public:
  BranchAndBound(const Problem& problem, const MilpOptions& options)
      : problem_(problem), options_(options), lp_(problem) {
    for (int j = 0; j < problem.num_variables(); ++j)
      if (problem.variables()[static_cast<std::size_t>(j)].kind == VarKind::binary) binaries_.push_back(j);
    for (const ConstraintRow& row : problem.rows()) {
      if (row.sense == Sense::ge || row.rhs != 1.0 || row.terms.size() < 2) continue;
      const bool unit = std::all_of(row.terms.begin(), row.terms.end(), [&](const Term& t) {
        return t.coef == 1.0 && problem.variables()[static_cast<std::size_t>(t.var)].kind == VarKind::binary;
      });
      if (!unit) continue;
      std::vector<int> members;
      for (const Term& t : row.terms) members.push_back(t.var);
      choose_one_.push_back(std::move(members));
    }
  }

  Solution run() {
    Solution out;
    if (!options_.start.empty()) try_start();

    detail::LpRun root = solve_with({}, nullptr);
    if (root.status == Status::iteration_limit) {
      trouble_ = true;
    } else if (root.status == Status::optimal) {
      stats_.root_bound = root.objective;
      Node node;
      node.id = next_id_++;
      node.bound = root.objective;
      process(node, root);
      search();
    }

    out.stats = stats_;
    if (has_incumbent_) {
      if (incumbent_obj_ < stats_.root_bound - 1e-7 * (1.0 + std::abs(stats_.root_bound)))
        ++out.stats.weak_duality_violations;
      out.status = (limit_hit_ || trouble_) ? Status::iteration_limit : Status::optimal;
      out.values = incumbent_;
      out.objective = problem_.objective_value(out.values);
    } else {
      out.status = (trouble_ || limit_hit_) ? Status::iteration_limit : Status::infeasible;
    }
    return out;
  }

 private:
  double cutoff() const {
    if (!has_incumbent_) return kInf;
    return incumbent_obj_ - std::max(options_.abs_gap, options_.rel_gap * std::abs(incumbent_obj_));
  }

  void apply_fixes(const std::vector<std::pair<int, std::int8_t>>& fixes) {
    for (int j : fixed_now_) {
      const Variable& v = problem_.variables()[static_cast<std::size_t>(j)];
      lp_.set_bounds(j, v.lb, v.ub);
    }
    fixed_now_.clear();
    for (const auto& [j, val] : fixes) {
      lp_.set_bounds(j, val, val);
      fixed_now_.push_back(j);
    }
  }

  detail::LpRun solve_with(const std::vector<std::pair<int, std::int8_t>>& fixes,
                           const std::vector<VarStatus>* basis) {
    apply_fixes(fixes);
    detail::LpRun r = lp_.solve(options_.lp, basis);
    ++stats_.lp_solves;
    stats_.pivots += r.pivots;
    return r;
  }

  // Fix every binary to its rounded value and re-solve the continuous part so
  // the incumbent satisfies the rows exactly, not just within int_tol.
  void try_integral(const std::vector<double>& x) {
    std::vector<std::pair<int, std::int8_t>> all;
    all.reserve(binaries_.size());
    for (int j : binaries_) all.emplace_back(j, static_cast<std::int8_t>(x[static_cast<std::size_t>(j)] > 0.5 ? 1 : 0));
    detail::LpRun r = solve_with(all, nullptr);
    if (r.status == Status::optimal && (!has_incumbent_ || r.objective < incumbent_obj_)) {
      incumbent_ = clamped_values(problem_, lp_);
      for (const auto& [j, val] : all) incumbent_[static_cast<std::size_t>(j)] = val;
      incumbent_obj_ = problem_.objective_value(incumbent_);
      has_incumbent_ = true;
    }
  }

  void try_start() {
    if (options_.start.size() != static_cast<std::size_t>(problem_.num_variables())) return;
    std::vector<std::pair<int, std::int8_t>> all;
    for (int j : binaries_) {
      const Variable& v = problem_.variables()[static_cast<std::size_t>(j)];
      const std::int8_t val = options_.start[static_cast<std::size_t>(j)] > 0.5 ? 1 : 0;
      if (val < v.lb || val > v.ub) return;
      all.emplace_back(j, val);
    }
    detail::LpRun r = solve_with(all, nullptr);
    if (r.status == Status::optimal) {
      incumbent_ = clamped_values(problem_, lp_);
      for (const auto& [j, val] : all) incumbent_[static_cast<std::size_t>(j)] = val;
      incumbent_obj_ = problem_.objective_value(incumbent_);
      has_incumbent_ = true;
    }
  }

  // `lp_` holds the solved relaxation of `node`.
  void process(const Node& node, const detail::LpRun& run) {
    ++stats_.nodes;
    if (run.status == Status::iteration_limit) {
      trouble_ = true;
      return;
    }
    if (run.status != Status::optimal) return;
    if (run.objective < node.bound - 1e-7 * (1.0 + std::abs(node.bound))) ++stats_.weak_duality_violations;
    if (run.objective >= cutoff()) return;

    const auto& x = lp_.values();
    Node local = node;
    if (has_incumbent_) fix_by_reduced_cost(local, run.objective);
    if (branch_choose_one(local, run, x)) return;
    int branch = -1;
    double best = options_.int_tol;
    for (int j : binaries_) {
      const double f = x[static_cast<std::size_t>(j)] - std::floor(x[static_cast<std::size_t>(j)]);
      const double score = std::min(f, 1.0 - f);
      if (score > best) {
        best = score;
        branch = j;
      }
    }
    if (branch < 0) {
      try_integral(std::vector<double>(x.begin(), x.begin() + problem_.num_variables()));
      return;
    }

    const bool up_first = x[static_cast<std::size_t>(branch)] >= 0.5;
    Node down, up;
    down.id = next_id_++;
    up.id = next_id_++;
    down.bound = up.bound = run.objective;
    down.fixes = local.fixes;
    down.fixes.emplace_back(branch, 0);
    up.fixes = local.fixes;
    up.fixes.emplace_back(branch, 1);
    push_children(up_first ? up : down, up_first ? down : up);
  }

  // A nonbasic binary whose reduced cost alone would push the LP bound past
  // the cutoff keeps its current value in the whole subtree.
  void fix_by_reduced_cost(Node& node, double z) {
    const double cut = cutoff();
    for (int j : binaries_) {
      if (lp_.lower(j) == lp_.upper(j)) continue;
      const auto st = lp_.basis()[static_cast<std::size_t>(j)];
      if (st == VarStatus::basic) continue;
      const double d = lp_.reduced_cost(j);
      if (st == VarStatus::at_lower && z + d >= cut) node.fixes.emplace_back(j, 0);
      else if (st == VarStatus::at_upper && z - d >= cut) node.fixes.emplace_back(j, 1);
    }
  }

  // Splits the most undecided choose-one row with at least two positive
  // candidates. Returns false when there is none.
  bool branch_choose_one(const Node& node, const detail::LpRun& run, const std::vector<double>& x) {
    const std::vector<int>* pick = nullptr;
    double best = options_.int_tol;
    for (const auto& members : choose_one_) {
      double top = 0.0;
      int positive = 0;
      for (int j : members) {
        const double v = x[static_cast<std::size_t>(j)];
        top = std::max(top, v);
        if (v > options_.int_tol) ++positive;
      }
      if (positive >= 2 && 1.0 - top > best) {
        best = 1.0 - top;
        pick = &members;
      }
    }
    if (!pick) return false;

    const std::vector<int>& m = *pick;
    std::size_t last = 0;
    double total = 0.0;
    for (std::size_t p = 0; p < m.size(); ++p) {
      const double v = x[static_cast<std::size_t>(m[p])];
      if (v > options_.int_tol) last = p;
      total += std::max(0.0, v);
    }
    // Split after position r: left keeps [0, r], right keeps (r, end).
    std::size_t r = 0;
    double cum = 0.0;
    for (; r < last; ++r) {
      cum += std::max(0.0, x[static_cast<std::size_t>(m[r])]);
      if (cum >= 0.5 * total) break;
    }
    r = std::min(r, last - 1);
    double left_mass = 0.0;
    for (std::size_t p = 0; p <= r; ++p) left_mass += std::max(0.0, x[static_cast<std::size_t>(m[p])]);

    Node left, right;
    left.id = next_id_++;
    right.id = next_id_++;
    left.bound = right.bound = run.objective;
    left.fixes = node.fixes;
    right.fixes = node.fixes;
    for (std::size_t p = 0; p < m.size(); ++p) {
      if (lp_.upper(m[p]) <= 0.0) continue;
      (p <= r ? right : left).fixes.emplace_back(m[p], 0);
    }
    const bool left_first = left_mass >= total - left_mass;
    push_children(left_first ? left : right, left_first ? right : left);
    return true;
  }

  void push_children(Node& first, Node& second) {
    if (!has_incumbent_) {
      // Dive: the preferred child is solved next straight from this basis.
      second.basis = lp_.basis();
      dive_.push_back(std::move(second));
      dive_.push_back(std::move(first));
    } else {
      second.basis = lp_.basis();
      open_.push(std::move(second));
      plunge_ = std::move(first);
      plunging_ = true;
    }
  }

  void search() {
    while (true) {
      if ((options_.max_nodes >= 0 && stats_.nodes >= options_.max_nodes) ||
          (options_.soft_node_limit >= 0 && has_incumbent_ && stats_.nodes >= options_.soft_node_limit)) {
        limit_hit_ = plunging_ || !dive_.empty() || !open_.empty();
        return;
      }
      Node node;
      if (plunging_) {
        plunging_ = false;
        node = std::move(plunge_);
      } else if (!has_incumbent_ && !dive_.empty()) {
        node = std::move(dive_.back());
        dive_.pop_back();
      } else {
        for (Node& n : dive_) open_.push(std::move(n));
        dive_.clear();
        if (open_.empty()) return;
        node = open_.top();
        open_.pop();
      }
      if (node.bound >= cutoff()) continue;
      const std::vector<VarStatus>* basis = node.basis.empty() ? nullptr : &node.basis;
      detail::LpRun r = solve_with(node.fixes, basis);
      process(node, r);
    }
  }

  const Problem& problem_;
  const MilpOptions& options_;
  BoundedSimplex lp_;
  std::vector<int> binaries_;
  std::vector<std::vector<int>> choose_one_;
  std::vector<int> fixed_now_;
  std::vector<Node> dive_;
  Node plunge_;
  bool plunging_ = false;
  std::priority_queue<Node, std::vector<Node>, WorseNode> open_;
  std::vector<double> incumbent_;
  double incumbent_obj_ = kInf;
  bool has_incumbent_ = false;
  bool limit_hit_ = false;
  bool trouble_ = false;
  long next_id_ = 0;
  SolveStats stats_;
};

}  // namespace

Solution solve_lp(const Problem& problem, const LpOptions& options) {
  problem.check();
  BoundedSimplex lp(problem);
  detail::LpRun r = lp.solve(options, nullptr);
  Solution out;
  out.status = r.status;
  out.stats.pivots = r.pivots;
  out.stats.lp_solves = 1;
  if (r.status == Status::optimal) {
    out.values = clamped_values(problem, lp);
    out.objective = problem.objective_value(out.values);
    out.stats.root_bound = r.objective;
  }
  return out;
}

Solution solve_milp(const Problem& problem, const MilpOptions& options) {
  problem.check();
  BranchAndBound bb(problem, options);
  return bb.run();
}

}  // namespace rec::milp
