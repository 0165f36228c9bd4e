#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rec/milp.hpp"

namespace rec::milp {

double LinExpr::evaluate(std::span<const double> values) const {
  double v = constant;
  for (const Term& t : terms) v += t.coef * values[static_cast<std::size_t>(t.var)];
  return v;
}

const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::iteration_limit: return "iteration_limit";
  }
  return "?";
}

VarId Problem::add_variable(std::string name, double lb, double ub, VarKind kind) {
  const VarId id = static_cast<VarId>(vars_.size());
  if (!name.empty()) by_name_.emplace(name, id);
  vars_.push_back({std::move(name), lb, ub, kind});
  cost_.push_back(0.0);
  return id;
}

int Problem::add_row(std::string name, const LinExpr& expr, Sense sense, double rhs) {
  ConstraintRow row;
  row.name = std::move(name);
  row.sense = sense;
  row.rhs = rhs - expr.constant;
  row.terms = expr.terms;
  std::sort(row.terms.begin(), row.terms.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
  std::size_t w = 0;
  for (std::size_t r = 0; r < row.terms.size(); ++r) {
    if (w > 0 && row.terms[w - 1].var == row.terms[r].var) {
      row.terms[w - 1].coef += row.terms[r].coef;
    } else {
      row.terms[w++] = row.terms[r];
    }
  }
  row.terms.resize(w);
  std::erase_if(row.terms, [](const Term& t) { return t.coef == 0.0; });
  rows_.push_back(std::move(row));
  return static_cast<int>(rows_.size()) - 1;
}

void Problem::add_objective(const LinExpr& expr) {
  for (const Term& t : expr.terms) cost_.at(static_cast<std::size_t>(t.var)) += t.coef;
  cost_constant_ += expr.constant;
}

void Problem::set_bounds(VarId v, double lb, double ub) {
  auto& var = vars_.at(static_cast<std::size_t>(v));
  var.lb = lb;
  var.ub = ub;
}

int Problem::num_binaries() const {
  return static_cast<int>(std::count_if(vars_.begin(), vars_.end(),
                                        [](const Variable& v) { return v.kind == VarKind::binary; }));
}

std::optional<VarId> Problem::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

double Problem::objective_value(std::span<const double> values) const {
  double v = cost_constant_;
  for (std::size_t j = 0; j < cost_.size(); ++j) v += cost_[j] * values[j];
  return v;
}

void Problem::check() const {
  for (std::size_t j = 0; j < vars_.size(); ++j) {
    const Variable& v = vars_[j];
    if (!std::isfinite(v.lb) || !std::isfinite(v.ub))
      throw std::invalid_argument("variable '" + v.name + "' needs finite bounds");
    if (v.lb > v.ub) throw std::invalid_argument("variable '" + v.name + "' has lb > ub");
    if (v.kind == VarKind::binary && (v.lb < 0.0 || v.ub > 1.0))
      throw std::invalid_argument("binary variable '" + v.name + "' has bounds outside [0,1]");
  }
  for (const ConstraintRow& r : rows_) {
    if (!std::isfinite(r.rhs)) throw std::invalid_argument("row '" + r.name + "' has a non-finite rhs");
    for (const Term& t : r.terms) {
      if (t.var < 0 || t.var >= num_variables())
        throw std::invalid_argument("row '" + r.name + "' references an unknown variable");
      if (!std::isfinite(t.coef)) throw std::invalid_argument("row '" + r.name + "' has a non-finite coefficient");
    }
  }
}

double max_violation(const Problem& problem, std::span<const double> values) {
  double worst = 0.0;
  const auto& vars = problem.variables();
  for (std::size_t j = 0; j < vars.size(); ++j) {
    worst = std::max(worst, vars[j].lb - values[j]);
    worst = std::max(worst, values[j] - vars[j].ub);
  }
  for (const ConstraintRow& r : problem.rows()) {
    double act = 0.0;
    for (const Term& t : r.terms) act += t.coef * values[static_cast<std::size_t>(t.var)];
    switch (r.sense) {
      case Sense::le: worst = std::max(worst, act - r.rhs); break;
      case Sense::ge: worst = std::max(worst, r.rhs - act); break;
      case Sense::eq: worst = std::max(worst, std::abs(act - r.rhs)); break;
    }
  }
  return worst;
}

}  // namespace rec::milp
