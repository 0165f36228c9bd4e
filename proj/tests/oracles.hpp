#pragma once

// Independent reference solvers used only by tests. Nothing here calls into
// the simplex or branch-and-bound code under test.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "rec/milp.hpp"

namespace rec::testing {

// Exhaustive optimum of a MILP with at most two continuous variables: every
// binary assignment is enumerated and the continuous part is solved by
// checking every vertex of its (bounded) feasible polygon.
inline std::optional<double> brute_force_milp(const milp::Problem& p, double tol = 1e-9) {
  using milp::Sense;
  std::vector<int> bins, conts;
  for (int j = 0; j < p.num_variables(); ++j)
    (p.variables()[static_cast<std::size_t>(j)].kind == milp::VarKind::binary ? bins : conts).push_back(j);
  if (conts.size() > 2 || bins.size() > 20) return std::nullopt;

  // Half-planes a.y <= b over the continuous variables, per assignment.
  struct Half { double a[2]; double b; };
  std::optional<double> best;
  std::vector<double> x(static_cast<std::size_t>(p.num_variables()), 0.0);
  const std::uint64_t combos = std::uint64_t{1} << bins.size();
  for (std::uint64_t mask = 0; mask < combos; ++mask) {
    bool ok = true;
    for (std::size_t b = 0; b < bins.size(); ++b) {
      const auto& v = p.variables()[static_cast<std::size_t>(bins[b])];
      const double val = (mask >> b) & 1U ? 1.0 : 0.0;
      if (val < v.lb - tol || val > v.ub + tol) ok = false;
      x[static_cast<std::size_t>(bins[b])] = val;
    }
    if (!ok) continue;
    std::vector<Half> hs;
    for (const auto& row : p.rows()) {
      double fixed = 0.0, a[2] = {0.0, 0.0};
      for (const auto& t : row.terms) {
        bool cont = false;
        for (std::size_t c = 0; c < conts.size(); ++c)
          if (conts[c] == t.var) { a[c] += t.coef; cont = true; }
        if (!cont) fixed += t.coef * x[static_cast<std::size_t>(t.var)];
      }
      const double r = row.rhs - fixed;
      if (row.sense != Sense::ge) hs.push_back({{a[0], a[1]}, r});
      if (row.sense != Sense::le) hs.push_back({{-a[0], -a[1]}, -r});
    }
    for (std::size_t c = 0; c < conts.size(); ++c) {
      const auto& v = p.variables()[static_cast<std::size_t>(conts[c])];
      Half up{{0, 0}, v.ub}, lo{{0, 0}, -v.lb};
      up.a[c] = 1.0;
      lo.a[c] = -1.0;
      hs.push_back(up);
      hs.push_back(lo);
    }
    auto feasible = [&](const double* y) {
      for (const Half& h : hs)
        if (h.a[0] * y[0] + h.a[1] * y[1] > h.b + 1e-7 * (1.0 + std::abs(h.b))) return false;
      return true;
    };
    auto consider = [&](const double* y) {
      if (!feasible(y)) return;
      for (std::size_t c = 0; c < conts.size(); ++c) x[static_cast<std::size_t>(conts[c])] = y[c];
      const double obj = p.objective_value(x);
      if (!best || obj < *best) best = obj;
    };
    if (conts.empty()) {
      const double y[2] = {0, 0};
      consider(y);
    } else if (conts.size() == 1) {
      for (const Half& h : hs) {
        if (std::abs(h.a[0]) < 1e-12) continue;
        const double y[2] = {h.b / h.a[0], 0};
        consider(y);
      }
    } else {
      for (std::size_t i = 0; i < hs.size(); ++i)
        for (std::size_t k = i + 1; k < hs.size(); ++k) {
          const double det = hs[i].a[0] * hs[k].a[1] - hs[i].a[1] * hs[k].a[0];
          if (std::abs(det) < 1e-12) continue;
          const double y[2] = {(hs[i].b * hs[k].a[1] - hs[i].a[1] * hs[k].b) / det,
                               (hs[i].a[0] * hs[k].b - hs[i].b * hs[k].a[0]) / det};
          consider(y);
        }
    }
  }
  return best;
}

// Random MILP with `bins` binaries, up to two continuous variables in
// [0, 10] and `rows` constraints with small integer coefficients. Roughly
// half the instances are made feasible by building rows around a random point.
inline milp::Problem random_milp(std::mt19937_64& rng, int bins, int conts, int rows) {
  using milp::LinExpr;
  using milp::Sense;
  std::uniform_int_distribution<int> coef(-5, 5);
  std::uniform_int_distribution<int> sense(0, 9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  milp::Problem p;
  std::vector<double> point;
  for (int b = 0; b < bins; ++b) {
    p.add_binary("b" + std::to_string(b));
    point.push_back(unit(rng) < 0.5 ? 0.0 : 1.0);
  }
  for (int c = 0; c < conts; ++c) {
    p.add_variable("y" + std::to_string(c), 0.0, 10.0);
    point.push_back(10.0 * unit(rng));
  }
  LinExpr obj;
  for (int j = 0; j < p.num_variables(); ++j) obj.add(j, coef(rng));
  p.add_objective(obj);
  const bool anchored = unit(rng) < 0.5;
  for (int r = 0; r < rows; ++r) {
    LinExpr e;
    double act = 0.0;
    for (int j = 0; j < p.num_variables(); ++j) {
      if (unit(rng) < 0.4) continue;
      const int a = coef(rng);
      e.add(j, a);
      act += a * point[static_cast<std::size_t>(j)];
    }
    const int s = sense(rng);
    const double shift = anchored ? std::floor(3.0 * unit(rng)) : std::floor(6.0 * unit(rng)) - 3.0;
    if (s < 5) {
      p.add_row("r" + std::to_string(r), e, Sense::le, (anchored ? act : std::round(act)) + shift);
    } else if (s < 9 || conts == 0) {
      p.add_row("r" + std::to_string(r), e, Sense::ge, (anchored ? act : std::round(act)) - shift);
    } else {
      p.add_row("r" + std::to_string(r), e, Sense::eq, anchored ? act : std::round(act));
    }
  }
  return p;
}

}  // namespace rec::testing
