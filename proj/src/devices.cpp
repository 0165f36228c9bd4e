#include "rec/devices.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace rec {

using milp::LinExpr;
using milp::Sense;

namespace {

constexpr double kBoundTol = 1e-9;
constexpr double kEnergyTol = 1e-9;

}  // namespace

double thermal_step(double theta, const AcsDecision& d, double theta_ex, const ThermalParams& p, double dt_hours) {
  const double a = p.alpha(dt_hours);
  const double b = 1.0 - a;
  return a * theta + b * p.R * (p.eta_h * d.p_h - p.eta_c * d.p_c) + b * theta_ex;
}

const char* to_string(Formulation f) { return f == Formulation::canonical ? "canonical" : "compact"; }

std::string var_name(const std::string& prefix, const char* tag, int step) {
  return fmt::format("{}{}@{}", prefix, tag, step);
}

double upper_bound(const milp::Problem& problem, const LinExpr& expr) {
  double v = expr.constant;
  for (const milp::Term& t : expr.terms) {
    const milp::Variable& var = problem.variables()[static_cast<std::size_t>(t.var)];
    v += t.coef * (t.coef > 0 ? var.ub : var.lb);
  }
  return v;
}

// ---- ACS --------------------------------------------------------------------

AcsRows acs_constraint_rows(milp::Problem& problem, const std::string& prefix, const Horizon& h,
                            std::span<const std::uint8_t> heat, std::span<const std::uint8_t> cool,
                            const ThermalParams& params, double theta_now, std::span<const double> theta_ex,
                            double slack_weight, Formulation form) {
  const double a = params.alpha(h.dt);
  const double b = 1.0 - a;
  AcsRows out;
  out.p_h.resize(static_cast<std::size_t>(h.T));
  out.p_c.resize(static_cast<std::size_t>(h.T));
  out.theta_next.resize(static_cast<std::size_t>(h.T));

  LinExpr theta = theta_now;
  for (int t = 0; t < h.T; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    const int k = h.k0 + t;
    const bool on_h = heat[ut] != 0;
    const bool on_c = cool[ut] != 0;

    if (form == Formulation::canonical) {
      const auto ph = problem.add_variable(var_name(prefix, "ph", k), 0.0, on_h ? params.p_nom_h : 0.0);
      const auto pc = problem.add_variable(var_name(prefix, "pc", k), 0.0, on_c ? params.p_nom_c : 0.0);
      const auto th = problem.add_variable(var_name(prefix, "th", k + 1), kThetaMin, kThetaMax);
      LinExpr rec = LinExpr::var(th) - a * theta;
      rec.add(ph, -b * params.R * params.eta_h).add(pc, b * params.R * params.eta_c);
      problem.add_row(var_name(prefix, "thermal", k), rec, Sense::eq, b * theta_ex[ut]);
      if (on_h || on_c) {
        const auto s = problem.add_variable(var_name(prefix, "slack", k), 0.0, kThetaMax - kThetaMin);
        if (on_c)
          problem.add_row(var_name(prefix, "comfort", k), LinExpr::var(th) - LinExpr::var(s), Sense::le,
                          params.theta_sp);
        else
          problem.add_row(var_name(prefix, "comfort", k), LinExpr::var(th) + LinExpr::var(s), Sense::ge,
                          params.theta_sp);
        out.penalty.add(s, slack_weight);
      }
      out.p_h[ut] = LinExpr::var(ph);
      out.p_c[ut] = LinExpr::var(pc);
      theta = LinExpr::var(th);
    } else if (on_h || on_c) {
      // The temperature after an active step is written as set-point plus
      // penalized excursion minus free margin, so the comfort row vanishes.
      const double sp = params.theta_sp;
      const auto p = problem.add_variable(var_name(prefix, on_h ? "ph" : "pc", k), 0.0,
                                          on_h ? params.p_nom_h : params.p_nom_c);
      const auto bad = problem.add_variable(var_name(prefix, "slack", k), 0.0,
                                            std::max(0.0, on_c ? kThetaMax - sp : sp - kThetaMin));
      const auto ok = problem.add_variable(var_name(prefix, "margin", k), 0.0,
                                           std::max(0.0, on_c ? sp - kThetaMin : kThetaMax - sp));
      LinExpr next = sp;
      if (on_c) {
        next.add(bad, 1.0).add(ok, -1.0);
      } else {
        next.add(bad, -1.0).add(ok, 1.0);
      }
      LinExpr rec = next - a * theta;
      rec.add(p, on_h ? -b * params.R * params.eta_h : b * params.R * params.eta_c);
      problem.add_row(var_name(prefix, "thermal", k), rec, Sense::eq, b * theta_ex[ut]);
      out.penalty.add(bad, slack_weight);
      (on_h ? out.p_h[ut] : out.p_c[ut]) = LinExpr::var(p);
      theta = next;
    } else {
      theta = a * theta + LinExpr(b * theta_ex[ut]);
    }
    out.theta_next[ut] = theta;
  }
  return out;
}

// ---- appliances ---------------------------------------------------------------

ApplianceRows appliance_constraint_rows(milp::Problem& problem, const std::string& prefix, const Horizon& h,
                                        const ApplianceRun& run, const ApplianceProgram& program,
                                        Formulation form) {
  const int M = program.phases();
  ApplianceRows out;
  out.power.resize(static_cast<std::size_t>(h.T));
  out.active.resize(static_cast<std::size_t>(h.T));
  if (run.completed) return out;

  if (run.started()) {
    // The remaining phases follow back to back from now on.
    for (int t = 0; t < h.T; ++t) {
      const int j = run.next_phase + t;
      if (j > M) break;
      out.power[static_cast<std::size_t>(t)] = program.phase_powers[static_cast<std::size_t>(j - 1)];
      out.active[static_cast<std::size_t>(t)] = 1.0;
    }
    return out;
  }

  const int first = std::max(h.k0, run.k1);
  const int last_start = latest_start(run, program);
  if (first > last_start)
    throw DeadlineUnmeetable(fmt::format("{}: program of {} phases no longer fits before step {}", prefix, M, run.k2));

  if (form == Formulation::compact) {
    const int s_end = std::min(last_start, h.end());
    if (first > s_end) return out;
    LinExpr pick;
    for (int s = first; s <= s_end; ++s) {
      const auto x = problem.add_binary(var_name(prefix, "x", s));
      pick.add(x, 1.0);
      for (int j = 1; j <= M; ++j) {
        const int t = s + j - 1 - h.k0;
        if (t >= h.T) break;
        out.power[static_cast<std::size_t>(t)].add(x, program.phase_powers[static_cast<std::size_t>(j - 1)]);
        out.active[static_cast<std::size_t>(t)].add(x, 1.0);
      }
    }
    if (s_end > first || last_start <= h.end())
      problem.add_row(prefix + "start", pick, last_start <= h.end() ? Sense::eq : Sense::le, 1.0);
    return out;
  }

  // Canonical automaton over the part of the window inside the horizon.
  const int a = first;
  const int b = std::min(run.k2, h.end());
  if (a > b) return out;
  const int n = b - a + 1;
  std::vector<std::vector<milp::VarId>> delta(static_cast<std::size_t>(n), std::vector<milp::VarId>(static_cast<std::size_t>(M)));
  std::vector<milp::VarId> s(static_cast<std::size_t>(n + 1));
  for (int t = 0; t <= n; ++t) s[static_cast<std::size_t>(t)] = problem.add_binary(var_name(prefix, "s", a + t));
  problem.set_bounds(s[0], 0.0, 0.0);
  for (int t = 0; t < n; ++t) {
    for (int j = 1; j <= M; ++j) {
      const auto d = problem.add_binary(var_name(prefix, fmt::format("d{}", j).c_str(), a + t));
      delta[static_cast<std::size_t>(t)][static_cast<std::size_t>(j - 1)] = d;
      if (t == 0 && j >= 2) problem.set_bounds(d, 0.0, 0.0);
    }
  }
  auto dv = [&](int t, int j) { return delta[static_cast<std::size_t>(t)][static_cast<std::size_t>(j - 1)]; };

  LinExpr total;
  for (int t = 0; t < n; ++t) {
    const int k = a + t;
    LinExpr one;
    for (int j = 1; j <= M; ++j) {
      one.add(dv(t, j), 1.0);
      out.power[static_cast<std::size_t>(k - h.k0)].add(dv(t, j), program.phase_powers[static_cast<std::size_t>(j - 1)]);
    }
    out.active[static_cast<std::size_t>(k - h.k0)] = one;
    total += one;
    problem.add_row(var_name(prefix, "single", k), one, Sense::le, 1.0);
    if (t + 1 < n)
      for (int j = 1; j < M; ++j)
        problem.add_row(var_name(prefix, fmt::format("order{}_", j).c_str(), k),
                        LinExpr::var(dv(t + 1, j + 1)) - LinExpr::var(dv(t, j)), Sense::eq, 0.0);
    problem.add_row(var_name(prefix, "done", k),
                    LinExpr::var(s[static_cast<std::size_t>(t + 1)]) - LinExpr::var(s[static_cast<std::size_t>(t)]) -
                        LinExpr::var(dv(t, M)),
                    Sense::eq, 0.0);
    problem.add_row(var_name(prefix, "keep", k),
                    LinExpr::var(s[static_cast<std::size_t>(t)]) - LinExpr::var(s[static_cast<std::size_t>(t + 1)]),
                    Sense::le, 0.0);
    for (int j = 1; j <= M; ++j)
      problem.add_row(var_name(prefix, fmt::format("norestart{}_", j).c_str(), k),
                      LinExpr::var(dv(t, j)) + LinExpr::var(s[static_cast<std::size_t>(t)]), Sense::le, 1.0);
  }
  if (run.k2 <= h.end()) {
    problem.set_bounds(s[static_cast<std::size_t>(n)], 1.0, 1.0);
    problem.add_row(prefix + "complete", total - M * LinExpr::var(s[static_cast<std::size_t>(n)]), Sense::eq, 0.0);
  } else if (last_start <= h.end()) {
    LinExpr starts;
    for (int k = a; k <= last_start; ++k) starts.add(dv(k - a, 1), 1.0);
    problem.add_row(prefix + "start", starts, Sense::eq, 1.0);
  }
  return out;
}

// ---- PEV ------------------------------------------------------------------------

double pev_capacity_kwh(const PevSession& session, const PevParams& params, int k, double dt_hours) {
  const int steps = session.k2 - std::max(k, session.k1) + 1;
  return steps > 0 ? params.p_nom_p * dt_hours * steps : 0.0;
}

PevRows pev_constraint_rows(milp::Problem& problem, const std::string& prefix, const Horizon& h,
                            const PevSession& session, const PevParams& params) {
  PevRows out;
  out.power.resize(static_cast<std::size_t>(h.T));
  double owed = session.remaining_kwh;
  if (owed <= kEnergyTol) return out;
  const double capacity = pev_capacity_kwh(session, params, h.k0, h.dt);
  if (owed > capacity + 1e-7)
    throw DeadlineUnmeetable(fmt::format("{}: {:.6f} kWh still owed but only {:.6f} kWh can be drawn by step {}",
                                         prefix, owed, capacity, session.k2));
  owed = std::min(owed, capacity);

  const int a = std::max(h.k0, session.k1);
  const int b = std::min(session.k2, h.end());
  if (a > b) return out;
  LinExpr energy;
  for (int k = a; k <= b; ++k) {
    const auto p = problem.add_variable(var_name(prefix, "pp", k), 0.0, params.p_nom_p);
    out.power[static_cast<std::size_t>(k - h.k0)] = LinExpr::var(p);
    energy.add(p, h.dt);
  }
  if (session.k2 <= h.end()) {
    problem.add_row(prefix + "full", energy, Sense::eq, owed);
  } else {
    const double later = params.p_nom_p * h.dt * (session.k2 - h.end());
    if (owed - later > 0.0) problem.add_row(prefix + "catchup", energy, Sense::ge, owed - later);
    if (params.p_nom_p * h.dt * (b - a + 1) > owed) problem.add_row(prefix + "nooverfill", energy, Sense::le, owed);
  }
  return out;
}

// ---- balance ------------------------------------------------------------------------

BalanceRows balance_rows(milp::Problem& problem, const std::string& prefix, const Horizon& h, double p_max,
                         std::span<const double> ul, const std::vector<LinExpr>& device_power, Formulation form) {
  BalanceRows out;
  out.total.resize(static_cast<std::size_t>(h.T));
  for (int t = 0; t < h.T; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    const int k = h.k0 + t;
    double cap = p_max;
    if (ul[ut] > p_max) {
      cap = ul[ut];
      out.warnings.push_back(fmt::format("{}step {}: uncontrollable load {:.4f} kW above cap {:.4f} kW, cap relaxed",
                                         prefix, k, ul[ut], p_max));
    }
    const double most = upper_bound(problem, device_power[ut]) + ul[ut];
    if (form == Formulation::canonical) {
      const auto P = problem.add_variable(var_name(prefix, "P", k), 0.0, std::max(cap, most));
      problem.add_row(var_name(prefix, "balance", k), LinExpr::var(P) - device_power[ut], Sense::eq, ul[ut]);
      problem.add_row(var_name(prefix, "cap", k), LinExpr::var(P), Sense::le, cap);
      out.total[ut] = LinExpr::var(P);
    } else {
      out.total[ut] = device_power[ut] + LinExpr(ul[ut]);
      if (most > cap + 1e-12) problem.add_row(var_name(prefix, "cap", k), device_power[ut], Sense::le, cap - ul[ut]);
    }
  }
  return out;
}

// ---- ground truth ---------------------------------------------------------------------

namespace {

double checked(double value, double hi, const std::string& what) {
  if (!std::isfinite(value) || value < -kBoundTol || value > hi + kBoundTol)
    throw DecisionError(fmt::format("{} = {} outside [0, {}]", what, value, hi));
  return std::clamp(value, 0.0, hi);
}

}  // namespace

HouseStepResult simulate_house_step(const HouseModel& house, const HouseState& state, const HouseDecision& d,
                                    int k, double theta_ex, double ul, double dt) {
  HouseStepResult out;
  out.next = state;
  HouseState& next = out.next;
  const std::string who = fmt::format("house {} step {}", house.id, k);

  AcsDecision acs;
  acs.p_h = checked(d.acs.p_h, state.heating_on(k) ? house.thermal.p_nom_h : 0.0, who + " p_h");
  acs.p_c = checked(d.acs.p_c, state.cooling_on(k) ? house.thermal.p_nom_c : 0.0, who + " p_c");
  next.theta = thermal_step(state.theta, acs, theta_ex, house.thermal, dt);
  out.applied.acs = acs;
  out.applied.appliance_kw.assign(house.appliances.size(), 0.0);
  out.applied.appliance_run.assign(house.appliances.size(), 0);

  double total = acs.p_h + acs.p_c + ul;
  for (std::size_t a = 0; a < house.appliances.size(); ++a) {
    const bool runs = a < d.appliance_run.size() && d.appliance_run[a] != 0;
    const double asked = a < d.appliance_kw.size() ? d.appliance_kw[a] : 0.0;
    const auto& slot = state.appliances[a];
    const bool mid_program = slot && slot->started() && !slot->completed;
    if (!runs) {
      if (mid_program) throw DecisionError(fmt::format("{}: appliance {} interrupted", who, house.appliances[a].id));
      if (std::abs(asked) > kBoundTol)
        throw DecisionError(fmt::format("{}: appliance {} draws {} kW while idle", who, house.appliances[a].id, asked));
      continue;
    }
    if (!slot || slot->completed || k < slot->k1)
      throw DecisionError(fmt::format("{}: appliance {} has no pending program", who, house.appliances[a].id));
    const ApplianceProgram& prog = house.appliances[a].programs[static_cast<std::size_t>(slot->program)];
    const double phase_kw = prog.phase_powers[static_cast<std::size_t>(slot->next_phase - 1)];
    if (std::abs(asked - phase_kw) > 1e-6)
      throw DecisionError(fmt::format("{}: appliance {} phase {} needs {} kW, got {}", who, house.appliances[a].id,
                                      slot->next_phase, phase_kw, asked));
    ApplianceRun& run = *next.appliances[a];
    if (run.next_phase == 1) run.started_at = k;
    total += phase_kw;
    out.applied.appliance_kw[a] = phase_kw;
    out.applied.appliance_run[a] = 1;
    if (run.next_phase == prog.phases()) {
      run.completed = true;
    } else {
      ++run.next_phase;
    }
  }

  const bool plugged = state.pev && k >= state.pev->k1 && k <= state.pev->k2;
  double pev_kw = checked(d.pev_kw, plugged ? house.pev.p_nom_p : 0.0, who + " p_p");
  if (plugged) {
    PevSession& s = *next.pev;
    if (pev_kw * dt > s.remaining_kwh + 1e-6)
      throw DecisionError(fmt::format("{}: charger draws {} kWh, only {} kWh owed", who, pev_kw * dt, s.remaining_kwh));
    pev_kw = std::min(pev_kw, s.remaining_kwh / dt);
    s.remaining_kwh = std::max(0.0, s.remaining_kwh - pev_kw * dt);
    s.delivered_battery_kwh += house.pev.eta_b * pev_kw * dt;
  }
  total += pev_kw;
  out.applied.pev_kw = pev_kw;
  out.p_total = total;
  return out;
}

}  // namespace rec
