#include "rec/mpc.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace rec {

using milp::LinExpr;
using milp::Sense;

const char* to_string(Controller c) { return c == Controller::coa ? "coa" : "moa"; }

int horizon_length(const MpcConfig& config, int k, int n_steps) {
  return std::max(1, std::min(config.horizon_T, n_steps - k));
}

namespace {

std::string house_prefix(int i) { return fmt::format("h{}.", i); }

// Program started right now and run back to back; used when the window can
// no longer hold it.
ApplianceRows forced_start(const Horizon& h, const ApplianceProgram& program) {
  ApplianceRows out;
  out.power.resize(static_cast<std::size_t>(h.T));
  out.active.resize(static_cast<std::size_t>(h.T));
  for (int t = 0; t < std::min(h.T, program.phases()); ++t) {
    out.power[static_cast<std::size_t>(t)] = program.phase_powers[static_cast<std::size_t>(t)];
    out.active[static_cast<std::size_t>(t)] = 1.0;
  }
  return out;
}

PevRows forced_charge(const Horizon& h, const PevSession& s, const PevParams& p) {
  PevRows out;
  out.power.resize(static_cast<std::size_t>(h.T));
  double owed = s.remaining_kwh;
  for (int k = std::max(h.k0, s.k1); k <= std::min(s.k2, h.end()) && owed > 0.0; ++k) {
    const double kw = std::min(p.p_nom_p, owed / h.dt);
    out.power[static_cast<std::size_t>(k - h.k0)] = kw;
    owed -= kw * h.dt;
  }
  return out;
}

BuiltProblem::House build_house(milp::Problem& problem, int i, const Horizon& h, const HouseState& state,
                                const HouseModel& house, const ForecastBundle& fc, const MpcConfig& config,
                                std::vector<std::string>& warnings) {
  BuiltProblem::House out;
  out.index = i;
  const std::string prefix = house_prefix(i);

  std::vector<std::uint8_t> heat(static_cast<std::size_t>(h.T)), cool(static_cast<std::size_t>(h.T));
  for (int t = 0; t < h.T; ++t) {
    heat[static_cast<std::size_t>(t)] = state.heating_on(h.k0 + t) ? 1 : 0;
    cool[static_cast<std::size_t>(t)] = state.cooling_on(h.k0 + t) ? 1 : 0;
  }
  out.acs = acs_constraint_rows(problem, prefix + "acs.", h, heat, cool, house.thermal, state.theta, fc.theta_ex,
                                config.slack_weight, config.formulation);
  out.device_power.resize(static_cast<std::size_t>(h.T));
  for (int t = 0; t < h.T; ++t)
    out.device_power[static_cast<std::size_t>(t)] = out.acs.p_h[static_cast<std::size_t>(t)] + out.acs.p_c[static_cast<std::size_t>(t)];

  for (std::size_t a = 0; a < house.appliances.size(); ++a) {
    const auto& slot = state.appliances[a];
    ApplianceRows rows;
    if (slot && !slot->completed) {
      const ApplianceProgram& prog = house.appliances[a].programs[static_cast<std::size_t>(slot->program)];
      try {
        rows = appliance_constraint_rows(problem, fmt::format("{}a{}.", prefix, a), h, *slot, prog, config.formulation);
      } catch (const DeadlineUnmeetable& e) {
        warnings.push_back(fmt::format("step {}: {}; starting now", h.k0, e.what()));
        out.forced.push_back(house.appliances[a].id);
        rows = forced_start(h, prog);
      }
    } else {
      rows.power.resize(static_cast<std::size_t>(h.T));
      rows.active.resize(static_cast<std::size_t>(h.T));
    }
    for (int t = 0; t < h.T; ++t) out.device_power[static_cast<std::size_t>(t)] += rows.power[static_cast<std::size_t>(t)];
    out.appliances.push_back(std::move(rows));
  }

  if (state.pev && state.pev->k2 >= h.k0) {
    try {
      out.pev = pev_constraint_rows(problem, prefix + "pev.", h, *state.pev, house.pev);
    } catch (const DeadlineUnmeetable& e) {
      warnings.push_back(fmt::format("step {}: {}; charging at rated power", h.k0, e.what()));
      out.forced.push_back("pev");
      out.pev = forced_charge(h, *state.pev, house.pev);
    }
  } else {
    out.pev.power.resize(static_cast<std::size_t>(h.T));
  }
  for (int t = 0; t < h.T; ++t) out.device_power[static_cast<std::size_t>(t)] += out.pev.power[static_cast<std::size_t>(t)];

  out.balance = balance_rows(problem, prefix, h, house.p_max, fc.ul[static_cast<std::size_t>(i)], out.device_power,
                             config.formulation);
  for (auto& w : out.balance.warnings) warnings.push_back(w);
  return out;
}

Horizon horizon_of(int k, const ForecastBundle& fc, double dt) {
  if (fc.k0 != k) throw std::invalid_argument(fmt::format("forecast starts at {}, control step is {}", fc.k0, k));
  return Horizon{k, fc.length(), dt};
}

void add_bill(milp::Problem& problem, const BuiltProblem::House& house, const TariffSet& tariffs, const Horizon& h) {
  LinExpr obj = house.acs.penalty;
  const auto& price = tariffs.member_tariff[static_cast<std::size_t>(house.index)];
  for (int t = 0; t < h.T; ++t)
    obj += (price[static_cast<std::size_t>(h.k0 + t)] * h.dt) * house.balance.total[static_cast<std::size_t>(t)];
  problem.add_objective(obj);
}

// Community load at horizon step t with every binary coefficient above pv
// cut down to pv. sh <= pv makes this a valid bound on sh at integer points
// (one such binary at 1 already allows sh = pv), and it is much tighter in
// the relaxation when a fractional start spreads a large phase over low-PV
// steps. Empty when no coefficient needs clipping.
LinExpr clipped_load(const milp::Problem& problem, const std::vector<BuiltProblem::House>& houses,
                     const ForecastBundle& fc, int t, double pv) {
  const auto ut = static_cast<std::size_t>(t);
  LinExpr load;
  for (const auto& hs : houses) {
    load += hs.device_power[ut];
    load += LinExpr(fc.ul[static_cast<std::size_t>(hs.index)][ut]);
  }
  std::unordered_map<milp::VarId, std::size_t> slot;
  std::vector<milp::Term> merged;
  for (const milp::Term& term : load.terms) {
    auto [it, fresh] = slot.emplace(term.var, merged.size());
    if (fresh) merged.push_back(term);
    else merged[it->second].coef += term.coef;
  }
  bool clipped = false;
  for (milp::Term& term : merged) {
    if (problem.variables()[static_cast<std::size_t>(term.var)].kind != milp::VarKind::binary) continue;
    if (term.coef < 0.0) return {};
    if (term.coef > pv) {
      term.coef = pv;
      clipped = true;
    }
  }
  if (!clipped) return {};
  load.terms = std::move(merged);
  return load;
}

}  // namespace

BuiltProblem build_coa(int k, const std::vector<HouseState>& states, const ForecastBundle& fc,
                       const TariffSet& tariffs, const std::vector<HouseModel>& houses, const MpcConfig& config) {
  BuiltProblem out;
  const Horizon h = horizon_of(k, fc, config.dt_hours);
  out.horizon = h;
  for (std::size_t i = 0; i < houses.size(); ++i) {
    out.houses.push_back(build_house(out.problem, static_cast<int>(i), h, states[i], houses[i], fc, config, out.warnings));
    add_bill(out.problem, out.houses.back(), tariffs, h);
  }
  out.p_sh.resize(static_cast<std::size_t>(h.T));
  LinExpr reward;
  for (int t = 0; t < h.T; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    LinExpr community;
    double most = 0.0;
    for (const auto& hs : out.houses) {
      community += hs.balance.total[ut];
      most += upper_bound(out.problem, hs.balance.total[ut]);
    }
    const double pv = std::max(0.0, fc.pv[ut]);
    milp::VarId sh;
    if (config.formulation == Formulation::canonical) {
      sh = out.problem.add_variable(var_name("", "sh", k + t), 0.0, std::max(0.0, most));
      out.problem.add_row(var_name("", "sh_pv", k + t), LinExpr::var(sh), Sense::le, pv);
    } else {
      sh = out.problem.add_variable(var_name("", "sh", k + t), 0.0, std::max(0.0, std::min(pv, most)));
    }
    out.problem.add_row(var_name("", "sh_load", k + t), LinExpr::var(sh) - community, Sense::le, 0.0);
    LinExpr tight = clipped_load(out.problem, out.houses, fc, t, pv);
    if (!tight.terms.empty())
      out.problem.add_row(var_name("", "sh_clip", k + t), LinExpr::var(sh) - tight, Sense::le, 0.0);
    out.p_sh[ut] = LinExpr::var(sh);
    reward.add(sh, -tariffs.incentive_rate * h.dt);
  }
  out.problem.add_objective(reward);
  return out;
}

BuiltProblem build_moa_member(int member, int k, const HouseState& state, const ForecastBundle& fc,
                              const TariffSet& tariffs, const HouseModel& house, const MpcConfig& config) {
  BuiltProblem out;
  const Horizon h = horizon_of(k, fc, config.dt_hours);
  out.horizon = h;
  out.houses.push_back(build_house(out.problem, member, h, state, house, fc, config, out.warnings));
  add_bill(out.problem, out.houses.back(), tariffs, h);
  return out;
}

ControlDecision decode(const BuiltProblem& built, const std::vector<HouseModel>& houses,
                       const std::vector<double>& x, int t) {
  const auto ut = static_cast<std::size_t>(t);
  auto val = [&](const LinExpr& e) { return e.evaluate(x); };
  auto nonneg = [&](const LinExpr& e) { return std::max(0.0, val(e)); };
  ControlDecision d;
  d.houses.resize(houses.size());
  d.p_total.assign(houses.size(), 0.0);
  for (const auto& hs : built.houses) {
    const auto i = static_cast<std::size_t>(hs.index);
    HouseDecision& hd = d.houses[i];
    hd.acs.p_h = nonneg(hs.acs.p_h[ut]);
    hd.acs.p_c = nonneg(hs.acs.p_c[ut]);
    hd.appliance_kw.assign(houses[i].appliances.size(), 0.0);
    hd.appliance_run.assign(houses[i].appliances.size(), 0);
    for (std::size_t a = 0; a < hs.appliances.size(); ++a) {
      if (val(hs.appliances[a].active[ut]) > 0.5) {
        hd.appliance_run[a] = 1;
        hd.appliance_kw[a] = nonneg(hs.appliances[a].power[ut]);
      }
    }
    hd.pev_kw = nonneg(hs.pev.power[ut]);
    d.p_total[i] = val(hs.balance.total[ut]);
  }
  if (!built.p_sh.empty()) d.p_sh = val(built.p_sh[ut]);
  return d;
}

HouseDecision safe_decision(const HouseModel& house, const HouseState& state, int k, double theta_ex, double dt) {
  HouseDecision d;
  const ThermalParams& th = house.thermal;
  const double a = th.alpha(dt);
  const double drift = a * state.theta + (1.0 - a) * theta_ex;
  if (state.cooling_on(k))
    d.acs.p_c = std::clamp((drift - th.theta_sp) / ((1.0 - a) * th.R * th.eta_c), 0.0, th.p_nom_c);
  else if (state.heating_on(k))
    d.acs.p_h = std::clamp((th.theta_sp - drift) / ((1.0 - a) * th.R * th.eta_h), 0.0, th.p_nom_h);

  d.appliance_kw.assign(house.appliances.size(), 0.0);
  d.appliance_run.assign(house.appliances.size(), 0);
  for (std::size_t i = 0; i < house.appliances.size(); ++i) {
    const auto& slot = state.appliances[i];
    if (!slot || slot->completed || k < slot->k1) continue;
    const ApplianceProgram& prog = house.appliances[i].programs[static_cast<std::size_t>(slot->program)];
    if (slot->started() || k >= latest_start(*slot, prog)) {
      d.appliance_run[i] = 1;
      d.appliance_kw[i] = prog.phase_powers[static_cast<std::size_t>(slot->next_phase - 1)];
    }
  }
  if (state.pev && k >= state.pev->k1 && k <= state.pev->k2)
    d.pev_kw = std::min(house.pev.p_nom_p, std::max(0.0, state.pev->remaining_kwh) / dt);
  return d;
}

namespace {

struct Solved {
  bool ok = false;
  std::vector<double> values;
  milp::SolveStats stats;
  double objective = 0.0;
};

Solved solve_built(const BuiltProblem& built, const MpcConfig& config, std::unordered_map<std::string, double>* plan,
                   std::vector<std::string>& warnings) {
  milp::MilpOptions opt = config.milp;
  const auto& vars = built.problem.variables();
  if (config.warm_start && plan && !plan->empty()) {
    opt.start.assign(vars.size(), 0.0);
    for (std::size_t j = 0; j < vars.size(); ++j) {
      if (vars[j].kind != milp::VarKind::binary) continue;
      auto it = plan->find(vars[j].name);
      if (it != plan->end()) opt.start[j] = it->second;
    }
  }
  const milp::Solution sol = milp::solve_milp(built.problem, opt);
  Solved out;
  out.stats = sol.stats;
  if (sol.status == milp::Status::infeasible) return out;
  if (sol.values.size() != vars.size())
    throw SolverBreakdown(fmt::format("step {}: solver stopped ({}) without a feasible plan", built.horizon.k0,
                                      milp::to_string(sol.status)));
  if (sol.status == milp::Status::iteration_limit)
    warnings.push_back(fmt::format("step {}: solver limit reached, using best plan found", built.horizon.k0));
  out.ok = true;
  out.values = sol.values;
  out.objective = sol.objective;
  if (plan) {
    plan->clear();
    for (std::size_t j = 0; j < vars.size(); ++j)
      if (vars[j].kind == milp::VarKind::binary) plan->emplace(vars[j].name, sol.values[j]);
  }
  return out;
}

void accumulate(milp::SolveStats& into, const milp::SolveStats& s) {
  into.pivots += s.pivots;
  into.nodes += s.nodes;
  into.lp_solves += s.lp_solves;
  into.weak_duality_violations += s.weak_duality_violations;
  into.root_bound += s.root_bound;
}

void fill_safe(ControlDecision& d, std::size_t i, const HouseModel& house, const HouseState& state,
               const ForecastBundle& fc, int k, double dt) {
  d.houses[i] = safe_decision(house, state, k, fc.theta_ex[0], dt);
  const HouseDecision& hd = d.houses[i];
  double p = hd.acs.p_h + hd.acs.p_c + hd.pev_kw + fc.ul[i][0];
  for (double kw : hd.appliance_kw) p += kw;
  d.p_total[i] = p;
}

}  // namespace

StepReport mpc_step(Controller controller, int k, const std::vector<HouseState>& states, const ForecastBundle& fc,
                    const TariffSet& tariffs, const std::vector<HouseModel>& houses, const MpcConfig& config,
                    MpcMemory* memory) {
  StepReport rep;
  const std::size_t n = houses.size();
  rep.decision.houses.resize(n);
  rep.decision.p_total.assign(n, 0.0);
  const std::size_t instances = controller == Controller::coa ? 1 : n;
  if (memory && memory->plans.size() != instances) memory->plans.assign(instances, {});

  if (controller == Controller::coa) {
    const BuiltProblem built = build_coa(k, states, fc, tariffs, houses, config);
    rep.warnings = built.warnings;
    const Solved s = solve_built(built, config, memory ? &memory->plans[0] : nullptr, rep.warnings);
    rep.stats = s.stats;
    if (s.ok) {
      rep.decision = decode(built, houses, s.values);
      rep.planned_objective = s.objective;
      return rep;
    }
    rep.fallback = true;
    rep.warnings.push_back(fmt::format("step {}: community problem infeasible, safe decisions applied", k));
    for (std::size_t i = 0; i < n; ++i) fill_safe(rep.decision, i, houses[i], states[i], fc, k, config.dt_hours);
    if (memory) memory->plans[0].clear();
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const BuiltProblem built =
          build_moa_member(static_cast<int>(i), k, states[i], fc, tariffs, houses[i], config);
      rep.warnings.insert(rep.warnings.end(), built.warnings.begin(), built.warnings.end());
      const Solved s = solve_built(built, config, memory ? &memory->plans[i] : nullptr, rep.warnings);
      accumulate(rep.stats, s.stats);
      if (s.ok) {
        const ControlDecision d = decode(built, houses, s.values);
        rep.decision.houses[i] = d.houses[i];
        rep.decision.p_total[i] = d.p_total[i];
        rep.planned_objective += s.objective;
      } else {
        rep.fallback = true;
        rep.warnings.push_back(fmt::format("step {}: member {} problem infeasible, safe decisions applied", k, i));
        fill_safe(rep.decision, i, houses[i], states[i], fc, k, config.dt_hours);
        if (memory) memory->plans[i].clear();
      }
    }
  }
  double total = 0.0;
  for (double p : rep.decision.p_total) total += p;
  rep.decision.p_sh = std::min(std::max(0.0, fc.pv[0]), total);
  return rep;
}

}  // namespace rec
