#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "rec/devices.hpp"

using namespace rec;
using milp::LinExpr;
using milp::Sense;

namespace {

milp::MilpOptions exact() {
  milp::MilpOptions o;
  o.rel_gap = 0.0;
  return o;
}

// Cost of running `powers` from `start` against per-step prices.
double run_cost(const std::vector<double>& powers, const std::vector<double>& price, int start, double dt) {
  double c = 0.0;
  for (std::size_t j = 0; j < powers.size(); ++j) c += price[static_cast<std::size_t>(start) + j] * powers[j] * dt;
  return c;
}

double brute_force_start(const std::vector<double>& powers, const std::vector<double>& price, int k1, int k2,
                         double dt) {
  double best = std::numeric_limits<double>::infinity();
  for (int s = k1; s + static_cast<int>(powers.size()) - 1 <= k2; ++s) best = std::min(best, run_cost(powers, price, s, dt));
  return best;
}

struct ApplianceSolve {
  double objective = 0.0;
  std::vector<double> power;
  std::vector<double> active;
};

ApplianceSolve solve_appliance(const ApplianceProgram& prog, const ApplianceRun& run, const Horizon& h,
                               const std::vector<double>& price, Formulation form) {
  milp::Problem p;
  const auto rows = appliance_constraint_rows(p, "a", h, run, prog, form);
  LinExpr obj;
  for (int t = 0; t < h.T; ++t) obj += (price[static_cast<std::size_t>(t)] * h.dt) * rows.power[static_cast<std::size_t>(t)];
  p.add_objective(obj);
  const auto sol = milp::solve_milp(p, exact());
  EXPECT_EQ(sol.status, milp::Status::optimal);
  ApplianceSolve out;
  out.objective = sol.objective;
  for (int t = 0; t < h.T; ++t) {
    out.power.push_back(rows.power[static_cast<std::size_t>(t)].evaluate(sol.values));
    out.active.push_back(rows.active[static_cast<std::size_t>(t)].evaluate(sol.values));
  }
  return out;
}

}  // namespace

TEST(Thermal, WorkedValues) {
  ThermalParams p;
  EXPECT_DOUBLE_EQ(thermal_step(20.0, {}, 20.0, p, 0.25), 20.0);
  const double a = std::exp(-0.2);
  const double free = a * 23.0 + (1 - a) * 30.0;
  EXPECT_NEAR(thermal_step(23.0, {}, 30.0, p, 0.25), free, 1e-12);
  EXPECT_NEAR(free, 24.268885, 1e-6);
  const double cooled = thermal_step(23.0, {0.0, 0.7}, 30.0, p, 0.25);
  EXPECT_NEAR(cooled, free - (1 - a) * 12.5 * 3.0 * 0.7, 1e-12);
  EXPECT_NEAR(cooled, 19.510567, 1e-6);
}

TEST(Thermal, Superposition) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ThermalParams p;
  const AcsDecision zero{};
  for (int i = 0; i < 200; ++i) {
    const double th = 25 + 5 * u(rng), ex = 28 + 5 * u(rng);
    const AcsDecision d{0.5 + 0.5 * u(rng), 0.35 + 0.35 * u(rng)};
    const double f = thermal_step(th, d, ex, p, 0.25);
    const double parts = thermal_step(th, zero, 0.0, p, 0.25) + thermal_step(0.0, d, 0.0, p, 0.25) +
                         thermal_step(0.0, zero, ex, p, 0.25);
    EXPECT_NEAR(f, parts, 1e-12);
    const double s = 1.0 + u(rng);
    EXPECT_NEAR(thermal_step(s * th, {s * d.p_h, s * d.p_c}, s * ex, p, 0.25), s * f, 1e-12);
  }
}

TEST(AcsRows, FlagsOffLeaveNoDecisions) {
  milp::Problem p;
  const Horizon h{0, 4, 0.25};
  const std::vector<std::uint8_t> off(4, 0);
  const std::vector<double> ex(4, 30.0);
  const auto rows = acs_constraint_rows(p, "h.", h, off, off, {}, 23.0, ex, 10.0, Formulation::canonical);
  EXPECT_EQ(p.num_rows(), 4);
  for (const auto& v : p.variables())
    if (v.name.starts_with("h.p")) EXPECT_EQ(v.ub, 0.0);
  EXPECT_TRUE(rows.penalty.is_constant());
}

TEST(AcsRows, CoolingComfortRows) {
  milp::Problem p;
  const Horizon h{0, 4, 0.25};
  const std::vector<std::uint8_t> off(4, 0), on(4, 1);
  const std::vector<double> ex(4, 30.0);
  acs_constraint_rows(p, "h.", h, off, on, {}, 30.0, ex, 10.0, Formulation::canonical);
  int comfort = 0;
  for (const auto& r : p.rows())
    if (r.name.starts_with("h.comfort")) {
      ++comfort;
      EXPECT_EQ(r.sense, Sense::le);
      EXPECT_DOUBLE_EQ(r.rhs, 23.0);
    }
  EXPECT_EQ(comfort, 4);
}

TEST(AcsRows, HeatingComfortRows) {
  milp::Problem p;
  const Horizon h{0, 3, 0.25};
  const std::vector<std::uint8_t> off(3, 0), on(3, 1);
  const std::vector<double> ex(3, 10.0);
  acs_constraint_rows(p, "h.", h, on, off, {}, 18.0, ex, 10.0, Formulation::canonical);
  for (const auto& r : p.rows())
    if (r.name.starts_with("h.comfort")) EXPECT_EQ(r.sense, Sense::ge);
}

// The optimizer's temperature trajectory equals the ground-truth stepper fed
// with the planned powers and the same outdoor series.
TEST(AcsRows, PlannedTrajectoryMatchesSimulation) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Formulation form : {Formulation::canonical, Formulation::compact}) {
    for (int trial = 0; trial < 10; ++trial) {
      const int T = 24;
      ThermalParams par;
      par.theta_sp = 22 + 3 * u(rng);
      std::vector<std::uint8_t> heat(T, 0), cool(T, 0);
      for (int t = 6; t < 18; ++t) cool[static_cast<std::size_t>(t)] = 1;
      std::vector<double> ex(T);
      for (double& e : ex) e = 26 + 8 * u(rng);
      milp::Problem p;
      const Horizon h{0, T, 0.25};
      const auto rows = acs_constraint_rows(p, "h.", h, heat, cool, par, 27.0, ex, 10.0, form);
      LinExpr obj = rows.penalty;
      for (int t = 0; t < T; ++t) obj += (0.1 + 0.2 * u(rng)) * 0.25 * rows.p_c[static_cast<std::size_t>(t)];
      p.add_objective(obj);
      const auto sol = milp::solve_lp(p);
      ASSERT_EQ(sol.status, milp::Status::optimal);
      double theta = 27.0;
      for (int t = 0; t < T; ++t) {
        const auto ut = static_cast<std::size_t>(t);
        const AcsDecision d{std::max(0.0, rows.p_h[ut].evaluate(sol.values)), std::max(0.0, rows.p_c[ut].evaluate(sol.values))};
        theta = thermal_step(theta, d, ex[ut], par, 0.25);
        EXPECT_NEAR(theta, rows.theta_next[ut].evaluate(sol.values), 1e-9);
      }
    }
  }
}

// Total slack is zero whenever the hard comfort constraint is satisfiable.
TEST(AcsRows, SlackVanishesWhenHardComfortIsFeasible) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int feasible_cases = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int T = 16;
    ThermalParams par;
    std::vector<std::uint8_t> heat(T, 0), cool(T, 0);
    const int from = static_cast<int>(8 * u(rng));
    for (int t = from; t < T; ++t) cool[static_cast<std::size_t>(t)] = 1;
    std::vector<double> ex(T);
    for (double& e : ex) e = 24 + 14 * u(rng);
    const double theta0 = 22 + 6 * u(rng);
    const Horizon h{0, T, 0.25};

    milp::Problem soft;
    const auto rows = acs_constraint_rows(soft, "h.", h, heat, cool, par, theta0, ex, 10.0, Formulation::canonical);
    LinExpr obj = rows.penalty;
    for (int t = 0; t < T; ++t) obj += 0.3 * 0.25 * rows.p_c[static_cast<std::size_t>(t)];
    soft.add_objective(obj);
    const auto s = milp::solve_lp(soft);
    ASSERT_EQ(s.status, milp::Status::optimal);
    const double slack = rows.penalty.evaluate(s.values) / 10.0;

    milp::Problem hard = soft;
    for (int j = 0; j < hard.num_variables(); ++j)
      if (hard.variables()[static_cast<std::size_t>(j)].name.starts_with("h.slack")) hard.set_bounds(j, 0.0, 0.0);
    const auto hs = milp::solve_lp(hard);
    if (hs.status == milp::Status::optimal) {
      ++feasible_cases;
      EXPECT_NEAR(slack, 0.0, 1e-9);
    } else {
      EXPECT_GT(slack, 0.0);
    }
  }
  EXPECT_GT(feasible_cases, 5);
}

TEST(ApplianceRows, WorkedStartCosts) {
  const ApplianceProgram prog{"p", {1.0, 2.0}};
  const std::vector<double> price{3, 1, 1, 3};
  EXPECT_DOUBLE_EQ(run_cost(prog.phase_powers, price, 0, 0.25), 1.25);
  EXPECT_DOUBLE_EQ(run_cost(prog.phase_powers, price, 1, 0.25), 0.75);
  EXPECT_DOUBLE_EQ(run_cost(prog.phase_powers, price, 2, 0.25), 1.75);
  ApplianceRun run;
  run.k2 = 3;
  for (Formulation form : {Formulation::canonical, Formulation::compact}) {
    const auto s = solve_appliance(prog, run, {0, 4, 0.25}, price, form);
    EXPECT_NEAR(s.objective, 0.75, 1e-9);
    EXPECT_NEAR(s.power[1], 1.0, 1e-9);
    EXPECT_NEAR(s.power[2], 2.0, 1e-9);
  }
}

TEST(ApplianceRows, SingleStepWindowForcesThePhase) {
  const ApplianceProgram prog{"p", {1.7}};
  ApplianceRun run;
  run.k1 = run.k2 = 2;
  const std::vector<double> price(4, 1.0);
  for (Formulation form : {Formulation::canonical, Formulation::compact}) {
    const auto s = solve_appliance(prog, run, {0, 4, 0.25}, price, form);
    EXPECT_NEAR(s.power[2], 1.7, 1e-9);
  }
}

TEST(ApplianceRows, CompletedRunDrawsNothing) {
  const ApplianceProgram prog{"p", {1.0, 2.0}};
  ApplianceRun run;
  run.k2 = 3;
  run.completed = true;
  milp::Problem p;
  const auto rows = appliance_constraint_rows(p, "a", {0, 4, 0.25}, run, prog, Formulation::canonical);
  EXPECT_EQ(p.num_variables(), 0);
  for (const auto& e : rows.power) EXPECT_TRUE(e.is_constant() && e.constant == 0.0);
}

TEST(ApplianceRows, StartedRunContinuesBackToBack) {
  const ApplianceProgram prog{"p", {1.0, 2.0, 3.0}};
  ApplianceRun run;
  run.k2 = 9;
  run.next_phase = 2;
  milp::Problem p;
  const auto rows = appliance_constraint_rows(p, "a", {4, 4, 0.25}, run, prog, Formulation::compact);
  EXPECT_DOUBLE_EQ(rows.power[0].constant, 2.0);
  EXPECT_DOUBLE_EQ(rows.power[1].constant, 3.0);
  EXPECT_DOUBLE_EQ(rows.power[2].constant, 0.0);
}

TEST(ApplianceRows, DeadlineUnmeetable) {
  const ApplianceProgram prog{"p", {1.0, 2.0, 3.0}};
  ApplianceRun run;
  run.k2 = 5;
  milp::Problem p;
  EXPECT_THROW(appliance_constraint_rows(p, "a", {4, 8, 0.25}, run, prog, Formulation::canonical), DeadlineUnmeetable);
}

// Both formulations against brute-force start enumeration, with windows that
// may end inside or past the horizon.
TEST(ApplianceRows, CanonicalAndCompactAgreeWithEnumeration) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int M = 1 + static_cast<int>(4 * u(rng));
    std::vector<double> powers(static_cast<std::size_t>(M));
    for (double& w : powers) w = 0.1 + 2.0 * u(rng);
    const ApplianceProgram prog{"p", powers};
    ApplianceRun run;
    run.k1 = static_cast<int>(4 * u(rng));
    run.k2 = run.k1 + M - 1 + static_cast<int>(6 * u(rng));
    const int T = trial % 2 == 0 ? run.k2 + 1 + static_cast<int>(3 * u(rng)) : std::max(1, run.k2 - 1);
    std::vector<double> price(static_cast<std::size_t>(std::max(T, run.k2 + 1)));
    for (double& c : price) c = std::round(10 * u(rng)) / 10.0;
    const Horizon h{0, T, 0.25};
    const auto canon = solve_appliance(prog, run, h, price, Formulation::canonical);
    const auto compact = solve_appliance(prog, run, h, price, Formulation::compact);
    EXPECT_NEAR(canon.objective, compact.objective, 1e-6) << "trial " << trial;
    if (run.k2 < T) {
      EXPECT_NEAR(canon.objective, brute_force_start(powers, price, run.k1, run.k2, 0.25), 1e-6);
      for (const auto* s : {&canon, &compact}) {
        // Exactly one contiguous, ordered run inside the window.
        int first = -1, count = 0;
        for (int t = 0; t < T; ++t)
          if (s->active[static_cast<std::size_t>(t)] > 0.5) {
            if (first < 0) first = t;
            EXPECT_EQ(t, first + count);
            EXPECT_NEAR(s->power[static_cast<std::size_t>(t)], powers[static_cast<std::size_t>(count)], 1e-9);
            ++count;
          }
        EXPECT_EQ(count, M);
        EXPECT_GE(first, run.k1);
        EXPECT_LE(first + M - 1, run.k2);
      }
    }
  }
}

TEST(PevRows, FullChargeEqualityInsideHorizon) {
  PevParams par;
  PevSession s;
  s.k1 = 2;
  s.k2 = 11;
  s.remaining_kwh = pev_required_grid_kwh(par, 0.6);
  milp::Problem p;
  const auto rows = pev_constraint_rows(p, "v.", {0, 16, 0.25}, s, par);
  LinExpr obj;
  for (int t = 0; t < 16; ++t) obj += (t % 3 == 0 ? 0.2 : 0.3) * 0.25 * rows.power[static_cast<std::size_t>(t)];
  p.add_objective(obj);
  const auto sol = milp::solve_lp(p);
  ASSERT_EQ(sol.status, milp::Status::optimal);
  double energy = 0.0;
  for (int t = 0; t < 16; ++t) {
    const double pw = rows.power[static_cast<std::size_t>(t)].evaluate(sol.values);
    if (t < 2 || t > 11) EXPECT_EQ(pw, 0.0);
    energy += 0.25 * pw;
  }
  EXPECT_NEAR(energy * par.eta_b, par.e_b * 0.4, 1e-9);
}

TEST(PevRows, NothingOwedNeedsNoVariables) {
  PevSession s;
  s.k2 = 5;
  milp::Problem p;
  pev_constraint_rows(p, "v.", {0, 8, 0.25}, s, {});
  EXPECT_EQ(p.num_variables(), 0);
}

TEST(PevRows, UnmeetableDeadline) {
  PevParams par;
  PevSession s;
  s.k1 = 0;
  s.k2 = 9;
  s.remaining_kwh = 9.0 / par.eta_b;  // 9 kWh into the battery, 8.55 reachable
  milp::Problem p;
  EXPECT_THROW(pev_constraint_rows(p, "v.", {0, 16, 0.25}, s, par), DeadlineUnmeetable);
}

TEST(PevRows, CatchUpKeepsTheTailReachable) {
  PevParams par;
  PevSession s;
  s.k1 = 0;
  s.k2 = 19;
  s.remaining_kwh = 16.0;  // 20 steps hold 18 kWh
  milp::Problem p;
  const auto rows = pev_constraint_rows(p, "v.", {0, 8, 0.25}, s, par);
  LinExpr obj;
  for (const auto& e : rows.power) obj += e;
  p.add_objective(obj);
  const auto sol = milp::solve_lp(p);
  ASSERT_EQ(sol.status, milp::Status::optimal);
  // 12 later steps carry at most 10.8 kWh, so at least 5.2 kWh now.
  EXPECT_NEAR(sol.objective * 0.25, 16.0 - 10.8, 1e-9);
}

TEST(Balance, SumIdentityAndCap) {
  for (Formulation form : {Formulation::canonical, Formulation::compact}) {
    milp::Problem p;
    const auto pev = p.add_variable("pp", 0.0, 3.6);
    const auto app = p.add_variable("pa", 0.0, 2.0);
    const std::vector<LinExpr> dev{LinExpr::var(pev) + LinExpr::var(app)};
    const std::vector<double> ul{0.5};
    const auto rows = balance_rows(p, "b.", {0, 1, 0.25}, 6.0, ul, dev, form);
    EXPECT_TRUE(rows.warnings.empty());
    p.set_bounds(pev, 3.6, 3.6);
    p.set_bounds(app, 2.0, 2.0);
    EXPECT_EQ(milp::solve_lp(p).status, milp::Status::infeasible);
    p.set_bounds(app, 0.0, 0.0);
    const auto sol = milp::solve_lp(p);
    ASSERT_EQ(sol.status, milp::Status::optimal);
    EXPECT_NEAR(rows.total[0].evaluate(sol.values), 4.1, 1e-12);
  }
}

TEST(Balance, UncontrollableLoadAboveCapRelaxesIt) {
  milp::Problem p;
  const std::vector<LinExpr> dev{LinExpr(0.0)};
  const std::vector<double> ul{6.5};
  const auto rows = balance_rows(p, "b.", {0, 1, 0.25}, 6.0, ul, dev, Formulation::canonical);
  ASSERT_EQ(rows.warnings.size(), 1U);
  const auto sol = milp::solve_lp(p);
  ASSERT_EQ(sol.status, milp::Status::optimal);
  EXPECT_NEAR(rows.total[0].evaluate(sol.values), 6.5, 1e-12);
}

namespace {

HouseModel test_house() {
  HouseModel h;
  h.id = "t";
  h.appliances.push_back({"washer", {{"std", {0.5, 2.0}}}});
  return h;
}

}  // namespace

TEST(HouseStep, IdleHouseOnlyDrifts) {
  const HouseModel h = test_house();
  const HouseState s = initial_state(h);
  const auto r = simulate_house_step(h, s, {}, 0, 30.0, 0.3, 0.25);
  EXPECT_NEAR(r.next.theta, thermal_step(s.theta, {}, 30.0, h.thermal, 0.25), 1e-15);
  EXPECT_DOUBLE_EQ(r.p_total, 0.3);
}

TEST(HouseStep, AppliancePhasesAdvanceToCompletion) {
  const HouseModel h = test_house();
  HouseState s = initial_state(h);
  ApplianceRun run;
  run.k1 = 0;
  run.k2 = 5;
  s.appliances[0] = run;
  HouseDecision d;
  d.appliance_kw = {0.5};
  d.appliance_run = {1};
  auto r = simulate_house_step(h, s, d, 1, 25.0, 0.0, 0.25);
  EXPECT_EQ(r.next.appliances[0]->next_phase, 2);
  EXPECT_EQ(r.next.appliances[0]->started_at, 1);
  EXPECT_DOUBLE_EQ(r.p_total, 0.5);
  d.appliance_kw = {2.0};
  r = simulate_house_step(h, r.next, d, 2, 25.0, 0.0, 0.25);
  EXPECT_TRUE(r.next.appliances[0]->completed);
}

TEST(HouseStep, PevDrawDecrementsOwedEnergy) {
  const HouseModel h = test_house();
  HouseState s = initial_state(h);
  PevSession ses;
  ses.k2 = 10;
  ses.remaining_kwh = 5.0;
  s.pev = ses;
  HouseDecision d;
  d.pev_kw = 3.6;
  const auto r = simulate_house_step(h, s, d, 0, 25.0, 0.0, 0.25);
  EXPECT_NEAR(r.next.pev->remaining_kwh, 5.0 - 0.9, 1e-12);
  EXPECT_NEAR(r.next.pev->delivered_battery_kwh, 0.95 * 0.9, 1e-12);
}

TEST(HouseStep, RejectsDecisionsOutsideBounds) {
  const HouseModel h = test_house();
  HouseState s = initial_state(h);
  HouseDecision cool;
  cool.acs.p_c = 0.5;  // no cooling window
  EXPECT_THROW(simulate_house_step(h, s, cool, 0, 25.0, 0.0, 0.25), DecisionError);
  s.acs.push_back({0, 10, false});
  cool.acs.p_c = 0.7 + 1e-6;
  EXPECT_THROW(simulate_house_step(h, s, cool, 0, 25.0, 0.0, 0.25), DecisionError);
  cool.acs.p_c = 0.7 + 1e-10;
  EXPECT_NO_THROW(simulate_house_step(h, s, cool, 0, 25.0, 0.0, 0.25));

  HouseDecision charge;
  charge.pev_kw = 1.0;  // not plugged in
  EXPECT_THROW(simulate_house_step(h, s, charge, 0, 25.0, 0.0, 0.25), DecisionError);

  HouseDecision wash;
  wash.appliance_kw = {0.5};
  wash.appliance_run = {1};  // nothing requested
  EXPECT_THROW(simulate_house_step(h, s, wash, 0, 25.0, 0.0, 0.25), DecisionError);
}

TEST(HouseStep, RunningProgramCannotBeInterrupted) {
  const HouseModel h = test_house();
  HouseState s = initial_state(h);
  ApplianceRun run;
  run.k2 = 5;
  run.next_phase = 2;
  run.started_at = 0;
  s.appliances[0] = run;
  EXPECT_THROW(simulate_house_step(h, s, {}, 1, 25.0, 0.0, 0.25), DecisionError);
}
