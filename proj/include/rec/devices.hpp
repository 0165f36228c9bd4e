#pragma once

// Smart-home device models: the thermal stepper and per-step ground-truth
// simulation, plus the constraint-row generators that describe each device
// to the optimizer over a receding horizon.
//
// Row generators name their variables "<prefix><tag>@<absolute step>" so a
// plan from one control step can seed the next one.

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rec/core.hpp"
#include "rec/milp.hpp"

namespace rec {

struct AcsDecision {
  double p_h = 0.0;  // kW
  double p_c = 0.0;  // kW
};

double thermal_step(double theta, const AcsDecision& decision, double theta_ex, const ThermalParams& params,
                    double dt_hours);

// Lowest and highest indoor temperature the optimizer may plan for.
inline constexpr double kThetaMin = -30.0;
inline constexpr double kThetaMax = 60.0;

// canonical: one variable per modelled quantity and the literal automaton.
// compact: start-time binaries, substituted temperatures and power
// expressions; same feasible set projected on the decisions.
enum class Formulation { canonical, compact };

const char* to_string(Formulation f);

class DeadlineUnmeetable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Absolute steps [k0, k0 + T - 1].
struct Horizon {
  int k0 = 0;
  int T = 1;
  double dt = 0.25;

  int end() const { return k0 + T - 1; }
  bool contains(int k) const { return k >= k0 && k <= end(); }
};

std::string var_name(const std::string& prefix, const char* tag, int step);

// ---- ACS ------------------------------------------------------------------

struct AcsRows {
  std::vector<milp::LinExpr> p_h;         // per horizon step
  std::vector<milp::LinExpr> p_c;
  std::vector<milp::LinExpr> theta_next;  // indoor temperature after each step
  milp::LinExpr penalty;                  // slack cost, to add to the objective
};

// heat/cool: U^h, U^c per horizon step. theta_ex: forecast per horizon step.
AcsRows acs_constraint_rows(milp::Problem& problem, const std::string& prefix, const Horizon& horizon,
                            std::span<const std::uint8_t> heat, std::span<const std::uint8_t> cool,
                            const ThermalParams& params, double theta_now, std::span<const double> theta_ex,
                            double slack_weight, Formulation form);

// ---- phases-based appliance -----------------------------------------------

struct ApplianceRows {
  std::vector<milp::LinExpr> power;   // kW per horizon step
  std::vector<milp::LinExpr> active;  // 1 when a phase runs at that step
};

// Throws DeadlineUnmeetable when a program that has not started can no
// longer finish inside its window.
ApplianceRows appliance_constraint_rows(milp::Problem& problem, const std::string& prefix, const Horizon& horizon,
                                        const ApplianceRun& run, const ApplianceProgram& program,
                                        Formulation form);

// Latest step at which the program can start and still end by k2.
inline int latest_start(const ApplianceRun& run, const ApplianceProgram& program) {
  return run.k2 - program.phases() + 1;
}

// ---- PEV ------------------------------------------------------------------

struct PevRows {
  std::vector<milp::LinExpr> power;  // kW per horizon step
};

// Throws DeadlineUnmeetable when the grid energy still owed cannot be drawn
// at rated power before k2.
PevRows pev_constraint_rows(milp::Problem& problem, const std::string& prefix, const Horizon& horizon,
                            const PevSession& session, const PevParams& params);

// Grid-side energy the charger can still draw from step k to k2 at rated power.
double pev_capacity_kwh(const PevSession& session, const PevParams& params, int k, double dt_hours);

// ---- balance --------------------------------------------------------------

struct BalanceRows {
  std::vector<milp::LinExpr> total;  // P^i per horizon step
  std::vector<std::string> warnings;
};

// device_power[t] is the sum of controllable device powers at horizon step t.
BalanceRows balance_rows(milp::Problem& problem, const std::string& prefix, const Horizon& horizon, double p_max,
                         std::span<const double> ul_forecast, const std::vector<milp::LinExpr>& device_power,
                         Formulation form);

// Largest value `expr` can take given the variable bounds of `problem`.
double upper_bound(const milp::Problem& problem, const milp::LinExpr& expr);

// ---- ground truth -----------------------------------------------------------

struct HouseDecision {
  AcsDecision acs;
  std::vector<double> appliance_kw;    // per appliance
  std::vector<std::uint8_t> appliance_run;  // 1 when the next phase executes now
  double pev_kw = 0.0;
};

struct HouseStepResult {
  HouseState next;
  HouseDecision applied;  // the decision as executed, clipped onto exact bounds
  double p_total = 0.0;   // realized P^i, kW
};

class DecisionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Advances one house by one step. Throws DecisionError when the decision
// breaks a device bound by more than 1e-9 or runs an appliance phase that is
// not due.
HouseStepResult simulate_house_step(const HouseModel& house, const HouseState& state, const HouseDecision& decision,
                                    int k, double theta_ex, double ul, double dt_hours);

}  // namespace rec
