#pragma once

// Receding-horizon controllers. The community controller (coa) minimizes the
// members' energy cost minus the shared-energy incentive; the member
// controller (moa) minimizes each member's own bill independently.

#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "rec/core.hpp"
#include "rec/devices.hpp"
#include "rec/milp.hpp"

namespace rec {

enum class Controller { coa, moa };

const char* to_string(Controller c);

struct ForecastBundle {
  int k0 = 0;
  std::vector<double> pv;                // kW per horizon step
  std::vector<std::vector<double>> ul;   // [house][horizon step], kW
  std::vector<double> theta_ex;          // degC per horizon step

  int length() const { return static_cast<int>(pv.size()); }
};

struct ControlDecision {
  std::vector<HouseDecision> houses;
  std::vector<double> p_total;  // planned P^i at the current step
  double p_sh = 0.0;            // planned shared power at the current step
};

struct MpcConfig {
  double dt_hours = 0.25;
  int horizon_T = 96;
  Formulation formulation = Formulation::compact;
  double slack_weight = 10.0;  // currency per degC per step
  // Relative gap and node budget suited to closed-loop control; set
  // rel_gap = 0 and soft_node_limit = -1 for proven optima.
  milp::MilpOptions milp{.rel_gap = 1e-3, .soft_node_limit = 1000, .lp = {}, .start = {}};
  bool warm_start = true;
};

// Problem and the expressions needed to read decisions back out of it.
struct BuiltProblem {
  struct House {
    int index = 0;
    AcsRows acs;
    std::vector<ApplianceRows> appliances;
    PevRows pev;
    BalanceRows balance;
    std::vector<milp::LinExpr> device_power;
    std::vector<std::string> forced;  // devices driven by the safe rule
  };

  milp::Problem problem;
  Horizon horizon;
  std::vector<House> houses;
  std::vector<milp::LinExpr> p_sh;  // coa only
  std::vector<std::string> warnings;
};

// Horizon length used at step k: the configured T cut at the end of the run.
int horizon_length(const MpcConfig& config, int k, int n_steps);

BuiltProblem build_coa(int k, const std::vector<HouseState>& states, const ForecastBundle& forecasts,
                       const TariffSet& tariffs, const std::vector<HouseModel>& houses, const MpcConfig& config);

BuiltProblem build_moa_member(int member, int k, const HouseState& state, const ForecastBundle& forecasts,
                              const TariffSet& tariffs, const HouseModel& house, const MpcConfig& config);

// Decision at horizon step t of a solved problem.
ControlDecision decode(const BuiltProblem& built, const std::vector<HouseModel>& houses,
                       const std::vector<double>& values, int t = 0);

// Rule-based decision used when no optimized plan exists: start pending
// programs at their latest feasible start, charge at rated power, and drive
// the ACS toward its set-point within its bounds.
HouseDecision safe_decision(const HouseModel& house, const HouseState& state, int k, double theta_ex,
                            double dt_hours);

class SolverBreakdown : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Previous plans keyed by variable name, used to seed the next solve.
struct MpcMemory {
  std::vector<std::unordered_map<std::string, double>> plans;  // one per problem instance
};

struct StepReport {
  ControlDecision decision;
  std::vector<std::string> warnings;
  bool fallback = false;
  milp::SolveStats stats;
  double planned_objective = 0.0;
};

// One receding-horizon step. Throws SolverBreakdown when the solver stops
// without any feasible plan for a problem that is not proven infeasible.
StepReport mpc_step(Controller controller, int k, const std::vector<HouseState>& states,
                    const ForecastBundle& forecasts, const TariffSet& tariffs, const std::vector<HouseModel>& houses,
                    const MpcConfig& config, MpcMemory* memory = nullptr);

}  // namespace rec
