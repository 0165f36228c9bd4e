#pragma once

// Closed-loop simulation: synthetic scenarios, forecasts, the control loop
// over ground-truth house models, and the report files.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rec/core.hpp"
#include "rec/mpc.hpp"
#include "rec/settlement.hpp"

namespace rec {

enum class RunMode { coa, moa, both };
enum class UlForecast { trailing_week, perfect };

struct SimConfig {
  std::string scenario_path;
  std::string actuals_path;  // optional CSV replacing the PV and outdoor temperature series
  RunMode mode = RunMode::both;
  std::optional<std::uint64_t> seed;  // forecast noise; defaults to the scenario seed
  double pv_err = 0.10;
  double temp_err = 0.10;
  UlForecast ul_forecast = UlForecast::trailing_week;
  std::string out_dir;
  Aggregation aggregation = Aggregation::step;
  AllocationPolicy policy = AllocationPolicy::loss_compensating;
  std::optional<int> horizon_T;  // overrides the scenario grid
  bool pev_relax_max_soc = false;
  MpcConfig mpc;                 // dt and horizon are filled from the scenario
  // Called after every simulated step with (controller, steps done, total).
  std::function<void(Controller, int, int)> on_step;
};

Scenario generate_scenario(int houses, int days, std::uint64_t seed);

// Forecasts issued at step k for [k, k + T). cold_start is set when the
// trailing-week UL average had no history and fell back on the day itself.
ForecastBundle make_forecasts(const Scenario& scenario, const SimConfig& config, std::uint64_t seed, int k, int T,
                              bool* cold_start = nullptr);

struct EventRecord {
  int step = 0;
  int house = -1;  // -1: community
  std::string kind;
  std::string detail;
};

struct ProgramOutcome {
  int house = 0;
  int appliance = 0;
  int k1 = 0, k2 = 0;
  int phases = 0;
  int started_at = -1;
  int finished_at = -1;  // last executed step
  int executed = 0;      // phases run so far
  bool dropped = false;  // declared while a previous run was still going
};

struct PevOutcome {
  int house = 0;
  int k1 = 0, k2 = 0;
  double target_battery_kwh = 0.0;
  double delivered_battery_kwh = 0.0;
  bool relaxed = false;
  bool met = false;
};

struct ControllerRun {
  Controller controller = Controller::coa;
  SettlementLedger ledger;
  std::vector<std::vector<HouseDecision>> applied;  // [step][house]
  std::vector<std::vector<double>> ul;              // [step][house], actual
  std::vector<std::vector<double>> theta_end;       // [step][house], after the step
  std::vector<std::vector<double>> pev_owed;        // [step][house], after the step
  std::vector<EventRecord> events;
  std::vector<ProgramOutcome> programs;
  std::vector<PevOutcome> sessions;
  double comfort_excess = 0.0;  // sum over comfort steps of degrees past the set-point
  int fallback_steps = 0;
  milp::SolveStats stats;
  double seconds = 0.0;
};

struct RunReport {
  std::vector<ControllerRun> runs;
  std::optional<BillSummary> summary;  // both mode only
};

// Closed loop of one controller over the whole scenario. simulate_into
// fills `out` step by step so a partial log survives a SolverBreakdown.
ControllerRun simulate(const Scenario& scenario, Controller controller, const SimConfig& config);
void simulate_into(const Scenario& scenario, Controller controller, const SimConfig& config, ControllerRun& out);

// Replaces pv_series and theta_ex_series from a CSV with columns
// step,pv_kw,theta_ex_c. Throws ScenarioFormatError.
void load_actuals(Scenario& scenario, const std::string& path);

// Validates, simulates the configured controllers, settles and writes the
// report files when out_dir is set. Throws ValidationError, SolverBreakdown.
RunReport run_scenario(const Scenario& scenario, const SimConfig& config);

// Loads config.scenario_path, then run_scenario.
RunReport run(const SimConfig& config);

void write_outputs(const Scenario& scenario, const SimConfig& config, const RunReport& report);

}  // namespace rec
