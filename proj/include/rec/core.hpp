#pragma once

// Domain types shared by every module: time grid, tariffs, house models,
// user requests and the per-house dynamic state.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rec {

struct TimeGrid {
  double dt_hours = 0.25;
  int n_steps = 96;
  int horizon_T = 96;
  // Wall-clock time of step 0, used for report timestamps only.
  std::string start_iso = "2022-06-13T00:00:00";

  int steps_per_day() const { return static_cast<int>(std::lround(24.0 / dt_hours)); }
};

// Calendar position of a step. Throws std::invalid_argument when start_iso
// is not of the form YYYY-MM-DDTHH:MM:SS.
struct StepClock {
  std::string iso;   // YYYY-MM-DDTHH:MM:SS
  int weekday = 0;   // 0 = Monday
  double hour = 0;   // hour of day, fractional
  int day = 0;       // whole days since step 0's midnight
};

StepClock step_clock(const TimeGrid& grid, int k);
bool valid_start_iso(const std::string& iso);

struct TariffSet {
  std::vector<std::vector<double>> member_tariff;  // [member][step], currency/kWh
  std::vector<double> market_price;                // [step], currency/kWh
  double incentive_rate = 0.11;                    // currency/kWh of shared energy
};

struct ThermalParams {
  double R = 12.5;      // degC/kW
  double C = 0.1;       // kWh/degC
  double eta_h = 3.5;
  double eta_c = 3.0;
  double p_nom_h = 1.0;  // kW
  double p_nom_c = 0.7;  // kW
  double theta_sp = 23.0;

  double alpha(double dt_hours) const { return std::exp(-dt_hours / (R * C)); }
  double beta(double dt_hours) const { return 1.0 - alpha(dt_hours); }
};

struct ApplianceProgram {
  std::string id;
  std::vector<double> phase_powers;  // kW, one entry per step-long phase

  int phases() const { return static_cast<int>(phase_powers.size()); }
  double energy_kwh(double dt_hours) const;
};

// A phases-based appliance (washer, dishwasher) with its selectable programs.
struct Appliance {
  std::string id;
  std::vector<ApplianceProgram> programs;

  const ApplianceProgram* find_program(const std::string& program_id) const;
};

struct PevParams {
  double p_nom_p = 3.6;  // kW
  double e_b = 15.0;     // kWh
  double eta_b = 0.95;
};

enum class RequestKind { acs_heat, acs_cool, appliance, pev };

const char* to_string(RequestKind kind);
std::optional<RequestKind> parse_request_kind(const std::string& text);

struct RequestWindow {
  RequestKind kind = RequestKind::appliance;
  int house = 0;
  std::string device_id;
  int k1 = 0;
  int k2 = 0;
  std::string program;      // appliance requests
  double soc = 0.0;         // pev requests, initial state of charge in [0,1]
  std::optional<int> declared_at;

  int declaration_step() const { return declared_at.value_or(k1); }
  int length() const { return k2 - k1 + 1; }
};

struct HouseModel {
  std::string id;
  ThermalParams thermal;
  double theta0 = 23.0;  // indoor temperature at step 0
  std::vector<Appliance> appliances;
  PevParams pev;
  double p_max = 6.0;
  std::vector<double> ul_series;  // kW per step

  int appliance_index(const std::string& device_id) const;
};

struct Scenario {
  TimeGrid grid;
  TariffSet tariffs;
  std::vector<HouseModel> houses;
  std::vector<RequestWindow> requests;
  std::vector<double> pv_series;        // kW
  std::vector<double> theta_ex_series;  // degC
  std::uint64_t seed = 0;
};

// ---- dynamic state -------------------------------------------------------

struct ApplianceRun {
  int k1 = 0;
  int k2 = 0;
  int program = 0;     // index into Appliance::programs
  int next_phase = 1;  // 1-based; 1 means not started yet
  int started_at = -1;
  bool completed = false;

  bool started() const { return next_phase > 1 || completed; }
};

struct PevSession {
  int k1 = 0;
  int k2 = 0;
  double target_battery_kwh = 0.0;    // battery-side energy to deliver
  double remaining_kwh = 0.0;         // grid-side energy still owed
  double delivered_battery_kwh = 0.0;
  bool relaxed = false;               // target reduced to the reachable amount
};

struct AcsWindow {
  int k1 = 0;
  int k2 = 0;
  bool heating = false;
};

struct HouseState {
  double theta = 23.0;
  std::vector<std::optional<ApplianceRun>> appliances;  // idle when empty
  std::optional<PevSession> pev;
  std::vector<AcsWindow> acs;

  // U^h / U^c for absolute step k according to the windows known so far.
  bool heating_on(int k) const;
  bool cooling_on(int k) const;
};

HouseState initial_state(const HouseModel& house);

// Grid-side energy that a pev request needs: e_b (1 - soc) / eta_b.
double pev_required_grid_kwh(const PevParams& pev, double soc);
// Battery-side energy deliverable over `steps` steps at rated power.
double pev_deliverable_battery_kwh(const PevParams& pev, int steps, double dt_hours);

// ---- validation ----------------------------------------------------------

struct Violation {
  std::string entity;
  std::string field;
  std::string rule;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

struct ValidationOptions {
  // Accept pev windows too short for a full recharge (target is reduced).
  bool pev_relax_max_soc = false;
};

ValidationReport validate_scenario(const Scenario& scenario, const ValidationOptions& options = {});

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(ValidationReport report)
      : std::runtime_error(report.to_string()), report_(std::move(report)) {}
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

}  // namespace rec
