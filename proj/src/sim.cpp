#include "rec/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "rec/scenario_io.hpp"

namespace rec {

namespace {

// ---- synthetic data -------------------------------------------------------

const std::vector<double> kWasher = {2.0, 2.0, 0.3, 0.2, 0.2, 0.2, 0.3, 0.2, 0.2, 0.5, 0.6};
const std::vector<double> kDishwasher = {0.1, 1.9, 1.9, 0.15, 0.1, 0.1, 1.9, 1.8, 0.1, 0.05};

constexpr double kPvPeakKw = 15.0;
constexpr double kPvDerate = 0.85;
constexpr double kSunrise = 5.5;
constexpr double kSunset = 20.5;

class Draw {
 public:
  explicit Draw(std::uint64_t seed) : gen_(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(gen_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(gen_); }
  double vary(double avg) { return avg * uniform(0.8, 1.2); }

 private:
  std::mt19937_64 gen_;
};

double pv_shape(double hour) {
  if (hour <= kSunrise || hour >= kSunset) return 0.0;
  return std::pow(std::sin(std::numbers::pi * (hour - kSunrise) / (kSunset - kSunrise)), 1.3);
}

double bump(double hour, double center, double width) {
  const double z = (hour - center) / width;
  return std::exp(-0.5 * z * z);
}

std::vector<double> varied_profile(Draw& draw, const std::vector<double>& nominal) {
  std::vector<double> out;
  for (double p : nominal) out.push_back(draw.vary(p));
  return out;
}

}  // namespace

Scenario generate_scenario(int houses, int days, std::uint64_t seed) {
  if (houses < 1 || days < 1) throw std::invalid_argument("generate_scenario needs houses >= 1 and days >= 1");
  Draw draw(seed);
  Scenario sc;
  sc.seed = seed;
  sc.grid.dt_hours = 0.25;
  sc.grid.horizon_T = 96;
  const int spd = sc.grid.steps_per_day();
  const int n = days * spd;
  sc.grid.n_steps = n;
  const double dt = sc.grid.dt_hours;

  std::vector<double> clearness(static_cast<std::size_t>(days)), t_mean(static_cast<std::size_t>(days));
  for (int d = 0; d < days; ++d) {
    clearness[static_cast<std::size_t>(d)] = draw.uniform(0.75, 1.0);
    t_mean[static_cast<std::size_t>(d)] = 26.0 + draw.uniform(-1.0, 1.0);
  }
  sc.pv_series.resize(static_cast<std::size_t>(n));
  sc.theta_ex_series.resize(static_cast<std::size_t>(n));
  sc.tariffs.market_price.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const auto d = static_cast<std::size_t>(k / spd);
    const double hour = (k % spd + 0.5) * dt;
    sc.pv_series[static_cast<std::size_t>(k)] = kPvPeakKw * kPvDerate * clearness[d] * pv_shape(hour);
    // minimum near 3 a.m., maximum near 3 p.m.
    sc.theta_ex_series[static_cast<std::size_t>(k)] = t_mean[d] - 5.0 * std::cos(2.0 * std::numbers::pi * (hour - 3.0) / 24.0);
    sc.tariffs.market_price[static_cast<std::size_t>(k)] =
        0.28 * (1.0 + 0.15 * std::sin(2.0 * std::numbers::pi * (hour - 13.0) / 24.0));
  }
  sc.tariffs.incentive_rate = 0.11;

  for (int i = 0; i < houses; ++i) {
    HouseModel h;
    h.id = fmt::format("sh{}", i + 1);
    ThermalParams th;
    th.R = draw.vary(th.R);
    th.C = draw.vary(th.C);
    th.eta_h = draw.vary(th.eta_h);
    th.eta_c = draw.vary(th.eta_c);
    th.p_nom_h = draw.vary(th.p_nom_h);
    th.p_nom_c = draw.vary(th.p_nom_c);
    th.theta_sp = draw.vary(th.theta_sp);
    h.thermal = th;
    h.pev.p_nom_p = draw.vary(h.pev.p_nom_p);
    h.pev.e_b = draw.vary(h.pev.e_b);
    h.pev.eta_b = std::min(1.0, draw.vary(h.pev.eta_b));
    h.p_max = 6.0;
    h.theta0 = sc.theta_ex_series[0] + 2.0;
    h.appliances.push_back({"washer", {{"standard", varied_profile(draw, kWasher)}}});
    h.appliances.push_back({"dishwasher", {{"standard", varied_profile(draw, kDishwasher)}}});

    const double base = draw.uniform(0.10, 0.16);
    const double morning = draw.uniform(0.3, 0.6);
    const double lunch = draw.uniform(0.1, 0.3);
    const double evening = draw.uniform(0.5, 0.9);
    h.ul_series.resize(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      const double hour = (k % spd + 0.5) * dt;
      const double day_level = hour >= 7.0 && hour < 23.0 ? 0.03 : 0.0;
      const double shape = base + day_level + morning * bump(hour, 7.5, 0.6) + lunch * bump(hour, 13.0, 0.8) +
                           evening * bump(hour, 20.5, 1.2);
      h.ul_series[static_cast<std::size_t>(k)] = shape * draw.uniform(0.8, 1.2);
    }

    sc.tariffs.member_tariff.emplace_back(static_cast<std::size_t>(n));
    const double factor = draw.uniform(0.95, 1.05);
    for (int k = 0; k < n; ++k) {
      const StepClock c = step_clock(sc.grid, k);
      const bool high = c.weekday < 5 && c.hour >= 8.0 && c.hour < 19.0;
      sc.tariffs.member_tariff.back()[static_cast<std::size_t>(k)] = factor * (high ? 0.30 : 0.26);
    }

    // Windows that would run past the last step are not generated.
    for (int d = 0; d < days; ++d) {
      const int base_k = d * spd;
      const auto hours = [&](double a, double b) { return base_k + draw.integer(static_cast<int>(a / dt), static_cast<int>(b / dt)); };

      RequestWindow acs;
      acs.kind = RequestKind::acs_cool;
      acs.house = i;
      acs.device_id = "acs";
      acs.k1 = hours(6.0, 9.0);
      acs.k2 = hours(17.0, 20.0);
      sc.requests.push_back(acs);

      RequestWindow pev;
      pev.kind = RequestKind::pev;
      pev.house = i;
      pev.device_id = "pev";
      pev.k1 = hours(16.0, 22.0);
      pev.k2 = std::max(pev.k1 + 1, hours(18.0, 36.0));
      pev.soc = draw.uniform(0.0, 1.0);
      const double need = h.pev.e_b * (1.0 - pev.soc);
      while (pev_deliverable_battery_kwh(h.pev, pev.length(), dt) < need) ++pev.k2;
      if (pev.k2 <= n - 1) sc.requests.push_back(pev);

      for (const Appliance& app : h.appliances) {
        RequestWindow r;
        r.kind = RequestKind::appliance;
        r.house = i;
        r.device_id = app.id;
        r.program = "standard";
        r.k1 = hours(18.0, 23.0);
        r.k2 = hours(40.0, 41.75);
        if (r.k2 <= n - 1) sc.requests.push_back(r);
      }
    }
    sc.houses.push_back(std::move(h));
  }
  std::stable_sort(sc.requests.begin(), sc.requests.end(),
                   [](const RequestWindow& a, const RequestWindow& b) { return a.k1 < b.k1; });
  return sc;
}

// ---- forecasts ------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in [-1, 1], a pure function of its arguments so every forecast can
// be regenerated independently of the order in which it is requested.
double noise(std::uint64_t seed, std::uint64_t kind, int issue, int target) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ kind);
  h = splitmix64(h ^ static_cast<std::uint64_t>(issue));
  h = splitmix64(h ^ static_cast<std::uint64_t>(target));
  return 2.0 * static_cast<double>(h >> 11) * 0x1.0p-53 - 1.0;
}

}  // namespace

ForecastBundle make_forecasts(const Scenario& sc, const SimConfig& config, std::uint64_t seed, int k, int T,
                              bool* cold_start) {
  ForecastBundle fc;
  fc.k0 = k;
  const int spd = sc.grid.steps_per_day();
  const int day = k / spd;
  if (cold_start) *cold_start = false;
  for (int t = 0; t < T; ++t) {
    const int tau = k + t;
    const double pv = sc.pv_series[static_cast<std::size_t>(tau)];
    const double th = sc.theta_ex_series[static_cast<std::size_t>(tau)];
    fc.pv.push_back(std::max(0.0, pv * (1.0 + config.pv_err * noise(seed, 1, k, tau))));
    fc.theta_ex.push_back(th * (1.0 + config.temp_err * noise(seed, 2, k, tau)));
  }
  fc.ul.resize(sc.houses.size());
  for (std::size_t i = 0; i < sc.houses.size(); ++i) {
    const auto& ul = sc.houses[i].ul_series;
    for (int t = 0; t < T; ++t) {
      const int tau = k + t;
      if (config.ul_forecast == UlForecast::perfect) {
        fc.ul[i].push_back(ul[static_cast<std::size_t>(tau)]);
        continue;
      }
      const int slot = tau % spd;
      if (day == 0) {
        if (cold_start) *cold_start = true;
        fc.ul[i].push_back(ul[static_cast<std::size_t>(slot)]);
        continue;
      }
      double sum = 0.0;
      int count = 0;
      for (int d = std::max(0, day - 7); d < day; ++d, ++count) sum += ul[static_cast<std::size_t>(d * spd + slot)];
      fc.ul[i].push_back(sum / count);
    }
  }
  return fc;
}

// ---- closed loop ----------------------------------------------------------

namespace {

struct Slot {
  int outcome = -1;  // index into ControllerRun::programs
};

class Loop {
 public:
  Loop(const Scenario& sc, Controller controller, const SimConfig& config, ControllerRun& out)
      : sc_(sc), config_(config), out_(out) {
    out_ = ControllerRun{};
    out_.controller = controller;
    out_.ledger.dt_hours = sc.grid.dt_hours;
    out_.ledger.k_begin = 0;
    mpc_ = config.mpc;
    mpc_.dt_hours = sc.grid.dt_hours;
    mpc_.horizon_T = config.horizon_T.value_or(sc.grid.horizon_T);
    seed_ = config.seed.value_or(sc.seed);
    for (const HouseModel& h : sc.houses) {
      states_.push_back(initial_state(h));
      slots_.emplace_back(h.appliances.size());
      session_.push_back(-1);
    }
    order_.resize(sc.requests.size());
    std::iota(order_.begin(), order_.end(), 0);
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return sc.requests[a].declaration_step() < sc.requests[b].declaration_step();
    });
  }

  void run() {
    const auto t0 = std::chrono::steady_clock::now();
    const int n = sc_.grid.n_steps;
    for (int k = 0; k < n; ++k) {
      reveal(k);
      step(k);
      out_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (config_.on_step) config_.on_step(out_.controller, k + 1, n);
    }
    for (const ProgramOutcome& p : out_.programs)
      if (!p.dropped && p.executed < p.phases)
        event(n - 1, p.house, "program_incomplete",
              fmt::format("{} window [{}, {}] ran {} of {} phases", app_id(p), p.k1, p.k2, p.executed, p.phases));
    for (std::size_t i = 0; i < states_.size(); ++i)
      if (session_[i] >= 0) close_session(static_cast<int>(i), n - 1);
  }

 private:
  std::string app_id(const ProgramOutcome& p) const {
    return sc_.houses[static_cast<std::size_t>(p.house)].appliances[static_cast<std::size_t>(p.appliance)].id;
  }

  void event(int k, int house, std::string kind, std::string detail) {
    out_.events.push_back({k, house, std::move(kind), std::move(detail)});
  }

  void reveal(int k) {
    while (next_ < order_.size() && sc_.requests[order_[next_]].declaration_step() <= k) {
      const RequestWindow& r = sc_.requests[order_[next_++]];
      const auto hi = static_cast<std::size_t>(r.house);
      HouseState& st = states_[hi];
      const HouseModel& house = sc_.houses[hi];
      switch (r.kind) {
        case RequestKind::acs_heat:
        case RequestKind::acs_cool:
          st.acs.push_back({r.k1, r.k2, r.kind == RequestKind::acs_heat});
          break;
        case RequestKind::appliance: {
          const int a = house.appliance_index(r.device_id);
          const Appliance& app = house.appliances[static_cast<std::size_t>(a)];
          int program = 0;
          while (app.programs[static_cast<std::size_t>(program)].id != r.program) ++program;
          ProgramOutcome po;
          po.house = r.house;
          po.appliance = a;
          po.k1 = r.k1;
          po.k2 = r.k2;
          po.phases = app.programs[static_cast<std::size_t>(program)].phases();
          auto& slot = st.appliances[static_cast<std::size_t>(a)];
          if (slot && slot->started() && !slot->completed) {
            po.dropped = true;
            event(k, r.house, "request_dropped",
                  fmt::format("{} window [{}, {}] declared while a run is in progress", app.id, r.k1, r.k2));
            out_.programs.push_back(po);
            break;
          }
          ApplianceRun run;
          run.k1 = r.k1;
          run.k2 = r.k2;
          run.program = program;
          slot = run;
          slots_[hi][static_cast<std::size_t>(a)].outcome = static_cast<int>(out_.programs.size());
          out_.programs.push_back(po);
          break;
        }
        case RequestKind::pev: {
          if (session_[hi] >= 0) close_session(r.house, k - 1);
          PevSession s;
          s.k1 = r.k1;
          s.k2 = r.k2;
          s.target_battery_kwh = house.pev.e_b * (1.0 - r.soc);
          const double reach = pev_deliverable_battery_kwh(house.pev, r.length(), sc_.grid.dt_hours);
          if (reach < s.target_battery_kwh) {
            s.target_battery_kwh = reach;
            s.relaxed = true;
            event(k, r.house, "pev_target_relaxed",
                  fmt::format("window [{}, {}] reaches {:.6f} kWh of {:.6f} kWh", r.k1, r.k2, reach,
                              house.pev.e_b * (1.0 - r.soc)));
          }
          s.remaining_kwh = s.target_battery_kwh / house.pev.eta_b;
          st.pev = s;
          session_[hi] = static_cast<int>(out_.sessions.size());
          PevOutcome po;
          po.house = r.house;
          po.k1 = r.k1;
          po.k2 = r.k2;
          po.target_battery_kwh = s.target_battery_kwh;
          po.relaxed = s.relaxed;
          out_.sessions.push_back(po);
          break;
        }
      }
    }
  }

  void close_session(int house, int k) {
    const auto hi = static_cast<std::size_t>(house);
    PevOutcome& po = out_.sessions[static_cast<std::size_t>(session_[hi])];
    po.delivered_battery_kwh = states_[hi].pev ? states_[hi].pev->delivered_battery_kwh : 0.0;
    po.met = std::abs(po.delivered_battery_kwh - po.target_battery_kwh) <= 1e-6;
    if (po.met)
      event(k, house, "pev_completed", fmt::format("{:.6f} kWh delivered", po.delivered_battery_kwh));
    else
      event(k, house, "pev_unmet",
            fmt::format("{:.6f} of {:.6f} kWh delivered by step {}", po.delivered_battery_kwh, po.target_battery_kwh,
                        po.k2));
    states_[hi].pev.reset();
    session_[hi] = -1;
  }

  void step(int k) {
    const int T = horizon_length(mpc_, k, sc_.grid.n_steps);
    bool cold = false;
    const ForecastBundle fc = make_forecasts(sc_, config_, seed_, k, T, &cold);
    if (cold && !cold_reported_) {
      cold_reported_ = true;
      event(k, -1, "forecast_cold_start", "no load history yet; day 0 uses its own profile");
    }

    const StepReport rep = mpc_step(out_.controller, k, states_, fc, sc_.tariffs, sc_.houses, mpc_, &memory_);
    for (const std::string& w : rep.warnings) event(k, -1, "warning", w);
    if (rep.fallback) ++out_.fallback_steps;
    out_.stats.pivots += rep.stats.pivots;
    out_.stats.nodes += rep.stats.nodes;
    out_.stats.lp_solves += rep.stats.lp_solves;
    out_.stats.weak_duality_violations += rep.stats.weak_duality_violations;

    const double theta_ex = sc_.theta_ex_series[static_cast<std::size_t>(k)];
    std::vector<double> p(states_.size()), ul(states_.size()), theta(states_.size()), owed(states_.size());
    std::vector<HouseDecision> applied(states_.size());
    for (std::size_t i = 0; i < states_.size(); ++i) {
      const HouseModel& house = sc_.houses[i];
      ul[i] = house.ul_series[static_cast<std::size_t>(k)];
      const HouseStepResult res =
          simulate_house_step(house, states_[i], rep.decision.houses[i], k, theta_ex, ul[i], sc_.grid.dt_hours);
      const ThermalParams& th = house.thermal;
      if (states_[i].cooling_on(k)) out_.comfort_excess += std::max(0.0, res.next.theta - th.theta_sp);
      if (states_[i].heating_on(k)) out_.comfort_excess += std::max(0.0, th.theta_sp - res.next.theta);
      for (std::size_t a = 0; a < house.appliances.size(); ++a) {
        if (!res.applied.appliance_run[a]) continue;
        const int idx = slots_[i][a].outcome;
        if (idx < 0) continue;
        ProgramOutcome& po = out_.programs[static_cast<std::size_t>(idx)];
        if (po.started_at < 0) {
          po.started_at = k;
          event(k, static_cast<int>(i), "program_started", house.appliances[a].id);
        }
        po.finished_at = k;
        ++po.executed;
        if (res.next.appliances[a] && res.next.appliances[a]->completed)
          event(k, static_cast<int>(i), "program_completed", house.appliances[a].id);
      }
      states_[i] = res.next;
      applied[i] = res.applied;
      p[i] = res.p_total;
      theta[i] = res.next.theta;
      owed[i] = states_[i].pev ? states_[i].pev->remaining_kwh : 0.0;
      if (session_[i] >= 0 && states_[i].pev && k >= states_[i].pev->k2) close_session(static_cast<int>(i), k);
    }
    out_.ledger.append(p, sc_.pv_series[static_cast<std::size_t>(k)]);
    out_.applied.push_back(std::move(applied));
    out_.ul.push_back(std::move(ul));
    out_.theta_end.push_back(std::move(theta));
    out_.pev_owed.push_back(std::move(owed));
  }

  const Scenario& sc_;
  const SimConfig& config_;
  ControllerRun& out_;
  MpcConfig mpc_;
  std::uint64_t seed_ = 0;
  MpcMemory memory_;
  std::vector<HouseState> states_;
  std::vector<std::vector<Slot>> slots_;
  std::vector<int> session_;  // open PevOutcome per house, -1 when none
  std::vector<std::size_t> order_;
  std::size_t next_ = 0;
  bool cold_reported_ = false;
};

}  // namespace

void simulate_into(const Scenario& scenario, Controller controller, const SimConfig& config, ControllerRun& out) {
  Loop(scenario, controller, config, out).run();
}

ControllerRun simulate(const Scenario& scenario, Controller controller, const SimConfig& config) {
  ControllerRun out;
  simulate_into(scenario, controller, config, out);
  return out;
}

// ---- orchestration ----------------------------------------------------------

RunReport run_scenario(const Scenario& scenario, const SimConfig& config) {
  if (!(config.pv_err >= 0.0 && config.pv_err <= 1.0) || !(config.temp_err >= 0.0 && config.temp_err <= 1.0)) {
    ValidationReport r;
    r.violations.push_back({"config", "forecast error", "caps must lie in [0, 1]"});
    throw ValidationError(r);
  }
  if (config.horizon_T && *config.horizon_T < 1) {
    ValidationReport r;
    r.violations.push_back({"config", "horizon_T", "must be >= 1"});
    throw ValidationError(r);
  }
  ValidationReport report = validate_scenario(scenario, {config.pev_relax_max_soc});
  if (!report.ok()) throw ValidationError(report);

  RunReport out;
  std::vector<Controller> which;
  if (config.mode != RunMode::moa) which.push_back(Controller::coa);
  if (config.mode != RunMode::coa) which.push_back(Controller::moa);
  for (Controller c : which) {
    out.runs.emplace_back();
    try {
      simulate_into(scenario, c, config, out.runs.back());
    } catch (const SolverBreakdown& e) {
      out.runs.back().events.push_back({out.runs.back().ledger.steps(), -1, "solver_breakdown", e.what()});
      if (!config.out_dir.empty()) write_outputs(scenario, config, out);
      throw;
    }
  }
  if (out.runs.size() == 2)
    out.summary = settle(out.runs[0].ledger, out.runs[1].ledger, scenario.tariffs, 0, scenario.grid.n_steps,
                         config.aggregation, config.policy);
  if (!config.out_dir.empty()) write_outputs(scenario, config, out);
  return out;
}

void load_actuals(Scenario& scenario, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioFormatError("cannot open actuals file " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("step,pv_kw,theta_ex_c", 0) != 0)
    throw ScenarioFormatError(path + ": header must be step,pv_kw,theta_ex_c");
  std::vector<double> pv, th;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
      throw ScenarioFormatError(fmt::format("{}:{}: expected three columns", path, row));
    try {
      if (std::stoi(a) != static_cast<int>(pv.size()))
        throw ScenarioFormatError(fmt::format("{}:{}: steps must be consecutive from 0", path, row));
      pv.push_back(std::stod(b));
      th.push_back(std::stod(c));
    } catch (const std::logic_error&) {
      throw ScenarioFormatError(fmt::format("{}:{}: not a number", path, row));
    }
  }
  scenario.pv_series = std::move(pv);
  scenario.theta_ex_series = std::move(th);
}

RunReport run(const SimConfig& config) {
  Scenario sc = load_scenario(config.scenario_path);
  if (!config.actuals_path.empty()) load_actuals(sc, config.actuals_path);
  return run_scenario(sc, config);
}

// ---- reports ----------------------------------------------------------------

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

void write_ledger(std::ostream& out, const Scenario& sc, const ControllerRun& run) {
  out << "step,time_iso,house,device,power_kw\n";
  for (int k = 0; k < run.ledger.steps(); ++k) {
    const auto t = static_cast<std::size_t>(k);
    const std::string iso = step_clock(sc.grid, k).iso;
    for (std::size_t i = 0; i < sc.houses.size(); ++i) {
      const HouseModel& h = sc.houses[i];
      const HouseDecision& d = run.applied[t][i];
      fmt::print(out, "{},{},{},acs,{:.12f}\n", k, iso, h.id, d.acs.p_h + d.acs.p_c);
      for (std::size_t a = 0; a < h.appliances.size(); ++a)
        fmt::print(out, "{},{},{},{},{:.12f}\n", k, iso, h.id, h.appliances[a].id, d.appliance_kw[a]);
      fmt::print(out, "{},{},{},pev,{:.12f}\n", k, iso, h.id, d.pev_kw);
      fmt::print(out, "{},{},{},ul,{:.12f}\n", k, iso, h.id, run.ul[t][i]);
      fmt::print(out, "{},{},{},total,{:.12f}\n", k, iso, h.id, run.ledger.p_member[t][i]);
    }
    fmt::print(out, "{},{},community,pv,{:.12f}\n", k, iso, run.ledger.pv[t]);
    fmt::print(out, "{},{},community,shared,{:.12f}\n", k, iso, run.ledger.p_sh[t]);
  }
}

void write_states(std::ostream& out, const Scenario& sc, const ControllerRun& run) {
  out << "step,time_iso,house,theta_end_c,pev_owed_kwh\n";
  for (int k = 0; k < run.ledger.steps(); ++k) {
    const auto t = static_cast<std::size_t>(k);
    const std::string iso = step_clock(sc.grid, k).iso;
    for (std::size_t i = 0; i < sc.houses.size(); ++i)
      fmt::print(out, "{},{},{},{:.9f},{:.9f}\n", k, iso, sc.houses[i].id, run.theta_end[t][i], run.pev_owed[t][i]);
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

void write_events(std::ostream& out, const Scenario& sc, const ControllerRun& run) {
  out << "step,time_iso,house,kind,detail\n";
  for (const EventRecord& e : run.events) {
    const std::string who = e.house < 0 ? "community" : sc.houses[static_cast<std::size_t>(e.house)].id;
    fmt::print(out, "{},{},{},{},{}\n", e.step, step_clock(sc.grid, std::max(0, e.step)).iso, who, e.kind,
               csv_field(e.detail));
  }
}

void write_single_summary(std::ostream& csv, std::ostream& txt, const Scenario& sc, const SimConfig& config,
                          const ControllerRun& run) {
  const int k_end = run.ledger.k_end();
  const auto bills = accumulate_bills(run.ledger, sc.tariffs, 0, k_end);
  const CommunityTotals c = community_totals(run.ledger, sc.tariffs, 0, k_end, config.aggregation);
  const char* name = to_string(run.controller);
  csv << "row,house,bill\n";
  for (std::size_t i = 0; i < bills.size(); ++i) fmt::print(csv, "member,{},{:.9f}\n", sc.houses[i].id, bills[i]);
  csv << "\nrow,controller,aggregation,se_kwh,pv_kwh,discount_se,discount_sale,discount_total,community_cost\n";
  fmt::print(csv, "community,{},{},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f}\n", name, to_string(config.aggregation),
             c.se_kwh, c.pv_kwh, c.discount_se, c.discount_sale, c.discount(), c.cost);

  fmt::print(txt, "Controller {} over steps [0, {}), shared energy per {}\n\n", name, k_end,
             to_string(config.aggregation));
  fmt::print(txt, "{:<10} {:>12}\n", "member", "bill");
  for (std::size_t i = 0; i < bills.size(); ++i) fmt::print(txt, "{:<10} {:>12.2f}\n", sc.houses[i].id, bills[i]);
  fmt::print(txt, "\nSE {:.2f} kWh, PV {:.2f} kWh, SE discount {:.2f}, sale discount {:.2f}, total discount {:.2f}\n",
             c.se_kwh, c.pv_kwh, c.discount_se, c.discount_sale, c.discount());
}

void write_run_footer(std::ostream& txt, const ControllerRun& run) {
  int unmet = 0, incomplete = 0;
  for (const PevOutcome& s : run.sessions) unmet += s.met ? 0 : 1;
  for (const ProgramOutcome& p : run.programs) incomplete += (!p.dropped && p.executed < p.phases) ? 1 : 0;
  fmt::print(txt, "{}: {} steps, {} fallback steps, comfort excess {:.6f} degC*step, {} of {} PEV sessions unmet, "
                  "{} of {} programs incomplete\n",
             to_string(run.controller), run.ledger.steps(), run.fallback_steps, run.comfort_excess, unmet,
             run.sessions.size(), incomplete, run.programs.size());
}

}  // namespace

void write_outputs(const Scenario& sc, const SimConfig& config, const RunReport& report) {
  const std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);
  for (const ControllerRun& run : report.runs) {
    const std::string m = to_string(run.controller);
    auto ledger = open_out(dir / fmt::format("ledger_{}.csv", m));
    write_ledger(ledger, sc, run);
    auto states = open_out(dir / fmt::format("states_{}.csv", m));
    write_states(states, sc, run);
    auto events = open_out(dir / fmt::format("events_{}.csv", m));
    write_events(events, sc, run);
    auto settlement = open_out(dir / fmt::format("settlement_{}.csv", m));
    write_settlement_csv(settlement, run.ledger, sc.tariffs, sc.grid);
  }
  auto csv = open_out(dir / "summary.csv");
  auto txt = open_out(dir / "summary.txt");
  if (report.summary) {
    write_summary_csv(csv, *report.summary, sc.houses);
    write_summary_text(txt, *report.summary, sc.houses);
  } else if (!report.runs.empty()) {
    write_single_summary(csv, txt, sc, config, report.runs.back());
  }
  txt << '\n';
  for (const ControllerRun& run : report.runs) write_run_footer(txt, run);
}

}  // namespace rec
