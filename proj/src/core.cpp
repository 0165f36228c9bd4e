#include "rec/core.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace rec {

double ApplianceProgram::energy_kwh(double dt_hours) const {
  double e = 0.0;
  for (double p : phase_powers) e += p * dt_hours;
  return e;
}

const ApplianceProgram* Appliance::find_program(const std::string& program_id) const {
  for (const auto& p : programs)
    if (p.id == program_id) return &p;
  return nullptr;
}

int HouseModel::appliance_index(const std::string& device_id) const {
  for (std::size_t a = 0; a < appliances.size(); ++a)
    if (appliances[a].id == device_id) return static_cast<int>(a);
  return -1;
}

const char* to_string(RequestKind kind) {
  switch (kind) {
    case RequestKind::acs_heat: return "acs_heat";
    case RequestKind::acs_cool: return "acs_cool";
    case RequestKind::appliance: return "appliance";
    case RequestKind::pev: return "pev";
  }
  return "?";
}

std::optional<RequestKind> parse_request_kind(const std::string& text) {
  if (text == "acs_heat") return RequestKind::acs_heat;
  if (text == "acs_cool") return RequestKind::acs_cool;
  if (text == "appliance") return RequestKind::appliance;
  if (text == "pev") return RequestKind::pev;
  return std::nullopt;
}

bool HouseState::heating_on(int k) const {
  return std::any_of(acs.begin(), acs.end(),
                     [k](const AcsWindow& w) { return w.heating && k >= w.k1 && k <= w.k2; });
}

bool HouseState::cooling_on(int k) const {
  return std::any_of(acs.begin(), acs.end(),
                     [k](const AcsWindow& w) { return !w.heating && k >= w.k1 && k <= w.k2; });
}

namespace {

std::optional<std::chrono::sys_seconds> parse_iso(const std::string& iso) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, se = 0;
  char tail = 0;
  if (std::sscanf(iso.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u%c", &y, &mo, &d, &h, &mi, &se, &tail) != 6) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || se > 59) return std::nullopt;
  return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} + std::chrono::seconds{se};
}

}  // namespace

bool valid_start_iso(const std::string& iso) { return parse_iso(iso).has_value(); }

StepClock step_clock(const TimeGrid& grid, int k) {
  using namespace std::chrono;
  const auto start = parse_iso(grid.start_iso);
  if (!start) throw std::invalid_argument("bad start_iso '" + grid.start_iso + "'");
  const sys_seconds t = *start + seconds{std::llround(k * grid.dt_hours * 3600.0)};
  const sys_days day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss hms{t - day};
  StepClock c;
  c.iso = fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hms.hours().count(),
                      hms.minutes().count(), hms.seconds().count());
  c.weekday = static_cast<int>(weekday{day}.iso_encoding()) - 1;
  c.hour = static_cast<double>((t - day).count()) / 3600.0;
  c.day = static_cast<int>((day - floor<days>(*start)).count());
  return c;
}

HouseState initial_state(const HouseModel& house) {
  HouseState s;
  s.theta = house.theta0;
  s.appliances.resize(house.appliances.size());
  return s;
}

double pev_required_grid_kwh(const PevParams& pev, double soc) {
  return pev.e_b * (1.0 - soc) / pev.eta_b;
}

double pev_deliverable_battery_kwh(const PevParams& pev, int steps, double dt_hours) {
  return dt_hours * steps * pev.eta_b * pev.p_nom_p;
}

std::string ValidationReport::to_string() const {
  if (ok()) return "ok\n";
  std::ostringstream os;
  for (const auto& v : violations) os << v.entity << "." << v.field << ": " << v.rule << "\n";
  return os.str();
}

namespace {

class Checker {
 public:
  explicit Checker(ValidationReport& report) : report_(report) {}

  void fail(const std::string& entity, const std::string& field, const std::string& rule) {
    report_.violations.push_back({entity, field, rule});
  }

  void positive(const std::string& entity, const std::string& field, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(entity, field, "must be a finite value > 0");
  }

  void series(const std::string& entity, const std::string& field, const std::vector<double>& s,
              int n_steps, bool non_negative) {
    if (static_cast<int>(s.size()) < n_steps) {
      fail(entity, field, "series covers " + std::to_string(s.size()) + " of " +
                              std::to_string(n_steps) + " steps");
    }
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (!std::isfinite(s[k])) {
        fail(entity, field, "non-finite value at step " + std::to_string(k));
        return;
      }
      if (non_negative && s[k] < 0.0) {
        fail(entity, field, "negative value at step " + std::to_string(k));
        return;
      }
    }
  }

 private:
  ValidationReport& report_;
};

bool overlaps(const RequestWindow& a, const RequestWindow& b) {
  return a.k1 <= b.k2 && b.k1 <= a.k2;
}

}  // namespace

ValidationReport validate_scenario(const Scenario& sc, const ValidationOptions& options) {
  ValidationReport report;
  Checker check(report);
  const TimeGrid& g = sc.grid;

  check.positive("grid", "dt_hours", g.dt_hours);
  if (g.n_steps < 1) check.fail("grid", "n_steps", "must be >= 1");
  if (g.horizon_T < 1) check.fail("grid", "horizon_T", "must be >= 1");
  if (g.dt_hours > 0.0) {
    const double per_day = 24.0 / g.dt_hours;
    if (std::abs(per_day - std::round(per_day)) > 1e-9)
      check.fail("grid", "dt_hours", "a day must span a whole number of steps");
  }
  const int n = std::max(g.n_steps, 0);
  if (!valid_start_iso(g.start_iso)) check.fail("grid", "start_iso", "must look like YYYY-MM-DDTHH:MM:SS");

  if (sc.houses.empty()) check.fail("houses", "size", "at least one house is required");

  // tariffs
  if (sc.tariffs.member_tariff.size() != sc.houses.size()) {
    check.fail("tariffs", "member_tariff", "expected one series per member (" +
                                               std::to_string(sc.houses.size()) + "), got " +
                                               std::to_string(sc.tariffs.member_tariff.size()));
  }
  for (std::size_t i = 0; i < sc.tariffs.member_tariff.size(); ++i)
    check.series("tariffs.member_tariff[" + std::to_string(i) + "]", "rate",
                 sc.tariffs.member_tariff[i], n, true);
  check.series("tariffs", "market_price", sc.tariffs.market_price, n, true);
  if (!(sc.tariffs.incentive_rate >= 0.0) || !std::isfinite(sc.tariffs.incentive_rate))
    check.fail("tariffs", "incentive_rate", "must be a finite value >= 0");

  check.series("scenario", "pv_series", sc.pv_series, n, true);
  check.series("scenario", "theta_ex_series", sc.theta_ex_series, n, false);

  // houses
  for (std::size_t i = 0; i < sc.houses.size(); ++i) {
    const HouseModel& h = sc.houses[i];
    const std::string e = "houses[" + std::to_string(i) + "]";
    check.positive(e + ".thermal", "R", h.thermal.R);
    check.positive(e + ".thermal", "C", h.thermal.C);
    check.positive(e + ".thermal", "eta_h", h.thermal.eta_h);
    check.positive(e + ".thermal", "eta_c", h.thermal.eta_c);
    check.positive(e + ".thermal", "p_nom_h", h.thermal.p_nom_h);
    check.positive(e + ".thermal", "p_nom_c", h.thermal.p_nom_c);
    if (!std::isfinite(h.thermal.theta_sp)) check.fail(e + ".thermal", "theta_sp", "must be finite");
    if (!std::isfinite(h.theta0) || h.theta0 < -30.0 || h.theta0 > 60.0)
      check.fail(e, "theta0", "must lie in [-30, 60] degC");
    check.positive(e + ".pev", "p_nom_p", h.pev.p_nom_p);
    check.positive(e + ".pev", "e_b", h.pev.e_b);
    if (!(h.pev.eta_b > 0.0 && h.pev.eta_b <= 1.0)) check.fail(e + ".pev", "eta_b", "must lie in (0, 1]");
    check.positive(e, "p_max", h.p_max);
    check.series(e, "ul_series", h.ul_series, n, true);

    std::set<std::string> ids;
    for (std::size_t a = 0; a < h.appliances.size(); ++a) {
      const Appliance& app = h.appliances[a];
      const std::string ea = e + ".appliances[" + std::to_string(a) + "]";
      if (!ids.insert(app.id).second) check.fail(ea, "id", "duplicate appliance id '" + app.id + "'");
      if (app.programs.empty()) check.fail(ea, "programs", "at least one program is required");
      for (std::size_t p = 0; p < app.programs.size(); ++p) {
        const ApplianceProgram& prog = app.programs[p];
        const std::string ep = ea + ".programs[" + std::to_string(p) + "]";
        if (prog.phase_powers.empty()) check.fail(ep, "phase_powers", "program needs M >= 1 phases");
        for (double w : prog.phase_powers) {
          if (!(w >= 0.0) || !std::isfinite(w)) {
            check.fail(ep, "phase_powers", "phase powers must be finite and >= 0");
            break;
          }
        }
      }
    }
  }

  // requests
  for (std::size_t r = 0; r < sc.requests.size(); ++r) {
    const RequestWindow& q = sc.requests[r];
    const std::string e = "requests[" + std::to_string(r) + "]";
    if (q.house < 0 || q.house >= static_cast<int>(sc.houses.size())) {
      check.fail(e, "house", "unknown house index " + std::to_string(q.house));
      continue;
    }
    if (q.k1 > q.k2) check.fail(e, "k1", "k1 must not exceed k2");
    if (q.k1 < 0 || q.k2 >= n) check.fail(e, "k2", "window must lie inside the time grid");
    if (q.declared_at && (*q.declared_at < 0 || *q.declared_at > q.k1))
      check.fail(e, "declared_at", "declaration must fall in [0, k1]");
    const HouseModel& h = sc.houses[static_cast<std::size_t>(q.house)];
    switch (q.kind) {
      case RequestKind::appliance: {
        const int a = h.appliance_index(q.device_id);
        if (a < 0) {
          check.fail(e, "device_id", "unknown appliance '" + q.device_id + "'");
          break;
        }
        const ApplianceProgram* prog = h.appliances[static_cast<std::size_t>(a)].find_program(q.program);
        if (!prog) {
          check.fail(e, "program", "unknown program '" + q.program + "'");
          break;
        }
        if (q.length() < prog->phases()) check.fail(e, "k2", "window shorter than program");
        break;
      }
      case RequestKind::pev: {
        if (!(q.soc >= 0.0 && q.soc <= 1.0)) {
          check.fail(e, "soc", "initial state of charge must lie in [0, 1]");
          break;
        }
        const double need = h.pev.e_b * (1.0 - q.soc);
        const double can = pev_deliverable_battery_kwh(h.pev, q.length(), g.dt_hours);
        if (!options.pev_relax_max_soc && can + 1e-9 < need) {
          check.fail(e, "k2", "recharge window too short: deliverable " + std::to_string(can) +
                                  " kWh < required " + std::to_string(need) + " kWh");
        }
        break;
      }
      case RequestKind::acs_heat:
      case RequestKind::acs_cool:
        break;
    }
  }

  // overlaps between windows of the same device (acs heat/cool count as one device)
  for (std::size_t a = 0; a < sc.requests.size(); ++a) {
    for (std::size_t b = a + 1; b < sc.requests.size(); ++b) {
      const RequestWindow& p = sc.requests[a];
      const RequestWindow& q = sc.requests[b];
      if (p.house != q.house || !overlaps(p, q)) continue;
      const bool p_acs = p.kind == RequestKind::acs_heat || p.kind == RequestKind::acs_cool;
      const bool q_acs = q.kind == RequestKind::acs_heat || q.kind == RequestKind::acs_cool;
      bool clash = false;
      if (p_acs && q_acs) clash = true;
      if (p.kind == RequestKind::pev && q.kind == RequestKind::pev) clash = true;
      if (p.kind == RequestKind::appliance && q.kind == RequestKind::appliance && p.device_id == q.device_id)
        clash = true;
      if (clash) {
        check.fail("requests[" + std::to_string(b) + "]", "k1",
                   "window overlaps requests[" + std::to_string(a) + "] for the same device");
      }
    }
  }
  return report;
}

}  // namespace rec
