#include "rec/scenario_io.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

namespace rec {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> required,
                std::initializer_list<const char*> optional = {}) {
  if (!obj.is_object()) throw ScenarioFormatError(where + ": expected an object");
  std::set<std::string> known;
  for (const char* k : required) {
    known.insert(k);
    if (!obj.contains(k)) throw ScenarioFormatError(where + ": missing key '" + k + "'");
  }
  for (const char* k : optional) known.insert(k);
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) throw ScenarioFormatError(where + ": unknown key '" + key + "'");
  }
}

double get_number(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw ScenarioFormatError(where + "." + key + ": expected a number");
  return v.get<double>();
}

int get_int(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ScenarioFormatError(where + "." + key + ": expected an integer");
  return v.get<int>();
}

std::string get_string(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_string()) throw ScenarioFormatError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

std::vector<double> get_series(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_array()) throw ScenarioFormatError(where + "." + key + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const json& x : v) {
    if (!x.is_number()) throw ScenarioFormatError(where + "." + key + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

ThermalParams thermal_from_json(const json& j, const std::string& where) {
  check_keys(j, where, {"R", "C", "eta_h", "eta_c", "p_nom_h", "p_nom_c", "theta_sp"});
  ThermalParams t;
  t.R = get_number(j, "R", where);
  t.C = get_number(j, "C", where);
  t.eta_h = get_number(j, "eta_h", where);
  t.eta_c = get_number(j, "eta_c", where);
  t.p_nom_h = get_number(j, "p_nom_h", where);
  t.p_nom_c = get_number(j, "p_nom_c", where);
  t.theta_sp = get_number(j, "theta_sp", where);
  return t;
}

HouseModel house_from_json(const json& j, const std::string& where) {
  check_keys(j, where, {"thermal", "appliances", "pev", "p_max", "ul_series"}, {"id", "theta0"});
  HouseModel h;
  if (j.contains("id")) h.id = get_string(j, "id", where);
  h.thermal = thermal_from_json(j.at("thermal"), where + ".thermal");
  h.theta0 = j.contains("theta0") ? get_number(j, "theta0", where) : h.thermal.theta_sp;
  const json& apps = j.at("appliances");
  if (!apps.is_array()) throw ScenarioFormatError(where + ".appliances: expected an array");
  for (std::size_t a = 0; a < apps.size(); ++a) {
    const std::string wa = where + ".appliances[" + std::to_string(a) + "]";
    check_keys(apps[a], wa, {"id", "programs"});
    Appliance app;
    app.id = get_string(apps[a], "id", wa);
    const json& progs = apps[a].at("programs");
    if (!progs.is_array()) throw ScenarioFormatError(wa + ".programs: expected an array");
    for (std::size_t p = 0; p < progs.size(); ++p) {
      const std::string wp = wa + ".programs[" + std::to_string(p) + "]";
      check_keys(progs[p], wp, {"id", "phase_powers"});
      app.programs.push_back({get_string(progs[p], "id", wp), get_series(progs[p], "phase_powers", wp)});
    }
    h.appliances.push_back(std::move(app));
  }
  const json& pev = j.at("pev");
  check_keys(pev, where + ".pev", {"p_nom_p", "e_b", "eta_b"});
  h.pev.p_nom_p = get_number(pev, "p_nom_p", where + ".pev");
  h.pev.e_b = get_number(pev, "e_b", where + ".pev");
  h.pev.eta_b = get_number(pev, "eta_b", where + ".pev");
  h.p_max = get_number(j, "p_max", where);
  h.ul_series = get_series(j, "ul_series", where);
  return h;
}

RequestWindow request_from_json(const json& j, const std::string& where) {
  check_keys(j, where, {"kind", "house", "device_id", "k1", "k2"}, {"payload", "declared_at"});
  RequestWindow r;
  const auto kind = parse_request_kind(get_string(j, "kind", where));
  if (!kind) throw ScenarioFormatError(where + ".kind: expected acs_heat|acs_cool|appliance|pev");
  r.kind = *kind;
  r.house = get_int(j, "house", where);
  r.device_id = get_string(j, "device_id", where);
  r.k1 = get_int(j, "k1", where);
  r.k2 = get_int(j, "k2", where);
  if (j.contains("declared_at")) r.declared_at = get_int(j, "declared_at", where);
  const bool has_payload = j.contains("payload") && !j.at("payload").is_null();
  switch (r.kind) {
    case RequestKind::appliance:
      if (!has_payload || !j.at("payload").is_string())
        throw ScenarioFormatError(where + ".payload: appliance requests need a program id");
      r.program = j.at("payload").get<std::string>();
      break;
    case RequestKind::pev:
      if (!has_payload || !j.at("payload").is_number())
        throw ScenarioFormatError(where + ".payload: pev requests need the initial state of charge");
      r.soc = j.at("payload").get<double>();
      break;
    default:
      if (has_payload) throw ScenarioFormatError(where + ".payload: acs requests carry no payload");
      break;
  }
  return r;
}

}  // namespace

Scenario scenario_from_json(const json& doc) {
  check_keys(doc, "scenario", {"grid", "tariffs", "houses", "requests", "pv_series", "theta_ex_series"},
             {"seed"});
  Scenario sc;
  const json& g = doc.at("grid");
  check_keys(g, "grid", {"dt_hours", "n_steps", "horizon_T"}, {"start_iso"});
  sc.grid.dt_hours = get_number(g, "dt_hours", "grid");
  sc.grid.n_steps = get_int(g, "n_steps", "grid");
  sc.grid.horizon_T = get_int(g, "horizon_T", "grid");
  if (g.contains("start_iso")) sc.grid.start_iso = get_string(g, "start_iso", "grid");

  const json& t = doc.at("tariffs");
  check_keys(t, "tariffs", {"member_tariff", "market_price", "incentive_rate"});
  const json& mt = t.at("member_tariff");
  if (!mt.is_array()) throw ScenarioFormatError("tariffs.member_tariff: expected an array of series");
  for (std::size_t i = 0; i < mt.size(); ++i) {
    json wrapper = {{"s", mt[i]}};
    sc.tariffs.member_tariff.push_back(get_series(wrapper, "s", "tariffs.member_tariff[" + std::to_string(i) + "]"));
  }
  sc.tariffs.market_price = get_series(t, "market_price", "tariffs");
  sc.tariffs.incentive_rate = get_number(t, "incentive_rate", "tariffs");

  const json& houses = doc.at("houses");
  if (!houses.is_array()) throw ScenarioFormatError("houses: expected an array");
  for (std::size_t i = 0; i < houses.size(); ++i)
    sc.houses.push_back(house_from_json(houses[i], "houses[" + std::to_string(i) + "]"));

  const json& reqs = doc.at("requests");
  if (!reqs.is_array()) throw ScenarioFormatError("requests: expected an array");
  for (std::size_t r = 0; r < reqs.size(); ++r)
    sc.requests.push_back(request_from_json(reqs[r], "requests[" + std::to_string(r) + "]"));

  sc.pv_series = get_series(doc, "pv_series", "scenario");
  sc.theta_ex_series = get_series(doc, "theta_ex_series", "scenario");
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned() && !doc.at("seed").is_number_integer())
      throw ScenarioFormatError("scenario.seed: expected a non-negative integer");
    sc.seed = doc.at("seed").get<std::uint64_t>();
  }
  return sc;
}

json scenario_to_json(const Scenario& sc) {
  json doc;
  doc["grid"] = {{"dt_hours", sc.grid.dt_hours},
                 {"n_steps", sc.grid.n_steps},
                 {"horizon_T", sc.grid.horizon_T},
                 {"start_iso", sc.grid.start_iso}};
  doc["tariffs"] = {{"member_tariff", sc.tariffs.member_tariff},
                    {"market_price", sc.tariffs.market_price},
                    {"incentive_rate", sc.tariffs.incentive_rate}};
  json houses = json::array();
  for (const HouseModel& h : sc.houses) {
    json apps = json::array();
    for (const Appliance& a : h.appliances) {
      json progs = json::array();
      for (const ApplianceProgram& p : a.programs) progs.push_back({{"id", p.id}, {"phase_powers", p.phase_powers}});
      apps.push_back({{"id", a.id}, {"programs", progs}});
    }
    houses.push_back({{"id", h.id},
                      {"thermal",
                       {{"R", h.thermal.R},
                        {"C", h.thermal.C},
                        {"eta_h", h.thermal.eta_h},
                        {"eta_c", h.thermal.eta_c},
                        {"p_nom_h", h.thermal.p_nom_h},
                        {"p_nom_c", h.thermal.p_nom_c},
                        {"theta_sp", h.thermal.theta_sp}}},
                      {"theta0", h.theta0},
                      {"appliances", apps},
                      {"pev", {{"p_nom_p", h.pev.p_nom_p}, {"e_b", h.pev.e_b}, {"eta_b", h.pev.eta_b}}},
                      {"p_max", h.p_max},
                      {"ul_series", h.ul_series}});
  }
  doc["houses"] = houses;
  json reqs = json::array();
  for (const RequestWindow& r : sc.requests) {
    json q = {{"kind", to_string(r.kind)}, {"house", r.house}, {"device_id", r.device_id}, {"k1", r.k1}, {"k2", r.k2}};
    if (r.kind == RequestKind::appliance) q["payload"] = r.program;
    if (r.kind == RequestKind::pev) q["payload"] = r.soc;
    if (r.declared_at) q["declared_at"] = *r.declared_at;
    reqs.push_back(q);
  }
  doc["requests"] = reqs;
  doc["pv_series"] = sc.pv_series;
  doc["theta_ex_series"] = sc.theta_ex_series;
  doc["seed"] = sc.seed;
  return doc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioFormatError("cannot open scenario file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ScenarioFormatError(path.string() + ": " + e.what());
  }
  return scenario_from_json(doc);
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file " + path.string());
  out << scenario_to_json(scenario).dump(1) << "\n";
}

}  // namespace rec
