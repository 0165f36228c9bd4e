#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "rec/scenario_io.hpp"
#include "rec/sim.hpp"

using namespace rec;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

// One shared closed-loop run of a small community, reused by several tests.
struct SmallRun {
  Scenario sc = generate_scenario(2, 2, 17);
  SimConfig cfg;
  RunReport report;

  SmallRun() {
    cfg.horizon_T = 48;
    report = run_scenario(sc, cfg);
  }
};

const SmallRun& small_run() {
  static const SmallRun r;
  return r;
}

}  // namespace

TEST(Forecast, ZeroCapReturnsActuals) {
  const Scenario sc = generate_scenario(2, 1, 3);
  SimConfig cfg;
  cfg.pv_err = cfg.temp_err = 0.0;
  cfg.ul_forecast = UlForecast::perfect;
  const auto fc = make_forecasts(sc, cfg, 1, 10, 40);
  EXPECT_EQ(fc.k0, 10);
  for (int t = 0; t < 40; ++t) {
    EXPECT_EQ(fc.pv[static_cast<std::size_t>(t)], sc.pv_series[static_cast<std::size_t>(10 + t)]);
    EXPECT_EQ(fc.theta_ex[static_cast<std::size_t>(t)], sc.theta_ex_series[static_cast<std::size_t>(10 + t)]);
    EXPECT_EQ(fc.ul[1][static_cast<std::size_t>(t)], sc.houses[1].ul_series[static_cast<std::size_t>(10 + t)]);
  }
}

TEST(Forecast, ErrorStaysWithinCap) {
  const Scenario sc = generate_scenario(1, 2, 3);
  SimConfig cfg;
  double worst = 0.0;
  for (int k = 0; k < 150; k += 7) {
    const auto fc = make_forecasts(sc, cfg, 99, k, 30);
    for (int t = 0; t < 30; ++t) {
      const double pv = sc.pv_series[static_cast<std::size_t>(k + t)];
      const double th = sc.theta_ex_series[static_cast<std::size_t>(k + t)];
      EXPECT_GE(fc.pv[static_cast<std::size_t>(t)], 0.0);
      if (pv > 0) worst = std::max(worst, std::abs(fc.pv[static_cast<std::size_t>(t)] - pv) / pv);
      EXPECT_LE(std::abs(fc.theta_ex[static_cast<std::size_t>(t)] - th), 0.10 * std::abs(th) + 1e-12);
    }
  }
  EXPECT_LE(worst, 0.10 + 1e-12);
  EXPECT_GT(worst, 0.05);
  // Same seed, same forecast; another seed, another one.
  EXPECT_EQ(make_forecasts(sc, cfg, 99, 40, 8).pv, make_forecasts(sc, cfg, 99, 40, 8).pv);
  EXPECT_NE(make_forecasts(sc, cfg, 99, 40, 8).pv, make_forecasts(sc, cfg, 98, 40, 8).pv);
}

TEST(Forecast, TrailingWeekAverage) {
  Scenario sc = generate_scenario(1, 10, 3);
  auto& ul = sc.houses[0].ul_series;
  std::fill(ul.begin(), ul.end(), 0.42);
  SimConfig cfg;
  bool cold = true;
  auto fc = make_forecasts(sc, cfg, 1, 96 * 3 + 5, 96, &cold);
  EXPECT_FALSE(cold);
  for (double x : fc.ul[0]) EXPECT_NEAR(x, 0.42, 1e-15);

  // Slot means over the seven preceding days only.
  for (int k = 0; k < static_cast<int>(ul.size()); ++k) ul[static_cast<std::size_t>(k)] = k / 96 + 0.01 * (k % 96);
  fc = make_forecasts(sc, cfg, 1, 96 * 9 + 4, 2);
  EXPECT_NEAR(fc.ul[0][0], 5.0 + 0.04, 1e-12);  // days 2..8
  fc = make_forecasts(sc, cfg, 1, 96 * 2, 1);
  EXPECT_NEAR(fc.ul[0][0], 0.5, 1e-12);  // days 0..1

  fc = make_forecasts(sc, cfg, 1, 30, 4, &cold);
  EXPECT_TRUE(cold);
  EXPECT_EQ(fc.ul[0][0], ul[30]);
}

TEST(Generator, RangesAndWindows) {
  const Scenario sc = generate_scenario(4, 7, 2022);
  EXPECT_TRUE(validate_scenario(sc).ok()) << validate_scenario(sc).to_string();
  EXPECT_EQ(sc.grid.n_steps, 7 * 96);
  EXPECT_DOUBLE_EQ(sc.tariffs.incentive_rate, 0.11);
  ASSERT_EQ(sc.houses.size(), 4U);
  const ThermalParams avg;
  for (const auto& h : sc.houses) {
    for (auto [v, a] : {std::pair{h.thermal.R, avg.R}, {h.thermal.C, avg.C}, {h.thermal.eta_c, avg.eta_c},
                        {h.thermal.p_nom_c, avg.p_nom_c}, {h.pev.e_b, 15.0}, {h.pev.p_nom_p, 3.6}}) {
      EXPECT_GE(v, 0.8 * a);
      EXPECT_LE(v, 1.2 * a);
    }
    EXPECT_DOUBLE_EQ(h.p_max, 6.0);
    ASSERT_EQ(h.appliances.size(), 2U);
    EXPECT_EQ(h.appliances[0].programs[0].phases(), 11);
    EXPECT_EQ(h.appliances[1].programs[0].phases(), 10);
  }
  double peak = 0.0;
  for (double p : sc.pv_series) peak = std::max(peak, p);
  EXPECT_LE(peak, 15.0);
  EXPECT_GT(peak, 8.0);
  for (double t : sc.theta_ex_series) {
    EXPECT_GE(t, 20.0);
    EXPECT_LE(t, 32.0);
  }
  // Weekday 10 a.m. is expensive, weekday 10 p.m. and Saturday 10 a.m. are not.
  const auto& tariff = sc.tariffs.member_tariff[0];
  EXPECT_GT(tariff[40], tariff[88]);
  EXPECT_NEAR(tariff[5 * 96 + 40], tariff[88], 1e-12);

  for (std::size_t r = 1; r < sc.requests.size(); ++r) EXPECT_LE(sc.requests[r - 1].k1, sc.requests[r].k1);
  for (const auto& r : sc.requests) {
    const int day = r.k1 / 96;
    const double h1 = (r.k1 - day * 96) * 0.25;
    const double h2 = (r.k2 - day * 96) * 0.25;
    switch (r.kind) {
      case RequestKind::acs_cool:
        EXPECT_GE(h1, 6.0);
        EXPECT_LE(h1, 9.0);
        EXPECT_GE(h2, 17.0);
        EXPECT_LE(h2, 20.0);
        break;
      case RequestKind::appliance:
        EXPECT_GE(h1, 18.0);
        EXPECT_LE(h1, 23.0);
        EXPECT_GE(h2, 40.0);
        EXPECT_LE(h2, 41.75);
        break;
      case RequestKind::pev:
        EXPECT_GE(h1, 16.0);
        EXPECT_LE(h1, 22.0);
        EXPECT_GE(r.soc, 0.0);
        EXPECT_LT(r.soc, 1.0);
        break;
      case RequestKind::acs_heat:
        ADD_FAILURE() << "summer scenario with a heating request";
    }
  }
}

TEST(Generator, SameSeedSameDocument) {
  EXPECT_EQ(scenario_to_json(generate_scenario(3, 2, 11)).dump(), scenario_to_json(generate_scenario(3, 2, 11)).dump());
  EXPECT_NE(scenario_to_json(generate_scenario(3, 2, 11)).dump(), scenario_to_json(generate_scenario(3, 2, 12)).dump());
  EXPECT_THROW(generate_scenario(0, 1, 1), std::invalid_argument);
}

TEST(ClosedLoop, LedgerIsConsistent) {
  const auto& r = small_run();
  ASSERT_EQ(r.report.runs.size(), 2U);
  for (const auto& run : r.report.runs) {
    ASSERT_EQ(run.ledger.steps(), r.sc.grid.n_steps);
    for (int k = 0; k < run.ledger.steps(); ++k) {
      const auto t = static_cast<std::size_t>(k);
      double sum = 0.0;
      for (std::size_t i = 0; i < r.sc.houses.size(); ++i) {
        const HouseDecision& d = run.applied[t][i];
        double p = d.acs.p_h + d.acs.p_c + d.pev_kw + run.ul[t][i];
        for (double a : d.appliance_kw) p += a;
        EXPECT_NEAR(run.ledger.p_member[t][i], p, 1e-9);
        sum += run.ledger.p_member[t][i];
      }
      EXPECT_NEAR(run.ledger.p_sh[t], std::min(run.ledger.pv[t], sum), 1e-9);
    }
  }
}

TEST(ClosedLoop, ProgramsRunOnceContiguouslyInsideWindows) {
  const auto& r = small_run();
  for (const auto& run : r.report.runs) {
    EXPECT_EQ(run.fallback_steps, 0);
    ASSERT_FALSE(run.programs.empty());
    for (const ProgramOutcome& p : run.programs) {
      ASSERT_FALSE(p.dropped);
      EXPECT_EQ(p.executed, p.phases);
      EXPECT_EQ(p.finished_at - p.started_at + 1, p.phases);
      EXPECT_GE(p.started_at, p.k1);
      EXPECT_LE(p.finished_at, p.k2);
      // The ledger shows power for this appliance exactly on those steps.
      for (int k = p.k1; k <= p.k2; ++k) {
        const bool on = run.applied[static_cast<std::size_t>(k)][static_cast<std::size_t>(p.house)]
                            .appliance_run[static_cast<std::size_t>(p.appliance)] != 0;
        EXPECT_EQ(on, k >= p.started_at && k <= p.finished_at);
      }
    }
  }
}

TEST(ClosedLoop, PevSessionsDeliverTheirTarget) {
  const auto& r = small_run();
  for (const auto& run : r.report.runs) {
    ASSERT_FALSE(run.sessions.empty());
    for (const PevOutcome& s : run.sessions) {
      EXPECT_TRUE(s.met);
      EXPECT_NEAR(s.delivered_battery_kwh, s.target_battery_kwh, 1e-6);
    }
  }
}

TEST(ClosedLoop, CommunityControllerSharesAtLeastAsMuch) {
  const auto& s = *small_run().report.summary;
  EXPECT_GE(s.coa.se_kwh + 1e-9, s.moa.se_kwh);
  double sum = 0.0;
  for (double d : s.discount) sum += d;
  EXPECT_NEAR(sum, s.coa.discount(), 1e-9);
}

TEST(Outputs, ByteIdenticalAcrossRuns) {
  Scenario sc = generate_scenario(2, 1, 23);
  SimConfig cfg;
  cfg.horizon_T = 32;
  const fs::path a = fresh_dir("rec_sim_det_a"), b = fresh_dir("rec_sim_det_b");
  cfg.out_dir = a.string();
  run_scenario(sc, cfg);
  cfg.out_dir = b.string();
  run_scenario(sc, cfg);
  int files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path().filename();
  }
  EXPECT_EQ(files, 10);
  const std::string ledger = slurp(a / "ledger_coa.csv");
  EXPECT_EQ(ledger.rfind("step,time_iso,house,device,power_kw\n", 0), 0U);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Outputs, SingleControllerMode) {
  Scenario sc = generate_scenario(1, 1, 4);
  SimConfig cfg;
  cfg.mode = RunMode::moa;
  cfg.horizon_T = 24;
  const fs::path d = fresh_dir("rec_sim_single");
  cfg.out_dir = d.string();
  const auto rep = run_scenario(sc, cfg);
  EXPECT_FALSE(rep.summary);
  ASSERT_EQ(rep.runs.size(), 1U);
  EXPECT_EQ(rep.runs[0].controller, Controller::moa);
  EXPECT_TRUE(fs::exists(d / "ledger_moa.csv"));
  EXPECT_FALSE(fs::exists(d / "ledger_coa.csv"));
  EXPECT_NE(slurp(d / "summary.txt").find("Controller moa"), std::string::npos);
  fs::remove_all(d);
}

TEST(RunScenario, RejectsBadConfigAndScenario) {
  Scenario sc = generate_scenario(1, 1, 4);
  SimConfig cfg;
  cfg.pv_err = 1.5;
  EXPECT_THROW(run_scenario(sc, cfg), ValidationError);
  cfg.pv_err = 0.1;
  cfg.horizon_T = 0;
  EXPECT_THROW(run_scenario(sc, cfg), ValidationError);
  cfg.horizon_T.reset();
  sc.houses[0].p_max = -1;
  EXPECT_THROW(run_scenario(sc, cfg), ValidationError);
}

TEST(Actuals, CsvReplacesSeries) {
  Scenario sc = generate_scenario(1, 1, 4);
  const fs::path p = fs::temp_directory_path() / "rec_actuals.csv";
  {
    std::ofstream out(p);
    out << "step,pv_kw,theta_ex_c\n";
    for (int k = 0; k < 96; ++k) out << k << ',' << 0.5 * k << ',' << 25 << '\n';
  }
  load_actuals(sc, p.string());
  EXPECT_DOUBLE_EQ(sc.pv_series[10], 5.0);
  EXPECT_DOUBLE_EQ(sc.theta_ex_series[95], 25.0);
  {
    std::ofstream out(p);
    out << "step,pv_kw,theta_ex_c\n0,1,2\n2,1,2\n";
  }
  EXPECT_THROW(load_actuals(sc, p.string()), ScenarioFormatError);
  {
    std::ofstream out(p);
    out << "k,pv,t\n";
  }
  EXPECT_THROW(load_actuals(sc, p.string()), ScenarioFormatError);
  fs::remove(p);
}
