// recsim: generate, validate and simulate energy-community scenarios.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "rec/scenario_io.hpp"
#include "rec/sim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitBreakdown = 3;

void print_run(const rec::ControllerRun& run) {
  int unmet = 0;
  for (const auto& s : run.sessions) unmet += s.met ? 0 : 1;
  fmt::print("{}: {} steps in {:.1f} s, {} B&B nodes, {} fallback steps, {} unmet PEV sessions\n",
             rec::to_string(run.controller), run.ledger.steps(), run.seconds, run.stats.nodes, run.fallback_steps,
             unmet);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy community controller simulator"};
  app.require_subcommand(1);

  rec::SimConfig cfg;
  std::uint64_t seed = 0;
  int horizon = 0;
  bool quiet = false;
  auto* sim = app.add_subcommand("simulate", "Run the closed-loop simulation and write CSV reports");
  sim->add_option("--scenario", cfg.scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  sim->add_option("--mode", cfg.mode, "Controller(s) to run")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, rec::RunMode>{{"coa", rec::RunMode::coa}, {"moa", rec::RunMode::moa},
                                              {"both", rec::RunMode::both}}));
  auto* seed_opt = sim->add_option("--seed", seed, "Forecast noise seed (default: scenario seed)");
  sim->add_option("--out", cfg.out_dir, "Output directory")->required();
  sim->add_option("--aggregation", cfg.aggregation, "Shared-energy aggregation")
      ->transform(CLI::CheckedTransformer(std::map<std::string, rec::Aggregation>{
          {"step", rec::Aggregation::step}, {"hourly", rec::Aggregation::hourly}}));
  sim->add_option("--policy", cfg.policy, "Discount allocation")
      ->transform(CLI::CheckedTransformer(std::map<std::string, rec::AllocationPolicy>{
          {"loss_compensating", rec::AllocationPolicy::loss_compensating},
          {"equal_split", rec::AllocationPolicy::equal_split}}));
  sim->add_option("--pv-err", cfg.pv_err, "PV forecast error cap, per unit")->check(CLI::Range(0.0, 1.0));
  sim->add_option("--temp-err", cfg.temp_err, "Outdoor temperature forecast error cap, per unit")
      ->check(CLI::Range(0.0, 1.0));
  sim->add_option("--ul-forecast", cfg.ul_forecast, "Uncontrollable load forecast")
      ->transform(CLI::CheckedTransformer(std::map<std::string, rec::UlForecast>{
          {"trailing7", rec::UlForecast::trailing_week}, {"perfect", rec::UlForecast::perfect}}));
  auto* horizon_opt = sim->add_option("--horizon", horizon, "Prediction horizon in steps")->check(CLI::PositiveNumber);
  sim->add_option("--formulation", cfg.mpc.formulation, "Optimization model form")
      ->transform(CLI::CheckedTransformer(std::map<std::string, rec::Formulation>{
          {"compact", rec::Formulation::compact}, {"canonical", rec::Formulation::canonical}}));
  sim->add_option("--rel-gap", cfg.mpc.milp.rel_gap, "Relative optimality gap for branch and bound")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sim->add_option("--actuals", cfg.actuals_path, "CSV step,pv_kw,theta_ex_c replacing the scenario series")
      ->check(CLI::ExistingFile);
  sim->add_flag("--pev-relax", cfg.pev_relax_max_soc, "Accept PEV windows too short for a full recharge");
  sim->add_flag("--quiet", quiet, "Do not print the run summary");
  bool progress = false;
  sim->add_flag("--progress", progress, "Report progress on stderr");

  int houses = 1, days = 1;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "Write a synthetic scenario");
  gen->add_option("--houses", houses, "Number of member houses")->required()->check(CLI::PositiveNumber);
  gen->add_option("--days", days, "Number of days")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "Random seed")->required();
  gen->add_option("--out", gen_out, "Output scenario file")->required();

  std::string val_path;
  bool val_relax = false;
  auto* val = app.add_subcommand("validate", "Check a scenario file");
  val->add_option("--scenario", val_path, "Scenario JSON file")->required();
  val->add_flag("--pev-relax", val_relax, "Accept PEV windows too short for a full recharge");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*gen) {
      rec::save_scenario(rec::generate_scenario(houses, days, gen_seed), gen_out);
      return kExitOk;
    }
    if (*val) {
      const rec::ValidationReport r = rec::validate_scenario(rec::load_scenario(val_path), {val_relax});
      if (r.ok()) {
        fmt::print("ok\n");
        return kExitOk;
      }
      fmt::print(stderr, "{}", r.to_string());
      return kExitInvalid;
    }
    if (*seed_opt) cfg.seed = seed;
    if (*horizon_opt) cfg.horizon_T = horizon;
    if (progress) {
      const auto t0 = std::chrono::steady_clock::now();
      cfg.on_step = [t0](rec::Controller c, int done, int total) {
        if (done % std::max(1, total / 20) != 0 && done != total) return;
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        fmt::print(stderr, "{} {}/{} steps, {:.0f} s\n", rec::to_string(c), done, total, s);
      };
    }
    const rec::RunReport report = rec::run(cfg);
    if (!quiet) {
      for (const auto& run : report.runs) print_run(run);
      if (report.summary && report.summary->moa.se_kwh > 0.0)
        fmt::print("shared energy coa {:.1f} kWh, moa {:.1f} kWh\n", report.summary->coa.se_kwh,
                   report.summary->moa.se_kwh);
    }
    return kExitOk;
  } catch (const rec::ValidationError& e) {
    fmt::print(stderr, "invalid scenario:\n{}", e.what());
    return kExitInvalid;
  } catch (const rec::ScenarioFormatError& e) {
    fmt::print(stderr, "format error: {}\n", e.what());
    return kExitInvalid;
  } catch (const rec::SolverBreakdown& e) {
    fmt::print(stderr, "solver breakdown: {}\n", e.what());
    return kExitBreakdown;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitIo;
  }
}
