// Command-line harness: scenario runs, the demonstration experiments and
// bound reports. Exit codes: 0 success, 2 parse/validation failure,
// 3 divergence (overflow guard tripped).

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "eic/experiments.hpp"

namespace {

void print_report(const eic::BoundReport& r, double x0_norm) {
  if (!r.applicable) {
    std::printf("%-22s not applicable: %s\n", r.id.c_str(), r.reason.c_str());
    return;
  }
  std::printf("%-22s applicable (%s)\n", r.id.c_str(), r.reason.c_str());
  std::printf("    prefactor D      = %.17g\n", r.prefactor);
  std::printf("    decay rate alpha = %.17g\n", r.decay_rate);
  std::printf("    ultimate bound C = %.17g\n", r.ultimate_bound);
  std::printf("    envelope at t=0  = %.17g  (for ||x0|| = %.17g)\n",
              eic::envelope_value(r, x0_norm, 0.0), x0_norm);
  for (const auto& [k, v] : r.aux) std::printf("    %-16s = %.17g\n", k.c_str(), v);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"event-based impulsive control: hybrid simulator and certified bounds"};
  app.require_subcommand(1);

  std::string sim_file, sim_outdir;
  auto* sim = app.add_subcommand(
      "simulate", "run one scenario; writes trajectory.csv, events.csv, summary.json");
  sim->add_option("file", sim_file, "scenario JSON file")->required();
  sim->add_option("--outdir", sim_outdir,
                  "output directory (default: the scenario's outputs field)");

  std::string f2_out = ".";
  auto* f2 = app.add_subcommand("fig2", "scalar sweep over leak values {3, 1.5, 0}");
  f2->add_option("--outdir", f2_out, "output directory");

  std::size_t grid = 21;
  double f3_lam = 0.0;
  std::string f3_out = ".";
  auto* f3 = app.add_subcommand("fig3", "stability heatmap over the (a, b) plane");
  f3->add_option("--grid", grid, "grid resolution per axis")
      ->check(CLI::Range(std::size_t{2}, std::size_t{201}));
  f3->add_option("--lambda", f3_lam, "leak constant, 0 or 3")
      ->check(CLI::IsMember({0.0, 3.0}));
  f3->add_option("--outdir", f3_out, "output directory");

  std::string f4_out = ".";
  auto* f4 = app.add_subcommand("fig4", "planar rotation runs, omega in {0.5, 3}");
  f4->add_option("--outdir", f4_out, "output directory");

  std::string cd_out = ".";
  auto* cd = app.add_subcommand("connected-demo",
                                "connected-units run with invariant monitors");
  cd->add_option("--outdir", cd_out, "output directory");

  std::string bounds_file;
  auto* bd = app.add_subcommand("bounds", "print every bound report for a scenario");
  bd->add_option("file", bounds_file, "scenario JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      eic::Scenario sc = eic::load_scenario(sim_file);
      const std::string out =
          !sim_outdir.empty() ? sim_outdir : (!sc.outputs.empty() ? sc.outputs : ".");
      auto res = eic::run_scenario(sc, out);
      std::cout << res.summary.dump(2) << "\n";
      return res.traj.diverged ? 3 : 0;
    }
    if (f2->parsed()) {
      auto result = eic::run_fig2(f2_out);
      for (const auto& run : result.runs)
        std::printf("lambda=%-4g events=%-5zu min_x=%.6g sign_changes=%zu\n", run.lam,
                    run.traj.events.size(), run.min_x, run.sign_changes);
      std::printf("wrote fig2 artifacts to %s\n", f2_out.c_str());
      return 0;
    }
    if (f3->parsed()) {
      auto cells = eic::run_fig3(grid, f3_lam, f3_out);
      std::size_t stable = 0, unstable = 0, diverged = 0;
      for (const auto& c : cells) {
        if (c.diverged) ++diverged;
        if (c.near_diagonal) continue;
        (c.C < 0 ? stable : unstable)++;
      }
      std::printf("heatmap %zux%zu lambda=%g: %zu stable, %zu unstable (classified), "
                  "%zu guard-truncated\n",
                  grid, grid, f3_lam, stable, unstable, diverged);
      std::printf("wrote %s\n", eic::join_path(f3_out, "heatmap.csv").c_str());
      return 0;
    }
    if (f4->parsed()) {
      auto result = eic::run_fig4(f4_out);
      for (const auto& run : result.runs)
        std::printf("omega=%-3g events=%-5zu ultimate_bound=%.6g observed=%.6g ratio=%.3f\n",
                    run.omega, run.traj.events.size(), run.bound.ultimate_bound, run.limsup,
                    run.ratio);
      std::printf("wrote fig4 artifacts to %s\n", f4_out.c_str());
      return 0;
    }
    if (cd->parsed()) {
      auto result = eic::run_connected_demo(cd_out);
      std::printf("events=%zu max|w'z|=%.3g z-upper violation=%.3g z-lower violation=%.3g\n",
                  result.traj.events.size(), result.monitor.max_abs_wz,
                  result.monitor.max_upper_violation, result.monitor.max_lower_violation);
      std::printf("ultimate bound=%.6g observed=%.6g\n", result.bound.ultimate_bound,
                  result.limsup);
      std::printf("wrote connected-demo artifacts to %s\n", cd_out.c_str());
      return 0;
    }
    if (bd->parsed()) {
      eic::Scenario sc = eic::load_scenario(bounds_file);
      auto rep = eic::validate(sc.plant, sc.controller);
      if (!rep.ok()) {
        std::string msg = sc.name + ": validation failed:";
        for (const auto& v : rep.violations) msg += "\n  - " + v;
        throw eic::ScenarioError(msg);
      }
      const double x0n = eic::norm(sc.x0);
      for (const auto& r : eic::bound_suite(sc.plant, sc.controller)) print_report(r, x0n);
      return 0;
    }
  } catch (const eic::ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
