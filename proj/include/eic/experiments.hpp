#pragma once

// Experiment runners behind the CLI subcommands: single-scenario runs with
// summaries, the scalar demonstration sweep over leak values, the stability
// heatmap over the (a, b) plane, the planar rotation runs, and the
// connected-units demo. Each runner both writes its artifacts and returns
// the computed results so tests can assert on them directly.

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "eic/bounds.hpp"
#include "eic/csvio.hpp"
#include "eic/exact1d.hpp"
#include "eic/hybridsim.hpp"
#include "eic/network.hpp"
#include "eic/scenario.hpp"

namespace eic {

inline std::size_t worker_count() {
  if (const char* env = std::getenv("EIC_WORKERS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<std::size_t>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

inline void ensure_outdir(const std::string& dir) {
  if (!dir.empty()) std::filesystem::create_directories(dir);
}

inline std::string join_path(const std::string& dir, const std::string& file) {
  if (dir.empty()) return file;
  return (std::filesystem::path(dir) / file).string();
}

// Every bound calculator that can speak to this configuration, applicable
// or not; reasons explain the verdicts.
inline std::vector<BoundReport> bound_suite(const PlantSpec& plant,
                                            const ControllerSpec& ctrl) {
  std::vector<BoundReport> out;
  const auto A = linear_matrix(plant);

  if (!ctrl.connected()) {
    const auto& ind = std::get<IndependentController>(ctrl.topology);
    const auto gain = derive_linear_gain(ind);
    auto inapplicable = [&](const char* id, const char* why) {
      BoundReport r;
      r.id = id;
      r.reason = why;
      out.push_back(r);
    };
    const bool scalar_pair = plant.dim == 1 && ind.B.cols == 2;
    bool leaks_equal = true;
    for (double l : ind.lambdas)
      if (l != ind.lambdas[0]) leaks_equal = false;

    if (!A) {
      inapplicable("scalar", "plant drift is not linear");
      inapplicable("scalar_simplified", "plant drift is not linear");
      inapplicable("scalar_tight", "plant drift is not linear");
      inapplicable("quadratic", "plant drift is not linear");
      return out;
    }
    if (!gain) {
      inapplicable("scalar", "analogue gain is not linear");
      inapplicable("scalar_simplified", "analogue gain is not linear");
      inapplicable("scalar_tight", "analogue gain is not linear");
      inapplicable("quadratic", "analogue gain is not linear");
      return out;
    }
    if (scalar_pair && leaks_equal) {
      const double a = (*A)(0, 0);
      const double b = (*gain)(0, 0);
      const double lam = ind.lambdas[0];
      out.push_back(scalar_bound(a, b, lam, ind.B));
      out.push_back(scalar_bound_simplified(a, b, lam, ind.B));
      out.push_back(scalar_bound_tight(a, b, lam, ind.B, ind.input));
    } else if (scalar_pair) {
      inapplicable("scalar", "scalar bounds assume a common leak constant");
      inapplicable("scalar_simplified", "scalar bounds assume a common leak constant");
      inapplicable("scalar_tight", "scalar bounds assume a common leak constant");
    }
    out.push_back(quadratic_bound(*A, *gain, ind.B, ind.lambdas));
    if (leaks_equal)
      out.push_back(quadratic_bound_equal_leak(*A, *gain, ind.B, ind.lambdas[0]));
    return out;
  }

  // Connected topology.
  BoundReport r;
  r.id = "quadratic_connected";
  if (!A) {
    r.reason = "plant drift is not linear";
    out.push_back(r);
    return out;
  }
  try {
    const auto nw = compute_null_weight(ctrl.B());
    const auto zb = z_bounds(ctrl.B(), ctrl.lambdas(), nw);
    out.push_back(connected_bound(*A, ctrl, zb));
  } catch (const std::exception& e) {
    r.reason = e.what();
    out.push_back(r);
  }
  return out;
}

namespace detail {

inline nlohmann::json report_to_json(const BoundReport& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["applicable"] = r.applicable;
  j["reason"] = r.reason;
  if (r.applicable) {
    j["prefactor"] = r.prefactor;
    j["decay_rate"] = r.decay_rate;
    j["ultimate_bound"] = r.ultimate_bound;
    for (const auto& [k, v] : r.aux) j["aux"][k] = v;
  }
  return j;
}

inline double vec_norm_span(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

}  // namespace detail

struct ScenarioRunResult {
  HybridTrajectory traj;
  nlohmann::json summary;
};

// Runs one scenario end to end: trajectory.csv, events.csv, summary.json.
inline ScenarioRunResult run_scenario(const Scenario& sc, const std::string& outdir) {
  auto rep = validate(sc.plant, sc.controller);
  if (!rep.ok()) {
    std::string msg = sc.name + ": validation failed:";
    for (const auto& v : rep.violations) msg += "\n  - " + v;
    throw ScenarioError(msg);
  }
  ScenarioRunResult out;
  out.traj = simulate(sc.plant, sc.controller, sc.x0, sc.sim);
  const HybridTrajectory& traj = out.traj;

  nlohmann::json& s = out.summary;
  s["scenario"] = sc.name;
  s["topology"] = sc.controller.connected() ? "connected" : "independent";
  s["diverged"] = traj.diverged;
  s["end_time"] = traj.end_time;
  s["final_x"] = traj.final_x();
  s["samples"] = traj.samples();

  nlohmann::json events;
  events["total"] = traj.events.size();
  for (const auto& st : traj.unit_stats) {
    events["per_unit"].push_back(st.count);
    events["min_gap"].push_back(st.count > 1 ? nlohmann::json(st.min_gap)
                                             : nlohmann::json());
    events["max_gap"].push_back(st.count > 1 ? nlohmann::json(st.max_gap)
                                             : nlohmann::json());
  }
  s["events"] = std::move(events);

  if (traj.state_dim == 1 && !sc.x0.empty() && sc.x0[0] != 0.0)
    s["stability_measure"] = stability_measure(traj);

  const double x0n = norm(sc.x0);
  auto reports = bound_suite(sc.plant, sc.controller);
  double tightest_c0 = std::numeric_limits<double>::infinity();
  for (const auto& r : reports) {
    nlohmann::json jr = detail::report_to_json(r);
    if (r.applicable) {
      double worst = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < traj.samples(); ++i) {
        const double xn = detail::vec_norm_span(traj.x_at(i));
        worst = std::max(worst, xn - envelope_value(r, x0n, traj.t[i]));
      }
      jr["max_envelope_violation"] = worst;
      jr["envelope_at_0"] = envelope_value(r, x0n, 0.0);
      tightest_c0 = std::min(tightest_c0, envelope_value(r, x0n, 0.0));
    }
    s["bounds"].push_back(std::move(jr));
  }

  // Global minimum inter-event time from the tightest certified envelope.
  if (std::isfinite(tightest_c0)) {
    std::function<double(double)> alpha;
    Vec thetas;
    if (!sc.controller.connected()) {
      const auto& ind = std::get<IndependentController>(sc.controller.topology);
      if (ind.input.kind == InputFn::Kind::RectifiedProjection) {
        alpha = rectified_drive_envelope(ind.input);
        thetas = ind.thetas;
      }
    } else {
      const auto& con = std::get<ConnectedController>(sc.controller.topology);
      double colmax = 0.0;
      for (std::size_t j = 0; j < con.B.cols; ++j) colmax = std::max(colmax, norm(con.B.col(j)));
      const double gn = spectral_norm(con.gain);
      alpha = [colmax, gn](double r) { return colmax * gn * r; };
      thetas = connected_thresholds(con.B);
    }
    if (alpha) {
      const double bound =
          min_inter_event_global(thetas, sc.controller.lambdas(), alpha, tightest_c0);
      s["min_inter_event"]["certified_C"] = tightest_c0;
      s["min_inter_event"]["bound"] = bound;
      double observed = std::numeric_limits<double>::infinity();
      for (const auto& st : traj.unit_stats)
        if (st.count > 1) observed = std::min(observed, st.min_gap);
      if (std::isfinite(observed)) s["min_inter_event"]["observed_min_gap"] = observed;
    }
  }

  ensure_outdir(outdir);
  write_trajectory_csv(join_path(outdir, "trajectory.csv"), traj);
  write_events_csv(join_path(outdir, "events.csv"), traj);
  std::ofstream js(join_path(outdir, "summary.json"), std::ios::binary);
  js << s.dump(2) << "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Scalar demonstration: three leak values on the same plant/controller.

struct Fig2Run {
  double lam = 0.0;
  HybridTrajectory traj;
  BoundReport basic;
  BoundReport tight;
  double max_violation_basic = 0.0;  // max of |x| - envelope
  double max_violation_tight = 0.0;
  double min_x = 0.0;
  std::size_t sign_changes = 0;
};

struct Fig2Result {
  std::vector<Fig2Run> runs;
};

inline Fig2Result run_fig2(const std::string& outdir) {
  const double a = 1.0, b = 2.5, theta = 1.0 / b, x0 = 2.0, T = 10.0, dt = 1e-4;
  const Mat B(1, 2, {-1.0, 1.0});
  const InputFn g = InputFn::rectified(Mat(2, 1, {1.0, -1.0}), {1.0, 1.0});
  ensure_outdir(outdir);

  Fig2Result result;
  nlohmann::json summary;
  summary["config"] = {{"a", a}, {"b", b},       {"theta", theta},
                       {"x0", x0}, {"T", T},     {"dt", dt},
                       {"note", "x0 chosen to show both the transient and the ultimate band"}};

  for (double lam : {3.0, 1.5, 0.0}) {
    PlantSpec plant;
    plant.dim = 1;
    plant.drift = LinearDrift{Mat(1, 1, {a})};
    IndependentController c;
    c.B = B;
    c.thetas = {theta, theta};
    c.lambdas = {lam, lam};
    c.input = g;

    Fig2Run run;
    run.lam = lam;
    run.traj = simulate(plant, ControllerSpec{c}, Vec{x0}, SimParams{T, dt, 1e-9});
    run.basic = scalar_bound(a, b, lam, B);
    run.tight = scalar_bound_tight(a, b, lam, B, g);

    run.min_x = std::numeric_limits<double>::infinity();
    double prev = 0.0;
    run.max_violation_basic = -std::numeric_limits<double>::infinity();
    run.max_violation_tight = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < run.traj.samples(); ++i) {
      const double xv = run.traj.x_at(i)[0];
      run.min_x = std::min(run.min_x, xv);
      if (xv != 0.0) {
        if (prev != 0.0 && std::signbit(xv) != std::signbit(prev)) ++run.sign_changes;
        prev = xv;
      }
      const double ax = std::abs(xv);
      if (run.basic.applicable)
        run.max_violation_basic =
            std::max(run.max_violation_basic, ax - envelope_value(run.basic, x0, run.traj.t[i]));
      if (run.tight.applicable)
        run.max_violation_tight =
            std::max(run.max_violation_tight, ax - envelope_value(run.tight, x0, run.traj.t[i]));
    }

    const std::string tag = lam == 1.5 ? "1.5" : (lam == 3.0 ? "3" : "0");
    write_trajectory_csv(join_path(outdir, "fig2_lambda" + tag + ".csv"), run.traj);
    write_events_csv(join_path(outdir, "fig2_events_lambda" + tag + ".csv"), run.traj);

    nlohmann::json jr;
    jr["lambda"] = lam;
    jr["events"] = run.traj.events.size();
    jr["min_x"] = run.min_x;
    jr["sign_changes"] = run.sign_changes;
    jr["bound_basic"] = detail::report_to_json(run.basic);
    jr["bound_tight"] = detail::report_to_json(run.tight);
    if (run.basic.applicable) {
      jr["max_violation_basic"] = run.max_violation_basic;
      jr["basic_envelope_dominates"] = run.max_violation_basic <= 1e-6;
    }
    if (run.tight.applicable) {
      jr["max_violation_tight"] = run.max_violation_tight;
      jr["tight_envelope_dominates"] = run.max_violation_tight <= 1e-6;
    }
    summary["runs"].push_back(std::move(jr));
    result.runs.push_back(std::move(run));
  }

  // Envelope curves on the shared uniform grid.
  {
    std::ofstream out(join_path(outdir, "bounds.csv"), std::ios::binary);
    out << "t,basic_lambda3,basic_lambda1.5,basic_lambda0,tight_lambda1.5,tight_lambda0\n";
    const auto& b3 = result.runs[0].basic;
    const auto& b15 = result.runs[1].basic;
    const auto& b0 = result.runs[2].basic;
    const auto& t15 = result.runs[1].tight;
    const auto& t0 = result.runs[2].tight;
    const std::size_t steps = static_cast<std::size_t>(std::llround(T / dt));
    for (std::size_t k = 0; k <= steps; ++k) {
      const double t = std::min(k * dt, T);
      out << fmt17(t) << ',' << fmt17(envelope_value(b3, x0, t)) << ','
          << fmt17(envelope_value(b15, x0, t)) << ',' << fmt17(envelope_value(b0, x0, t))
          << ',' << fmt17(envelope_value(t15, x0, t)) << ','
          << fmt17(envelope_value(t0, x0, t)) << "\n";
    }
  }
  std::ofstream js(join_path(outdir, "fig2_summary.json"), std::ios::binary);
  js << summary.dump(2) << "\n";
  return result;
}

// ---------------------------------------------------------------------------
// Stability heatmap over the (a, b) plane.

struct HeatmapCell {
  double a = 0.0;
  double b = 0.0;
  double lam = 0.0;
  double C = 0.0;
  bool diverged = false;
  bool near_diagonal = false;
  std::size_t events = 0;
};

// One cell: the +/- pair controller parameterised by b via theta = 1/b,
// integrated piecewise-exactly (the event count in the divergent regime is
// proportional to the escape radius, so the radius stays moderate and the
// growth rate is reported over the truncated horizon with a diverged flag).
inline HeatmapCell heatmap_cell(double a, double b, double lam, double x0, double T,
                                double escape) {
  HeatmapCell cell;
  cell.a = a;
  cell.b = b;
  cell.lam = lam;
  cell.near_diagonal = std::abs(a - b) < 0.25;
  const auto run = exact_scalar_summary(a, -1.0, 1.0, 1.0 / b, lam, x0, T, escape);
  cell.diverged = run.diverged;
  cell.events = run.events;
  cell.C = std::log(std::abs(run.final_x) / std::abs(x0)) / run.final_t;
  return cell;
}

inline std::vector<HeatmapCell> run_heatmap(std::size_t grid_n, double lam,
                                            double escape = 1e4) {
  if (grid_n < 2) throw std::invalid_argument("run_heatmap: grid must be at least 2");
  const double x0 = 50.5, T = 200.0;
  std::vector<double> avals(grid_n), bvals(grid_n);
  for (std::size_t i = 0; i < grid_n; ++i) {
    avals[i] = 5.0 * static_cast<double>(i) / static_cast<double>(grid_n - 1);  // [0, 5]
    bvals[i] = 5.0 * static_cast<double>(i + 1) / static_cast<double>(grid_n);  // (0, 5]
  }
  std::vector<HeatmapCell> cells(grid_n * grid_n);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= cells.size()) break;
      const double a = avals[idx / grid_n];
      const double b = bvals[idx % grid_n];
      cells[idx] = heatmap_cell(a, b, lam, x0, T, escape);
    }
  };
  const std::size_t nw = std::min(worker_count(), cells.size());
  if (nw <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < nw; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return cells;
}

inline void write_heatmap_csv(const std::string& path, const std::vector<HeatmapCell>& cells) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "a,b,lambda,C,diverged,near_diagonal\n";
  for (const auto& c : cells)
    out << fmt17(c.a) << ',' << fmt17(c.b) << ',' << fmt17(c.lam) << ',' << fmt17(c.C)
        << ',' << (c.diverged ? 1 : 0) << ',' << (c.near_diagonal ? 1 : 0) << "\n";
}

inline std::vector<HeatmapCell> run_fig3(std::size_t grid_n, double lam,
                                         const std::string& outdir) {
  auto cells = run_heatmap(grid_n, lam);
  ensure_outdir(outdir);
  write_heatmap_csv(join_path(outdir, "heatmap.csv"), cells);
  return cells;
}

// ---------------------------------------------------------------------------
// Planar rotation runs with the per-axis pair controller.

struct Fig4Run {
  double omega = 0.0;
  HybridTrajectory traj;
  BoundReport bound;      // equal-leak ultimate bound
  double limsup = 0.0;    // observed sup of ||x|| over the final half horizon
  double ratio = 0.0;     // bound / observed
};

struct Fig4Result {
  std::vector<Fig4Run> runs;
};

inline Fig4Result run_fig4(const std::string& outdir) {
  const double a = 1.0, lam = 0.2, theta = 1.0 / 1.5, T = 20.0, dt = 1e-4;
  const Vec x0{4.0, 0.0};
  ensure_outdir(outdir);
  Fig4Result result;
  nlohmann::json summary;
  summary["config"] = {{"a", a},   {"lambda", lam}, {"theta", theta},
                       {"x0", x0}, {"T", T},        {"dt", dt}};

  for (double omega : {0.5, 3.0}) {
    PlantSpec plant;
    plant.dim = 2;
    plant.drift = RegisteredDrift{"rotation_scaling", {a, omega}};
    IndependentController c;
    c.B = Mat(2, 4, {-1.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 1.0});
    c.thetas = Vec(4, theta);
    c.lambdas = Vec(4, lam);
    c.input = InputFn::rectified(Mat(4, 2, {1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0}),
                                 Vec(4, 1.0));

    Fig4Run run;
    run.omega = omega;
    run.traj = simulate(plant, ControllerSpec{c}, x0, SimParams{T, dt, 1e-9});
    const Mat A(2, 2, {a, omega, -omega, a});
    run.bound = quadratic_bound_equal_leak(A, 1.5 * Mat::identity(2), c.B, lam);
    for (std::size_t i = 0; i < run.traj.samples(); ++i) {
      if (run.traj.t[i] < T / 2.0) continue;
      run.limsup = std::max(run.limsup, detail::vec_norm_span(run.traj.x_at(i)));
    }
    run.ratio = run.bound.applicable && run.limsup > 0.0
                    ? run.bound.ultimate_bound / run.limsup
                    : 0.0;

    const std::string tag = omega == 0.5 ? "0.5" : "3";
    write_trajectory_csv(join_path(outdir, "fig4_omega" + tag + ".csv"), run.traj);
    write_events_csv(join_path(outdir, "fig4_events_omega" + tag + ".csv"), run.traj);

    nlohmann::json jr;
    jr["omega"] = omega;
    jr["events"] = run.traj.events.size();
    jr["bound"] = detail::report_to_json(run.bound);
    jr["observed_limsup_final_half"] = run.limsup;
    jr["conservatism_ratio"] = run.ratio;
    summary["runs"].push_back(std::move(jr));
    result.runs.push_back(std::move(run));
  }
  std::ofstream js(join_path(outdir, "fig4_summary.json"), std::ios::binary);
  js << summary.dump(2) << "\n";
  return result;
}

// ---------------------------------------------------------------------------
// Connected-units demo on the planar plant.

struct ConnectedDemoResult {
  HybridTrajectory traj;
  NullWeight nw;
  ZBounds zb;
  MonitorReport monitor;
  BoundReport bound;
  double limsup = 0.0;
  double wz_scale = 0.0;  // w' diag(B'B)
};

inline ConnectedDemoResult run_connected_demo(const std::string& outdir) {
  const double a = 1.0, omega = 0.5, lam = 0.2, T = 20.0, dt = 1e-4;
  const Vec x0{4.0, 0.0};
  PlantSpec plant;
  plant.dim = 2;
  plant.drift = RegisteredDrift{"rotation_scaling", {a, omega}};
  ConnectedController c;
  c.B = Mat(2, 4, {-1.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 1.0});
  c.lambdas = Vec(4, lam);
  c.gain = 1.5 * Mat::identity(2);
  const ControllerSpec ctrl{c};

  ConnectedDemoResult result;
  result.traj = simulate(plant, ctrl, x0, SimParams{T, dt, 1e-9});
  result.nw = compute_null_weight(c.B);
  result.zb = z_bounds(c.B, c.lambdas, result.nw);
  result.monitor = monitor_connected(result.traj, ctrl, result.nw, result.zb);
  result.bound = connected_bound(Mat(2, 2, {a, omega, -omega, a}), ctrl, result.zb);
  for (std::size_t i = 0; i < result.traj.samples(); ++i) {
    if (result.traj.t[i] < T / 2.0) continue;
    result.limsup = std::max(result.limsup, detail::vec_norm_span(result.traj.x_at(i)));
  }
  const Vec d = connected_thresholds(c.B);
  for (std::size_t i = 0; i < d.size(); ++i) result.wz_scale += result.nw.w[i] * d[i];

  ensure_outdir(outdir);
  write_trajectory_csv(join_path(outdir, "connected_trajectory.csv"), result.traj);
  write_events_csv(join_path(outdir, "connected_events.csv"), result.traj);

  nlohmann::json s;
  s["config"] = {{"a", a}, {"omega", omega}, {"lambda", lam}, {"x0", x0}, {"T", T}, {"dt", dt}};
  s["events"] = result.traj.events.size();
  s["null_weight"] = result.nw.w;
  s["null_weight_residual"] = result.nw.residual;
  s["z_lower"] = result.zb.lower;
  s["z_upper"] = result.zb.upper;
  s["monitor"] = {{"max_abs_wz", result.monitor.max_abs_wz},
                  {"max_upper_violation", result.monitor.max_upper_violation},
                  {"max_lower_violation", result.monitor.max_lower_violation},
                  {"max_d1", result.monitor.max_d1},
                  {"max_d2", result.monitor.max_d2},
                  {"d1_bound", result.monitor.d1_bound},
                  {"d2_bound", result.monitor.d2_bound}};
  s["bound"] = detail::report_to_json(result.bound);
  s["observed_limsup_final_half"] = result.limsup;
  std::ofstream js(join_path(outdir, "connected_summary.json"), std::ios::binary);
  js << s.dump(2) << "\n";
  return result;
}

}  // namespace eic
