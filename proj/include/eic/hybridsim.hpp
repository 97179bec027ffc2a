#pragma once

// Hybrid integrator for the coupled plant / leaky-integrator dynamics.
// Between events the stacked smooth field is advanced with classical
// fixed-step RK4; threshold crossings are localised by bisection on the
// step, the earliest-crossing unit fires an impulse on the state and a
// reset on its neuronal variable, and integration resumes from the event
// instant. All variables are right-continuous: the trajectory stores both
// one-sided samples at every event time.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "eic/linalg.hpp"
#include "eic/model.hpp"

namespace eic {

struct StepTooCoarse : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ZeroInitial : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HybridState {
  double t = 0.0;
  Vec x;
  Vec z;
};

struct EventRecord {
  double t = 0.0;
  std::size_t unit = 0;  // 0-based, matching the z_<i> trajectory columns
  std::size_t seq = 0;
};

enum class SampleKind : char { Grid, PreEvent, PostEvent };

struct UnitStats {
  std::size_t count = 0;
  double min_gap = std::numeric_limits<double>::infinity();
  double max_gap = 0.0;
  double last_t = std::numeric_limits<double>::quiet_NaN();
};

struct HybridTrajectory {
  std::size_t state_dim = 0;
  std::size_t unit_count = 0;
  std::vector<double> t;
  std::vector<double> x;   // state_dim entries per sample
  std::vector<double> xc;  // auxiliary continuous variable, state_dim per sample
  std::vector<double> z;   // unit_count entries per sample
  std::vector<SampleKind> kind;
  std::vector<EventRecord> events;
  std::vector<UnitStats> unit_stats;
  bool diverged = false;
  double end_time = 0.0;

  std::size_t samples() const { return t.size(); }
  std::span<const double> x_at(std::size_t i) const {
    return {x.data() + i * state_dim, state_dim};
  }
  std::span<const double> xc_at(std::size_t i) const {
    return {xc.data() + i * state_dim, state_dim};
  }
  std::span<const double> z_at(std::size_t i) const {
    return {z.data() + i * unit_count, unit_count};
  }
  Vec final_x() const {
    return samples() ? Vec(x_at(samples() - 1).begin(), x_at(samples() - 1).end()) : Vec{};
  }
};

struct SimParams {
  double T = 10.0;
  double dt = 1e-4;
  double event_tol = 1e-9;
  double guard = 1e12;  // overflow guard on ||x||; tripping it is an outcome, not a fault
};

// x_c = x + B Theta^-1 z (independent) or x + (B B^T)^-1 B z (connected);
// the linear map applied to z.
inline Mat auxiliary_map(const ControllerSpec& ctrl) {
  const Mat& B = ctrl.B();
  if (!ctrl.connected()) {
    const auto& ind = std::get<IndependentController>(ctrl.topology);
    Mat W = B;
    for (std::size_t j = 0; j < W.cols; ++j)
      for (std::size_t i = 0; i < W.rows; ++i) W(i, j) /= ind.thetas[j];
    return W;
  }
  // Solve (B B^T) R = B column by column.
  const Mat G = B * B.transposed();
  Mat R(B.rows, B.cols);
  for (std::size_t j = 0; j < B.cols; ++j) {
    Vec rhs = B.col(j);
    Vec col;
    try {
      col = solve_linear(G, rhs);
    } catch (const SingularSystem&) {
      throw SingularGram("auxiliary: B B^T is singular (steering condition violated)");
    }
    for (std::size_t i = 0; i < B.rows; ++i) R(i, j) = col[i];
  }
  return R;
}

inline Vec auxiliary(const Vec& x, const Vec& z, const ControllerSpec& ctrl) {
  const Mat W = auxiliary_map(ctrl);
  Vec out = x;
  for (std::size_t j = 0; j < W.cols; ++j) {
    if (z[j] == 0.0) continue;
    for (std::size_t i = 0; i < W.rows; ++i) out[i] += W(i, j) * z[j];
  }
  return out;
}

namespace detail {

// Preassembled right-hand side and event data for one simulation run.
struct HybridEngine {
  std::size_t k = 0, n = 0;
  DriftFn drift;
  bool connected = false;
  Mat B;
  Vec thresholds;
  Vec lambdas;
  Mat drive;     // connected: dz = -lam z + drive * x
  InputFn input; // independent drive
  Mat reset;     // N x N, column i subtracted from z when unit i fires
  Mat xc_map;

  Vec gbuf;

  void rhs(const Vec& x, const Vec& z, Vec& dx, Vec& dz) {
    drift(x, dx);
    dz.resize(n);
    if (connected) {
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += drive(i, j) * x[j];
        dz[i] = -lambdas[i] * z[i] + s;
      }
    } else {
      input.eval(x, gbuf);
      for (std::size_t i = 0; i < n; ++i) dz[i] = -lambdas[i] * z[i] + gbuf[i];
    }
  }
};

inline HybridEngine make_engine(const PlantSpec& plant, const ControllerSpec& ctrl) {
  HybridEngine e;
  e.k = plant.dim;
  e.n = ctrl.units();
  e.drift = make_drift(plant);
  e.connected = ctrl.connected();
  e.B = ctrl.B();
  e.lambdas = ctrl.lambdas();
  e.xc_map = auxiliary_map(ctrl);
  if (e.connected) {
    const auto& con = std::get<ConnectedController>(ctrl.topology);
    e.thresholds = connected_thresholds(e.B);
    e.reset = e.B.transposed() * e.B;
    // dz = -Lam z + B^T k(x) with k(x) = -gain x
    e.drive = -1.0 * (e.B.transposed() * con.gain);
  } else {
    const auto& ind = std::get<IndependentController>(ctrl.topology);
    e.thresholds = ind.thetas;
    e.reset = Mat::diag(ind.thetas);
    e.input = ind.input;
  }
  return e;
}

struct Rk4Scratch {
  Vec k1x, k1z, k2x, k2z, k3x, k3z, k4x, k4z, tx, tz;
};

inline void rk4_step(HybridEngine& e, const Vec& x, const Vec& z, double h, Vec& xo,
                     Vec& zo, Rk4Scratch& s) {
  const std::size_t k = x.size(), n = z.size();
  auto blend = [&](const Vec& bx, const Vec& bz, double w) {
    s.tx.resize(k);
    s.tz.resize(n);
    for (std::size_t i = 0; i < k; ++i) s.tx[i] = x[i] + w * bx[i];
    for (std::size_t i = 0; i < n; ++i) s.tz[i] = z[i] + w * bz[i];
  };
  e.rhs(x, z, s.k1x, s.k1z);
  blend(s.k1x, s.k1z, 0.5 * h);
  e.rhs(s.tx, s.tz, s.k2x, s.k2z);
  blend(s.k2x, s.k2z, 0.5 * h);
  e.rhs(s.tx, s.tz, s.k3x, s.k3z);
  blend(s.k3x, s.k3z, h);
  e.rhs(s.tx, s.tz, s.k4x, s.k4z);
  xo.resize(k);
  zo.resize(n);
  const double w = h / 6.0;
  for (std::size_t i = 0; i < k; ++i)
    xo[i] = x[i] + w * (s.k1x[i] + 2.0 * s.k2x[i] + 2.0 * s.k3x[i] + s.k4x[i]);
  for (std::size_t i = 0; i < n; ++i)
    zo[i] = z[i] + w * (s.k1z[i] + 2.0 * s.k2z[i] + 2.0 * s.k3z[i] + s.k4z[i]);
}

}  // namespace detail

inline HybridTrajectory simulate(const PlantSpec& plant, const ControllerSpec& ctrl,
                                 const Vec& x0, const SimParams& sim) {
  if (!(sim.dt > 0.0)) throw std::invalid_argument("simulate: dt must be positive");
  if (!(sim.event_tol > 0.0) || sim.event_tol > sim.dt)
    throw std::invalid_argument("simulate: need 0 < event_tol <= dt");
  if (x0.size() != plant.dim) throw std::invalid_argument("simulate: x0 dimension mismatch");

  detail::HybridEngine eng = detail::make_engine(plant, ctrl);
  detail::Rk4Scratch scratch;

  HybridTrajectory traj;
  traj.state_dim = eng.k;
  traj.unit_count = eng.n;
  traj.unit_stats.assign(eng.n, UnitStats{});
  traj.end_time = 0.0;

  Vec x = x0;
  Vec z(eng.n, 0.0);
  double t = 0.0;

  auto record = [&](SampleKind kind) {
    traj.t.push_back(t);
    traj.kind.push_back(kind);
    traj.x.insert(traj.x.end(), x.begin(), x.end());
    traj.z.insert(traj.z.end(), z.begin(), z.end());
    for (std::size_t i = 0; i < eng.k; ++i) {
      double v = x[i];
      for (std::size_t j = 0; j < eng.n; ++j) v += eng.xc_map(i, j) * z[j];
      traj.xc.push_back(v);
    }
  };

  auto crossed = [&](const Vec& zz) {
    for (std::size_t i = 0; i < eng.n; ++i)
      if (zz[i] >= eng.thresholds[i]) return true;
    return false;
  };

  // Fires every unit at or above threshold, lowest index first, one pre/post
  // sample pair and one event record per firing. Applying a reset can push a
  // connected neighbour across its threshold, hence the outer loop.
  auto fire_events = [&]() {
    const std::size_t cap = 64 * std::max<std::size_t>(eng.n, 1);
    std::size_t fired = 0;
    while (true) {
      std::size_t unit = eng.n;
      for (std::size_t i = 0; i < eng.n; ++i)
        if (z[i] >= eng.thresholds[i]) {
          unit = i;
          break;
        }
      if (unit == eng.n) break;
      if (++fired > cap)
        throw StepTooCoarse("simulate: event cascade did not settle at one instant");
      record(SampleKind::PreEvent);
      for (std::size_t i = 0; i < eng.k; ++i) x[i] += eng.B(i, unit);
      if (eng.connected) {
        for (std::size_t i = 0; i < eng.n; ++i) z[i] -= eng.reset(i, unit);
      } else {
        z[unit] = 0.0;  // exact reset
      }
      traj.events.push_back({t, unit, traj.events.size()});
      auto& st = traj.unit_stats[unit];
      if (st.count > 0) {
        const double gap = t - st.last_t;
        st.min_gap = std::min(st.min_gap, gap);
        st.max_gap = std::max(st.max_gap, gap);
      }
      st.last_t = t;
      ++st.count;
      record(SampleKind::PostEvent);
    }
  };

  auto overflowed = [&]() {
    double ss = 0.0;
    for (double v : x) ss += v * v;
    return !std::isfinite(ss) || std::sqrt(ss) > sim.guard;
  };

  record(SampleKind::Grid);
  fire_events();  // z(0) = 0 never fires, but keeps the loop invariant honest

  Vec xtrial, ztrial;
  std::size_t grid = 1;
  double next_grid = std::min(grid * sim.dt, sim.T);

  while (t < sim.T) {
    const double h = next_grid - t;
    detail::rk4_step(eng, x, z, h, xtrial, ztrial, scratch);
    if (!crossed(ztrial)) {
      x.swap(xtrial);
      z.swap(ztrial);
      t = next_grid;
      record(SampleKind::Grid);
      ++grid;
      next_grid = std::min(grid * sim.dt, sim.T);
    } else {
      // Bisect for the earliest crossing inside (0, h]. The refinement goes
      // well below event_tol so the stored pre-event state overshoots the
      // threshold by far less than the guaranteed time localisation.
      const double loc_tol = std::min(
          sim.event_tol,
          std::max(1e-4 * sim.event_tol,
                   8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, t)));
      double lo = 0.0, hi = h;
      while (hi - lo > loc_tol) {
        const double mid = 0.5 * (lo + hi);
        detail::rk4_step(eng, x, z, mid, xtrial, ztrial, scratch);
        if (crossed(ztrial))
          hi = mid;
        else
          lo = mid;
      }
      detail::rk4_step(eng, x, z, hi, xtrial, ztrial, scratch);
      x.swap(xtrial);
      z.swap(ztrial);
      t += hi;
      fire_events();
      if (t >= next_grid) {
        record(SampleKind::Grid);
        ++grid;
        next_grid = std::min(grid * sim.dt, sim.T);
        if (t >= sim.T) {
          traj.end_time = t;
          return traj;
        }
      }
    }
    traj.end_time = t;
    if (overflowed()) {
      traj.diverged = true;
      break;
    }
  }
  traj.end_time = t;
  return traj;
}

// Finite-horizon growth-rate proxy log(|x(end)| / |x(0)|) / t_end for scalar
// plants; uses the final recorded sample, so a guard-truncated run yields
// the rate over the truncated horizon.
inline double stability_measure(const HybridTrajectory& traj) {
  if (traj.state_dim != 1)
    throw std::invalid_argument("stability_measure: scalar plants only");
  if (traj.samples() == 0) throw std::invalid_argument("stability_measure: empty trajectory");
  const double x0 = std::abs(traj.x_at(0)[0]);
  if (x0 == 0.0) throw ZeroInitial("stability_measure: x(0) = 0");
  const double xT = std::abs(traj.x_at(traj.samples() - 1)[0]);
  const double horizon = traj.end_time > 0.0 ? traj.end_time : traj.t.back();
  return std::log(xT / x0) / horizon;
}

}  // namespace eic
