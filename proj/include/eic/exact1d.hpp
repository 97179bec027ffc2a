#pragma once

// Piecewise-exact integrator for the scalar plant f(x) = a*x driven by two
// units with the sign-partitioned inputs g = ([x]+, [-x]+). Between events
// the trajectory is x(t) = x0 * e^(a tau) and the active unit's variable has
// the closed form z(tau) = |x0| * e^(-lam tau) * expm1((a+lam) tau)/(a+lam);
// each event time is found by bracketed, Newton-accelerated root finding to
// 1e-12 relative accuracy. Serves as the oracle for the RK4 hybrid
// integrator and as the fast path for the scalar stability sweep.

#include <cmath>
#include <optional>

#include "eic/hybridsim.hpp"

namespace eic {

namespace detail {

// z(tau)/|x0| for the active unit, and its derivative; stable as a+lam -> 0.
struct ScalarKernel {
  double a = 0.0;
  double lam = 0.0;

  double em1s(double tau) const {  // expm1(s*tau)/s with s = a+lam
    const double s = a + lam;
    const double st = s * tau;
    if (std::abs(st) < 1e-8) return tau * (1.0 + 0.5 * st);
    return std::expm1(st) / s;
  }
  double phi(double tau) const { return std::exp(-lam * tau) * em1s(tau); }
  double dphi(double tau) const {
    return std::exp(-lam * tau) * (1.0 + a * em1s(tau));
  }
  // Location of the maximum of phi when the drive decays (a < 0, lam > 0).
  double peak() const {
    const double s = a + lam;
    if (std::abs(s) < 1e-12 * (std::abs(a) + lam)) return -1.0 / a;
    return std::log1p(s / (-a)) / s;
  }
};

// First tau in (0, horizon] with |x0|*phi(tau) = theta, or nullopt when the
// threshold is unreachable there.
inline std::optional<double> first_crossing(double a, double lam, double x0_abs,
                                            double theta, double horizon) {
  if (!(x0_abs > 0.0) || !(horizon > 0.0)) return std::nullopt;
  const double target = theta / x0_abs;
  ScalarKernel ker{a, lam};

  if (lam == 0.0) {
    // Closed form: phi(tau) = expm1(a tau)/a.
    double tau;
    if (a == 0.0) {
      tau = target;
    } else {
      const double arg = a * target;
      if (arg <= -1.0) return std::nullopt;  // decaying drive never integrates to theta
      tau = std::log1p(arg) / a;
    }
    if (tau > horizon) return std::nullopt;
    return tau;
  }
  if (a == 0.0) {
    // phi(tau) = (1 - e^(-lam tau))/lam with asymptote 1/lam.
    const double arg = -lam * target;
    if (arg <= -1.0) return std::nullopt;
    const double tau = -std::log1p(arg) / lam;
    if (tau > horizon) return std::nullopt;
    return tau;
  }

  // phi increases up to its peak (a < 0) or forever (a > 0).
  double hi = horizon;
  if (a < 0.0) hi = std::min(hi, ker.peak());
  if (ker.phi(hi) < target) return std::nullopt;

  double lo = 0.0;
  double tau = std::min(target, 0.5 * hi);  // unit slope at zero
  for (int iter = 0; iter < 200; ++iter) {
    const double f = ker.phi(tau) - target;
    if (f >= 0.0)
      hi = tau;
    else
      lo = tau;
    if (hi - lo <= 1e-12 * hi) break;
    const double d = ker.dphi(tau);
    double cand = (d > 0.0) ? tau - f / d : -1.0;
    if (!(cand > lo && cand < hi)) cand = 0.5 * (lo + hi);
    tau = cand;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Full-trajectory variant. sample_dt > 0 adds uniform grid samples inside
// the piecewise-exact segments; with sample_dt = 0 only the initial point,
// the event-adjacent pairs and the final point are recorded.
inline HybridTrajectory exact_sim_1d(double a, double b1, double b2, double theta,
                                     double lam, double x0, double T,
                                     double sample_dt = 0.0) {
  if (!(theta > 0.0)) throw std::invalid_argument("exact_sim_1d: theta must be positive");
  if (lam < 0.0) throw std::invalid_argument("exact_sim_1d: lam must be nonnegative");

  HybridTrajectory traj;
  traj.state_dim = 1;
  traj.unit_count = 2;
  traj.unit_stats.assign(2, UnitStats{});

  detail::ScalarKernel ker{a, lam};
  double t_seg = 0.0;
  double x_seg = x0;

  auto record = [&](double t, double x, double z0, double z1, SampleKind kind) {
    traj.t.push_back(t);
    traj.kind.push_back(kind);
    traj.x.push_back(x);
    traj.z.push_back(z0);
    traj.z.push_back(z1);
    traj.xc.push_back(x + (b1 * z0 + b2 * z1) / theta);
  };

  record(0.0, x0, 0.0, 0.0, SampleKind::Grid);
  std::size_t next_grid = 1;

  auto emit_grid_until = [&](double t_end) {
    if (sample_dt <= 0.0) return;
    while (true) {
      const double tg = next_grid * sample_dt;
      if (tg > t_end || tg > T) break;
      const double tau = tg - t_seg;
      const double x = x_seg * std::exp(a * tau);
      const double zu = std::abs(x_seg) * ker.phi(tau);
      if (x_seg > 0.0)
        record(tg, x, zu, 0.0, SampleKind::Grid);
      else if (x_seg < 0.0)
        record(tg, x, 0.0, zu, SampleKind::Grid);
      else
        record(tg, 0.0, 0.0, 0.0, SampleKind::Grid);
      ++next_grid;
    }
  };

  while (t_seg < T) {
    if (x_seg == 0.0) {
      emit_grid_until(T);
      record(T, 0.0, 0.0, 0.0, SampleKind::Grid);
      traj.end_time = T;
      return traj;
    }
    const std::size_t unit = x_seg > 0.0 ? 0 : 1;
    const auto tau = detail::first_crossing(a, lam, std::abs(x_seg), theta, T - t_seg);
    if (!tau) {
      emit_grid_until(T);
      const double rem = T - t_seg;
      const double x = x_seg * std::exp(a * rem);
      const double zu = std::abs(x_seg) * ker.phi(rem);
      record(T, x, unit == 0 ? zu : 0.0, unit == 0 ? 0.0 : zu, SampleKind::Grid);
      traj.end_time = T;
      return traj;
    }
    const double t_evt = t_seg + *tau;
    emit_grid_until(t_evt);
    const double x_pre = x_seg * std::exp(a * *tau);
    record(t_evt, x_pre, unit == 0 ? theta : 0.0, unit == 0 ? 0.0 : theta,
           SampleKind::PreEvent);
    const double x_post = x_pre + (unit == 0 ? b1 : b2);
    traj.events.push_back({t_evt, unit, traj.events.size()});
    auto& st = traj.unit_stats[unit];
    if (st.count > 0) {
      const double gap = t_evt - st.last_t;
      st.min_gap = std::min(st.min_gap, gap);
      st.max_gap = std::max(st.max_gap, gap);
    }
    st.last_t = t_evt;
    ++st.count;
    record(t_evt, x_post, 0.0, 0.0, SampleKind::PostEvent);
    t_seg = t_evt;
    x_seg = x_post;
  }
  traj.end_time = T;
  return traj;
}

struct ScalarRunSummary {
  double final_x = 0.0;
  double final_t = 0.0;
  std::size_t events = 0;
  bool diverged = false;
};

// Event-to-event run without trajectory recording, truncated once |x|
// leaves the escape radius. Used for dense parameter sweeps where the
// event count in the divergent regime scales with the escape radius.
inline ScalarRunSummary exact_scalar_summary(double a, double b1, double b2,
                                             double theta, double lam, double x0,
                                             double T, double escape) {
  ScalarRunSummary out;
  double t = 0.0, x = x0;

  while (t < T) {
    if (x == 0.0) {
      t = T;
      break;
    }
    if (std::abs(x) > escape) {
      out.diverged = true;
      break;
    }
    const auto tau = detail::first_crossing(a, lam, std::abs(x), theta, T - t);
    if (!tau) {
      const double rem = T - t;
      if (a > 0.0 && std::abs(x) * std::exp(a * rem) > escape) {
        // Event-free blow-up; truncate where the envelope exits the radius.
        const double t_esc = std::log(escape / std::abs(x)) / a;
        t += t_esc;
        x = (x > 0.0 ? escape : -escape);
        out.diverged = true;
      } else {
        x *= std::exp(a * rem);
        t = T;
      }
      break;
    }
    t += *tau;
    x = x * std::exp(a * *tau) + (x > 0.0 ? b1 : b2);
    ++out.events;
  }
  out.final_x = x;
  out.final_t = t;
  return out;
}

}  // namespace eic
