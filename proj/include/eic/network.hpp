#pragma once

// Connected-units support: the strictly positive null weight of the input
// matrix, a-priori bounds on the neuronal variables, runtime monitors that
// scan recorded trajectories against those bounds, and the resulting
// disturbance-ball ultimate bound for the connected closed loop.

#include <cmath>
#include <limits>

#include "eic/bounds.hpp"
#include "eic/hybridsim.hpp"
#include "eic/linalg.hpp"
#include "eic/model.hpp"

namespace eic {

struct SteeringFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnsupportedLeak : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NullWeight {
  Vec w;                 // strictly positive, entries >= 1
  double residual = 0.0; // ||B w||
};

// w = sum_i (e_i + q_i) with q_i >= 0 solving B q_i = -B_i. Every entry is
// at least one and B w = 0 up to the solver residual; the construction is
// deterministic, which pins down the otherwise non-unique weight.
inline NullWeight compute_null_weight(const Mat& B) {
  const std::size_t n = B.cols;
  for (double thr : connected_thresholds(B))
    if (!(thr > 0.0))
      throw SteeringFailed("compute_null_weight: zero column (threshold B_i'B_i = 0)");
  NullWeight out;
  out.w.assign(n, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    Vec target(B.rows);
    for (std::size_t i = 0; i < B.rows; ++i) target[i] = -B(i, j);
    Vec q;
    try {
      q = nnls(B, target);
    } catch (const Infeasible&) {
      throw SteeringFailed("compute_null_weight: steering condition fails at column " +
                           std::to_string(j));
    }
    for (std::size_t i = 0; i < n; ++i) out.w[i] += q[i];
  }
  out.residual = norm(B * out.w);
  if (out.residual > 1e-9 * std::max(1.0, spectral_norm(B)))
    throw SteeringFailed("compute_null_weight: residual above tolerance");
  return out;
}

struct ZBounds {
  enum class Regime { EqualLeak, SpreadLeak };
  Regime regime = Regime::EqualLeak;
  Vec lower;
  Vec upper;          // diag(B^T B)
  double gamma = 0.0; // 1 - lam_max/lam_min, negative in the spread regime
  double wz_lower = 0.0;  // bound on w^T z
  double wz_upper = 0.0;
};

// Elementwise bounds on the neuronal variables of a connected controller.
// Equal leaks keep w^T z pinned at zero; spread leaks relax it to the gamma
// band. A leak spread that includes a zero constant is not covered by
// either regime.
inline ZBounds z_bounds(const Mat& B, const Vec& lams, const NullWeight& nw) {
  const std::size_t n = B.cols;
  if (lams.size() != n || nw.w.size() != n)
    throw std::invalid_argument("z_bounds: dimension mismatch");
  const Vec d = connected_thresholds(B);
  double lam_min = lams[0], lam_max = lams[0];
  for (double l : lams) {
    lam_min = std::min(lam_min, l);
    lam_max = std::max(lam_max, l);
  }
  const bool equal = (lam_max - lam_min) <= 1e-12 * std::max(1.0, lam_max);

  ZBounds out;
  out.upper = d;
  out.lower.assign(n, 0.0);
  double wd = 0.0;
  for (std::size_t i = 0; i < n; ++i) wd += nw.w[i] * d[i];

  if (equal) {
    out.regime = ZBounds::Regime::EqualLeak;
    out.gamma = 0.0;
    out.wz_lower = 0.0;
    out.wz_upper = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) acc += nw.w[j] * d[j];
      out.lower[i] = -acc / nw.w[i];
    }
    return out;
  }
  if (!(lam_min > 0.0))
    throw UnsupportedLeak("z_bounds: leak spread with a zero constant is not covered");
  out.regime = ZBounds::Regime::SpreadLeak;
  out.gamma = 1.0 - lam_max / lam_min;
  out.wz_lower = out.gamma * wd;
  out.wz_upper = wd;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) acc += nw.w[j] * d[j];
    out.lower[i] = out.gamma * wd / nw.w[i] - acc / nw.w[i];
  }
  return out;
}

struct MonitorReport {
  double max_abs_wz = 0.0;        // sup |w^T z| over samples
  double wz_low = 0.0;            // observed extremes of w^T z
  double wz_high = 0.0;
  double max_upper_violation = 0.0;  // sup (z_i - upper_i)
  double max_lower_violation = 0.0;  // sup (lower_i - z_i)
  double max_d1 = 0.0;            // sup ||(B B^T)^-1 B z||
  double max_d2 = 0.0;            // sup ||(B B^T)^-1 B Lam z||
  double d1_bound = 0.0;          // box bounds implied by ZBounds
  double d2_bound = 0.0;
};

// Scans a recorded connected-topology trajectory against the a-priori
// bounds and reports worst-case margins.
inline MonitorReport monitor_connected(const HybridTrajectory& traj,
                                       const ControllerSpec& ctrl, const NullWeight& nw,
                                       const ZBounds& zb) {
  if (!ctrl.connected())
    throw std::invalid_argument("monitor_connected: connected topology required");
  const std::size_t n = traj.unit_count;
  const Mat R = auxiliary_map(ctrl);
  Mat RL = R;
  const Vec& lams = ctrl.lambdas();
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < R.rows; ++i) RL(i, j) *= lams[j];

  MonitorReport rep;
  rep.d1_bound = box_sup_norm(R, zb.lower, zb.upper);
  rep.d2_bound = box_sup_norm(RL, zb.lower, zb.upper);
  rep.wz_low = std::numeric_limits<double>::infinity();
  rep.wz_high = -std::numeric_limits<double>::infinity();

  for (std::size_t s = 0; s < traj.samples(); ++s) {
    auto z = traj.z_at(s);
    double wz = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      wz += nw.w[i] * z[i];
      rep.max_upper_violation = std::max(rep.max_upper_violation, z[i] - zb.upper[i]);
      rep.max_lower_violation = std::max(rep.max_lower_violation, zb.lower[i] - z[i]);
    }
    rep.max_abs_wz = std::max(rep.max_abs_wz, std::abs(wz));
    rep.wz_low = std::min(rep.wz_low, wz);
    rep.wz_high = std::max(rep.wz_high, wz);
    double n1 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < R.rows; ++i) {
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        s1 += R(i, j) * z[j];
        s2 += RL(i, j) * z[j];
      }
      n1 += s1 * s1;
      n2 += s2 * s2;
    }
    rep.max_d1 = std::max(rep.max_d1, std::sqrt(n1));
    rep.max_d2 = std::max(rep.max_d2, std::sqrt(n2));
  }
  return rep;
}

// Ultimate bound for the connected closed loop: the auxiliary variable obeys
// xc' = (A - Kg) xc + E z with E = -((A - Kg) R + R Lam) and z confined to
// the ZBounds box, so the quadratic certificate yields
//   ||x|| <= sqrt(kappa(P)) ||x0|| e^(-t/(4 lam_min(P))) + sup||R z|| + 2 sup||P E z||.
inline BoundReport connected_bound(const Mat& A, const ControllerSpec& ctrl,
                                   const ZBounds& zb) {
  if (!ctrl.connected())
    throw std::invalid_argument("connected_bound: connected topology required");
  const auto& con = std::get<ConnectedController>(ctrl.topology);
  BoundReport r;
  r.id = "quadratic_connected";
  const Mat M = A - con.gain;
  Mat P;
  try {
    P = solve_lyapunov(M, Mat::identity(A.rows));
  } catch (const NotHurwitz& e) {
    r.reason = std::string("closed-loop matrix not Hurwitz (") + e.what() + ")";
    return r;
  }
  const Mat R = auxiliary_map(ctrl);
  Mat RL = R;
  for (std::size_t j = 0; j < R.cols; ++j)
    for (std::size_t i = 0; i < R.rows; ++i) RL(i, j) *= con.lambdas[j];
  const Mat E = M * R + RL;
  const Vec ev = sym_eig(P);
  const double d1 = box_sup_norm(R, zb.lower, zb.upper);
  const double pe = box_sup_norm(P * E, zb.lower, zb.upper);
  r.applicable = true;
  r.reason = "closed-loop matrix is Hurwitz";
  r.prefactor = std::sqrt(ev.back() / ev.front());
  r.decay_rate = -1.0 / (4.0 * ev.front());
  r.ultimate_bound = d1 + 2.0 * pe;
  r.aux["lambda_min_P"] = ev.front();
  r.aux["kappa_P"] = ev.back() / ev.front();
  r.aux["d1_box"] = d1;
  r.aux["PE_box"] = pe;
  return r;
}

}  // namespace eic
