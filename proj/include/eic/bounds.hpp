#pragma once

// Certified decay envelopes and ultimate bounds for the closed loop, with
// applicability checks, plus per-unit inter-event-time bounds. Every report
// carries the envelope parameters D, alpha, C so that
//   ||x(t)|| <= D * ||x(0)|| * e^(alpha t) + C
// can be evaluated against simulated trajectories. Inapplicability is data,
// not an error: parameter sweeps evaluate the calculators across regimes
// where the hypotheses fail.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>

#include "eic/linalg.hpp"
#include "eic/model.hpp"

namespace eic {

struct NoEventsEver : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BoundReport {
  std::string id;
  bool applicable = false;
  std::string reason;
  double prefactor = 0.0;       // D
  double decay_rate = 0.0;      // alpha, negative when applicable
  double ultimate_bound = 0.0;  // C
  std::map<std::string, double> aux;
};

inline double envelope_value(const BoundReport& r, double x0_norm, double t) {
  return r.prefactor * x0_norm * std::exp(r.decay_rate * t) + r.ultimate_bound;
}

// Scalar plant f(x) = a x, two units with common threshold/leak and linear
// analogue gain b: decay (a-b)/2, ultimate bound scaled by the leak
// mismatch |a-b+lam| / |a-b|.
inline BoundReport scalar_bound(double a, double b, double lam, const Mat& B) {
  if (B.rows != 1 || B.cols != 2)
    throw std::invalid_argument("scalar_bound: B must be 1x2");
  BoundReport r;
  r.id = "scalar";
  const double d = a - b + lam;
  r.aux["d"] = d;
  if (!(b > a)) {
    r.reason = "requires analogue gain b > a";
    return r;
  }
  r.applicable = true;
  r.reason = "b > a";
  r.prefactor = 1.0;
  r.decay_rate = 0.5 * (a - b);
  r.ultimate_bound = cube_norm(B) * (1.0 + std::abs(d) / std::abs(a - b));
  return r;
}

// Same setting under b >= a + lam: the ultimate bound simplifies to twice
// the cube norm.
inline BoundReport scalar_bound_simplified(double a, double b, double lam, const Mat& B) {
  if (B.rows != 1 || B.cols != 2)
    throw std::invalid_argument("scalar_bound_simplified: B must be 1x2");
  BoundReport r;
  r.id = "scalar_simplified";
  if (!(b > a)) {
    r.reason = "requires analogue gain b > a";
    return r;
  }
  // The condition is meant to hold on its boundary (b = a + lam); a relative
  // epsilon keeps a gain recovered as 1/theta from tipping the wrong way.
  if (b - (a + lam) < -1e-9 * std::max(1.0, std::abs(a) + std::abs(b) + lam)) {
    r.reason = "requires b >= a + lam";
    return r;
  }
  r.applicable = true;
  r.reason = "b >= a + lam";
  r.prefactor = 1.0;
  r.decay_rate = 0.5 * (a - b);
  r.ultimate_bound = 2.0 * cube_norm(B);
  return r;
}

// True when unit 0 only sees positive states and unit 1 only negative ones;
// checked structurally on the rectified projections.
inline bool sign_partitioned(const InputFn& g) {
  if (g.kind != InputFn::Kind::RectifiedProjection) return false;
  if (g.directions.rows != 2 || g.directions.cols != 1) return false;
  if (g.scales.size() != 2 || g.scales[0] < 0.0 || g.scales[1] < 0.0) return false;
  return g.directions(0, 0) >= 0.0 && g.directions(1, 0) <= 0.0;
}

// Sign-partitioned inputs double the decay rate and drop the ultimate bound
// to a single cube norm.
inline BoundReport scalar_bound_tight(double a, double b, double lam, const Mat& B,
                                      const InputFn& g) {
  if (B.rows != 1 || B.cols != 2)
    throw std::invalid_argument("scalar_bound_tight: B must be 1x2");
  BoundReport r;
  r.id = "scalar_tight";
  if (!(b > a)) {
    r.reason = "requires analogue gain b > a";
    return r;
  }
  if (b - (a + lam) < -1e-9 * std::max(1.0, std::abs(a) + std::abs(b) + lam)) {
    r.reason = "requires b >= a + lam";
    return r;
  }
  if (!sign_partitioned(g)) {
    r.reason = "requires a sign-partitioned input pair";
    return r;
  }
  r.applicable = true;
  r.reason = "b >= a + lam and sign-partitioned input";
  r.prefactor = 1.0;
  r.decay_rate = a - b;
  r.ultimate_bound = cube_norm(B);
  return r;
}

// Multidimensional linear plant under a linear analogue gain: quadratic
// certificate from the Lyapunov equation with Q = I.
inline BoundReport quadratic_bound(const Mat& A, const Mat& Kg, const Mat& B,
                                   const Vec& lambdas) {
  const std::size_t k = A.rows;
  if (A.cols != k || Kg.rows != k || Kg.cols != k || B.rows != k)
    throw std::invalid_argument("quadratic_bound: dimension mismatch");
  if (lambdas.size() != B.cols)
    throw std::invalid_argument("quadratic_bound: one leak constant per unit");
  BoundReport r;
  r.id = "quadratic";
  const Mat M = A - Kg;
  Mat P;
  try {
    P = solve_lyapunov(M, Mat::identity(k));
  } catch (const NotHurwitz& e) {
    r.reason = std::string("closed-loop matrix not Hurwitz (") + e.what() + ")";
    return r;
  }
  const Vec ev = sym_eig(P);
  const double lmin = ev.front();
  const double lmax = ev.back();
  const Mat E = P * (M * B + B * Mat::diag(lambdas));
  const double cube_B = cube_norm(B);
  const double cube_PE = cube_norm(E);
  r.applicable = true;
  r.reason = "closed-loop matrix is Hurwitz";
  r.prefactor = std::sqrt(lmax / lmin);
  r.decay_rate = -1.0 / (4.0 * lmin);
  r.ultimate_bound = cube_B + 2.0 * cube_PE;
  r.aux["lambda_min_P"] = lmin;
  r.aux["lambda_max_P"] = lmax;
  r.aux["kappa_P"] = lmax / lmin;
  r.aux["cube_B"] = cube_B;
  r.aux["cube_PE"] = cube_PE;
  return r;
}

// Equal-leak refinement: the ultimate bound grows only with the rotation
// content S of the closed loop in the metric of P.
inline BoundReport quadratic_bound_equal_leak(const Mat& A, const Mat& Kg, const Mat& B,
                                              double lam) {
  BoundReport r = quadratic_bound(A, Kg, B, Vec(B.cols, lam));
  r.id = "quadratic_equal_leak";
  if (!r.applicable) return r;

  const std::size_t k = A.rows;
  const Mat M = A - Kg;
  const Mat P = solve_lyapunov(M, Mat::identity(k));
  if (lam > 0.0) {
    // Need (1/(2 lam)) I - P positive semidefinite.
    const Mat gap = (1.0 / (2.0 * lam)) * Mat::identity(k) - P;
    if (sym_eig(gap).front() < -1e-12) {
      r.applicable = false;
      r.reason = "leak too strong: (1/(2 lam)) I - P is not PSD";
      return r;
    }
  }
  const Mat S = 0.5 * (P * M - M.transposed() * P);
  const double ns = spectral_norm(S);
  r.reason = lam > 0.0 ? "Hurwitz and (1/(2 lam)) I - P is PSD" : "Hurwitz, zero leak";
  r.ultimate_bound = 2.0 * (1.0 + ns) * cube_norm(B);
  r.aux["norm_S"] = ns;
  return r;
}

struct InterEventBounds {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
};

// Per-unit inter-event gap bounds from a drive envelope g_- <= g_i <= g_+.
// The logarithmic forms fall back to their lam -> 0 limits analytically to
// avoid cancellation; an infinite upper bound means the leak can starve the
// unit when the drive sits at its floor.
inline InterEventBounds inter_event_bounds(double theta, double lam, double g_minus,
                                           double g_plus) {
  if (!(theta > 0.0)) throw std::invalid_argument("inter_event_bounds: theta must be positive");
  if (lam < 0.0 || g_minus < 0.0 || g_plus < g_minus)
    throw std::invalid_argument("inter_event_bounds: need 0 <= g_minus <= g_plus");
  const double inf = std::numeric_limits<double>::infinity();
  if (g_plus <= 0.0 || (lam > 0.0 && lam >= g_plus / theta))
    throw NoEventsEver("inter_event_bounds: drive ceiling cannot reach the threshold");

  InterEventBounds out;
  if (lam < 1e-12) {
    out.lower = theta / g_plus;
    out.upper = g_minus > 0.0 ? theta / g_minus : inf;
    return out;
  }
  out.lower = -std::log1p(-theta * lam / g_plus) / lam;
  if (g_minus <= 0.0 || lam >= g_minus / theta)
    out.upper = inf;
  else
    out.upper = -std::log1p(-theta * lam / g_minus) / lam;
  return out;
}

// Global minimum inter-event time from a certified trajectory bound C and a
// drive envelope g_i(x) <= alpha(||x||); infinite when no unit can ever fire.
inline double min_inter_event_global(const Vec& thetas, const Vec& lams,
                                     const std::function<double(double)>& alpha,
                                     double C) {
  if (thetas.empty() || lams.size() != thetas.size())
    throw std::invalid_argument("min_inter_event_global: dimension mismatch");
  const double inf = std::numeric_limits<double>::infinity();
  double theta_min = thetas[0], lam_min = lams[0];
  for (double th : thetas) theta_min = std::min(theta_min, th);
  for (double lm : lams) lam_min = std::min(lam_min, lm);
  const double ceiling = alpha(C);
  if (!(ceiling > 0.0)) return inf;  // g(0) = 0: no events from the origin
  if (lam_min < 1e-12) return theta_min / ceiling;
  if (lam_min >= ceiling / theta_min) return inf;
  return -std::log1p(-theta_min * lam_min / ceiling) / lam_min;
}

// Linear drive envelope alpha(r) = (max_i c_i ||V_i||) r for rectified
// projections.
inline std::function<double(double)> rectified_drive_envelope(const InputFn& g) {
  if (g.kind != InputFn::Kind::RectifiedProjection)
    throw std::invalid_argument("rectified_drive_envelope: rectified projections only");
  double gain = 0.0;
  for (std::size_t i = 0; i < g.directions.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < g.directions.cols; ++j)
      s += g.directions(i, j) * g.directions(i, j);
    gain = std::max(gain, g.scales[i] * std::sqrt(s));
  }
  return [gain](double r) { return gain * r; };
}

}  // namespace eic
