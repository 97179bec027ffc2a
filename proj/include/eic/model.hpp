#pragma once

// Declarative plant / controller / input-function specifications and the
// structural validation that must pass before simulation or bound
// computation. Controllers come in two topologies: independent units with
// explicit thresholds, and connected units whose thresholds are the squared
// column norms of the input matrix.

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>

#include "eic/linalg.hpp"

namespace eic {

using DriftFn = std::function<void(const Vec&, Vec&)>;

struct LinearDrift {
  Mat A;
};

struct RegisteredDrift {
  std::string name;
  Vec params;
};

struct PlantSpec {
  std::size_t dim = 1;
  std::variant<LinearDrift, RegisteredDrift> drift = LinearDrift{Mat(1, 1)};
};

namespace detail {

struct DriftEntry {
  // factory(params, dim) -> drift function; throws invalid_argument on bad params
  std::function<DriftFn(const Vec&, std::size_t)> make;
};

inline std::map<std::string, DriftEntry>& drift_registry() {
  static std::map<std::string, DriftEntry> reg = [] {
    std::map<std::string, DriftEntry> r;
    r["linear"] = {[](const Vec& p, std::size_t k) -> DriftFn {
      if (p.size() != k * k)
        throw std::invalid_argument("linear drift needs dim*dim params (row-major)");
      Mat A(k, k, p);
      return [A](const Vec& x, Vec& dx) {
        dx.resize(A.rows);
        for (std::size_t i = 0; i < A.rows; ++i) {
          double s = 0.0;
          for (std::size_t j = 0; j < A.cols; ++j) s += A(i, j) * x[j];
          dx[i] = s;
        }
      };
    }};
    r["rotation_scaling"] = {[](const Vec& p, std::size_t k) -> DriftFn {
      if (k != 2 || p.size() != 2)
        throw std::invalid_argument("rotation_scaling drift needs dim 2 and params {a, omega}");
      const double a = p[0], w = p[1];
      return [a, w](const Vec& x, Vec& dx) {
        dx.resize(2);
        dx[0] = a * x[0] + w * x[1];
        dx[1] = -w * x[0] + a * x[1];
      };
    }};
    r["cubic_damped"] = {[](const Vec& p, std::size_t) -> DriftFn {
      if (p.size() != 2 || p[1] <= 0.0)
        throw std::invalid_argument("cubic_damped drift needs params {a, c} with c > 0");
      const double a = p[0], c = p[1];
      return [a, c](const Vec& x, Vec& dx) {
        dx.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) dx[i] = a * x[i] - c * x[i] * x[i] * x[i];
      };
    }};
    return r;
  }();
  return reg;
}

}  // namespace detail

inline DriftFn make_drift(const PlantSpec& plant) {
  if (const auto* lin = std::get_if<LinearDrift>(&plant.drift)) {
    const Mat A = lin->A;
    return [A](const Vec& x, Vec& dx) {
      dx.resize(A.rows);
      for (std::size_t i = 0; i < A.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < A.cols; ++j) s += A(i, j) * x[j];
        dx[i] = s;
      }
    };
  }
  const auto& reg = std::get<RegisteredDrift>(plant.drift);
  auto it = detail::drift_registry().find(reg.name);
  if (it == detail::drift_registry().end())
    throw std::invalid_argument("unknown drift: " + reg.name);
  return it->second.make(reg.params, plant.dim);
}

// The plant matrix when the drift is linear; nullopt for genuinely
// nonlinear drifts.
inline std::optional<Mat> linear_matrix(const PlantSpec& plant) {
  if (const auto* lin = std::get_if<LinearDrift>(&plant.drift)) return lin->A;
  const auto& reg = std::get<RegisteredDrift>(plant.drift);
  if (reg.name == "linear" && reg.params.size() == plant.dim * plant.dim)
    return Mat(plant.dim, plant.dim, reg.params);
  if (reg.name == "rotation_scaling" && reg.params.size() == 2 && plant.dim == 2)
    return Mat(2, 2, {reg.params[0], reg.params[1], -reg.params[1], reg.params[0]});
  return std::nullopt;
}

// Input function g : R^K -> R^N_{>=0}. The rectified-projection family
// g_i(x) = c_i * max(0, V_i . x) is nonnegative by construction; custom
// functions are resolved by name from a registry.
struct InputFn {
  enum class Kind { RectifiedProjection, Custom };
  Kind kind = Kind::RectifiedProjection;
  Mat directions;  // N x K, one row per unit
  Vec scales;      // length N, nonnegative
  std::string name;

  static InputFn rectified(Mat dirs, Vec c) {
    InputFn g;
    g.kind = Kind::RectifiedProjection;
    g.directions = std::move(dirs);
    g.scales = std::move(c);
    return g;
  }
  static InputFn custom(std::string n) {
    InputFn g;
    g.kind = Kind::Custom;
    g.name = std::move(n);
    return g;
  }

  std::size_t units() const;
  void eval(const Vec& x, Vec& out) const;
  Vec eval(const Vec& x) const {
    Vec out;
    eval(x, out);
    return out;
  }
};

namespace detail {

struct CustomInput {
  std::size_t units = 0;
  std::function<Vec(const Vec&)> fn;
};

inline std::map<std::string, CustomInput>& input_registry() {
  static std::map<std::string, CustomInput> reg;
  return reg;
}

}  // namespace detail

inline void register_input_fn(const std::string& name, std::size_t units,
                              std::function<Vec(const Vec&)> fn) {
  detail::input_registry()[name] = {units, std::move(fn)};
}

inline std::size_t InputFn::units() const {
  if (kind == Kind::RectifiedProjection) return directions.rows;
  auto it = detail::input_registry().find(name);
  if (it == detail::input_registry().end())
    throw std::invalid_argument("unknown input function: " + name);
  return it->second.units;
}

inline void InputFn::eval(const Vec& x, Vec& out) const {
  if (kind == Kind::RectifiedProjection) {
    out.resize(directions.rows);
    for (std::size_t i = 0; i < directions.rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < directions.cols; ++j) s += directions(i, j) * x[j];
      out[i] = scales[i] * std::max(0.0, s);
    }
    return;
  }
  auto it = detail::input_registry().find(name);
  if (it == detail::input_registry().end())
    throw std::invalid_argument("unknown input function: " + name);
  out = it->second.fn(x);
}

struct IndependentController {
  Mat B;        // K x N
  Vec thetas;   // length N, positive
  Vec lambdas;  // length N, nonnegative
  InputFn input;
};

struct ConnectedController {
  Mat B;        // K x N
  Vec lambdas;  // length N
  Mat gain;     // K x K, analogue control k(x) = -gain * x
};

struct ControllerSpec {
  std::variant<IndependentController, ConnectedController> topology;

  bool connected() const { return std::holds_alternative<ConnectedController>(topology); }
  const Mat& B() const {
    return connected() ? std::get<ConnectedController>(topology).B
                       : std::get<IndependentController>(topology).B;
  }
  const Vec& lambdas() const {
    return connected() ? std::get<ConnectedController>(topology).lambdas
                       : std::get<IndependentController>(topology).lambdas;
  }
  std::size_t units() const { return B().cols; }
  std::size_t state_dim() const { return B().rows; }
};

// Connected-topology thresholds are the squared column norms of B.
inline Vec connected_thresholds(const Mat& B) {
  Vec thr(B.cols, 0.0);
  for (std::size_t j = 0; j < B.cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < B.rows; ++i) s += B(i, j) * B(i, j);
    thr[j] = s;
  }
  return thr;
}

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

inline ValidationReport validate(const PlantSpec& plant, const ControllerSpec& ctrl) {
  ValidationReport rep;
  auto flag = [&rep](const std::string& msg) { rep.violations.push_back(msg); };

  if (plant.dim == 0) flag("plant dimension must be at least 1");

  DriftFn f;
  bool have_drift = true;
  try {
    f = make_drift(plant);
  } catch (const std::exception& e) {
    flag(std::string("drift: ") + e.what());
    have_drift = false;
  }
  if (have_drift) {
    Vec zero(plant.dim, 0.0), out;
    f(zero, out);
    for (double v : out)
      if (v != 0.0) {
        flag("drift must vanish at the origin");
        break;
      }
  }

  const Mat& B = ctrl.B();
  if (B.rows != plant.dim) flag("input matrix row count must equal plant dimension");
  const std::size_t n = B.cols;
  if (n == 0) flag("controller needs at least one unit");
  for (double v : B.a)
    if (!std::isfinite(v)) {
      flag("input matrix entries must be finite");
      break;
    }

  if (const auto* ind = std::get_if<IndependentController>(&ctrl.topology)) {
    if (ind->thetas.size() != n) flag("threshold count must equal unit count");
    if (ind->lambdas.size() != n) flag("leak count must equal unit count");
    for (double th : ind->thetas)
      if (!(th > 0.0)) {
        flag("threshold must be positive");
        break;
      }
    for (double lam : ind->lambdas)
      if (lam < 0.0) {
        flag("leak constant must be nonnegative");
        break;
      }
    if (ind->input.kind == InputFn::Kind::RectifiedProjection) {
      if (ind->input.directions.rows != n)
        flag("input function must have one direction per unit");
      if (ind->input.directions.cols != plant.dim)
        flag("input directions must match plant dimension");
      if (ind->input.scales.size() != ind->input.directions.rows)
        flag("input scale count must match direction count");
      for (double c : ind->input.scales)
        if (c < 0.0) {
          flag("input scales must be nonnegative (g >= 0)");
          break;
        }
    } else {
      try {
        if (ind->input.units() != n) flag("custom input unit count mismatch");
      } catch (const std::exception& e) {
        flag(e.what());
      }
    }
  } else {
    const auto& con = std::get<ConnectedController>(ctrl.topology);
    if (con.lambdas.size() != n) flag("leak count must equal unit count");
    for (double lam : con.lambdas)
      if (lam < 0.0) {
        flag("leak constant must be nonnegative");
        break;
      }
    if (con.gain.rows != plant.dim || con.gain.cols != plant.dim)
      flag("analogue gain must be K x K");
    const Vec thr = connected_thresholds(B);
    for (double v : thr)
      if (!(v > 0.0)) {
        flag("every input-matrix column must be nonzero (threshold B_i'B_i > 0)");
        break;
      }
    // Steering condition: every -B_i must lie in the conic hull of the
    // columns, otherwise the impulses cannot push in all directions.
    if (B.rows == plant.dim) {
      for (std::size_t j = 0; j < n; ++j) {
        Vec target(B.rows);
        for (std::size_t i = 0; i < B.rows; ++i) target[i] = -B(i, j);
        try {
          nnls(B, target);
        } catch (const Infeasible&) {
          std::ostringstream msg;
          msg << "steering condition fails: -column " << j
              << " is outside the conic hull of the input matrix";
          flag(msg.str());
          break;
        }
      }
    }
  }
  return rep;
}

// Analogue gain of an independent controller: K_g with B Theta^-1 g(x)
// = -K_g x, when that map is actually linear. The candidate comes from
// probing the unit vectors; 100 random probes then confirm linearity.
// Returns nullopt when the rectified pairs do not cancel.
inline std::optional<Mat> derive_linear_gain(const IndependentController& ctrl) {
  if (ctrl.input.kind != InputFn::Kind::RectifiedProjection) return std::nullopt;
  const std::size_t k = ctrl.B.rows;
  const std::size_t n = ctrl.B.cols;

  auto k_of = [&](const Vec& x) {
    Vec g = ctrl.input.eval(x);
    Vec out(k, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double w = g[j] / ctrl.thetas[j];
      for (std::size_t i = 0; i < k; ++i) out[i] += ctrl.B(i, j) * w;
    }
    return out;
  };

  Mat gain(k, k);
  for (std::size_t j = 0; j < k; ++j) {
    Vec e(k, 0.0);
    e[j] = 1.0;
    Vec kj = k_of(e);
    for (std::size_t i = 0; i < k; ++i) gain(i, j) = -kj[i];
  }

  std::mt19937_64 rng(0x11f5eed);
  std::uniform_real_distribution<double> dist(-10.0, 10.0);
  for (int probe = 0; probe < 100; ++probe) {
    Vec x(k);
    for (double& v : x) v = dist(rng);
    Vec kx = k_of(x);
    Vec lin = gain * x;
    double err = 0.0;
    for (std::size_t i = 0; i < k; ++i) err = std::max(err, std::abs(kx[i] + lin[i]));
    if (err > 1e-10 * (1.0 + norm(x))) return std::nullopt;
  }
  return gain;
}

// Gain of the corresponding analogue controller for either topology.
inline std::optional<Mat> analogue_gain(const ControllerSpec& ctrl) {
  if (const auto* con = std::get_if<ConnectedController>(&ctrl.topology)) return con->gain;
  return derive_linear_gain(std::get<IndependentController>(ctrl.topology));
}

}  // namespace eic
