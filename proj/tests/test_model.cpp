#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "eic/model.hpp"
#include "test_helpers.hpp"

using namespace eic;
using namespace eic::testing;

TEST_CASE("validate accepts the scalar pair configuration") {
  auto rep = validate(scalar_plant(1.0), scalar_pair_controller(1.0 / 2.5, 3.0));
  CAPTURE(rep.violations);
  CHECK(rep.ok());
}

TEST_CASE("validate rejects a zero threshold") {
  auto ctrl = scalar_pair_controller(0.4, 0.0);
  std::get<IndependentController>(ctrl.topology).thetas[0] = 0.0;
  auto rep = validate(scalar_plant(1.0), ctrl);
  REQUIRE_FALSE(rep.ok());
  bool found = false;
  for (const auto& v : rep.violations)
    if (v.find("threshold must be positive") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("validate rejects a connected controller that cannot steer") {
  ConnectedController c;
  c.B = Mat::identity(2);  // conic hull is only the first quadrant
  c.lambdas = {0.2, 0.2};
  c.gain = Mat::identity(2);
  PlantSpec plant;
  plant.dim = 2;
  plant.drift = LinearDrift{Mat::identity(2)};
  auto rep = validate(plant, ControllerSpec{c});
  REQUIRE_FALSE(rep.ok());
  bool found = false;
  for (const auto& v : rep.violations)
    if (v.find("steering condition fails") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("validate rejects dimension mismatches") {
  auto rep = validate(scalar_plant(1.0), axis_pair_controller(0.4, 0.0));
  CHECK_FALSE(rep.ok());
}

TEST_CASE("registered drifts vanish at the origin") {
  for (const auto& plant :
       {scalar_plant(1.3), rotation_plant(1.0, 3.0), cubic_plant(1.0, 0.1)}) {
    DriftFn f = make_drift(plant);
    Vec zero(plant.dim, 0.0), out;
    f(zero, out);
    for (double v : out) CHECK(v == 0.0);
  }
}

TEST_CASE("cubic drift damps large states") {
  DriftFn f = make_drift(cubic_plant(1.0, 0.1));
  Vec out;
  f(Vec{10.0}, out);
  CHECK(out[0] == Catch::Approx(10.0 - 0.1 * 1000.0));
}

TEST_CASE("linear_matrix recovers the plant matrix when one exists") {
  auto A = linear_matrix(rotation_plant(1.0, 0.5));
  REQUIRE(A.has_value());
  CHECK((*A)(0, 0) == 1.0);
  CHECK((*A)(0, 1) == 0.5);
  CHECK((*A)(1, 0) == -0.5);
  CHECK(!linear_matrix(cubic_plant(1.0, 0.1)).has_value());
}

TEST_CASE("rectified input functions are nonnegative everywhere") {
  auto ctrl = axis_pair_controller(1.0 / 1.5, 0.2);
  const auto& g = std::get<IndependentController>(ctrl.topology).input;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-50.0, 50.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vec x{dist(rng), dist(rng)};
    for (double v : g.eval(x)) CHECK(v >= 0.0);
  }
  CHECK(max_abs(g.eval(Vec{0.0, 0.0})) == 0.0);
}

TEST_CASE("derive_linear_gain on the scalar pair") {
  auto ctrl = scalar_pair_controller(0.4, 0.0);
  auto gain = derive_linear_gain(std::get<IndependentController>(ctrl.topology));
  REQUIRE(gain.has_value());
  CHECK((*gain)(0, 0) == Catch::Approx(2.5).margin(1e-12));
}

TEST_CASE("derive_linear_gain on the per-axis pairs") {
  auto ctrl = axis_pair_controller(1.0 / 1.5, 0.2);
  auto gain = derive_linear_gain(std::get<IndependentController>(ctrl.topology));
  REQUIRE(gain.has_value());
  CHECK(spectral_norm(*gain - 1.5 * Mat::identity(2)) < 1e-12);
}

TEST_CASE("derive_linear_gain refuses a one-sided impulse pair") {
  IndependentController c;
  c.B = Mat(1, 2, {1.0, 1.0});  // both impulses push the same way: |x|/theta
  c.thetas = {0.4, 0.4};
  c.lambdas = {0.0, 0.0};
  c.input = InputFn::rectified(Mat(2, 1, {1.0, -1.0}), {1.0, 1.0});
  CHECK(!derive_linear_gain(c).has_value());
}

TEST_CASE("derived gain reproduces the analogue input on random probes") {
  auto ctrl = axis_pair_controller(1.0 / 1.5, 0.2);
  const auto& ind = std::get<IndependentController>(ctrl.topology);
  auto gain = derive_linear_gain(ind);
  REQUIRE(gain.has_value());
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-20.0, 20.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vec x{dist(rng), dist(rng)};
    Vec g = ind.input.eval(x);
    Vec kx(2, 0.0);
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t i = 0; i < 2; ++i) kx[i] += ind.B(i, j) * g[j] / ind.thetas[j];
    Vec lin = (*gain) * x;
    for (std::size_t i = 0; i < 2; ++i)
      CHECK(std::abs(kx[i] + lin[i]) <= 1e-10 * (1.0 + norm(x)));
  }
}

TEST_CASE("analogue_gain returns the stored gain for connected controllers") {
  auto ctrl = connected_axis_controller(Vec(4, 0.2), 1.5);
  auto gain = analogue_gain(ctrl);
  REQUIRE(gain.has_value());
  CHECK(spectral_norm(*gain - 1.5 * Mat::identity(2)) == 0.0);
}

TEST_CASE("connected thresholds are the squared column norms") {
  Vec thr = connected_thresholds(axis_pair_B());
  for (double v : thr) CHECK(v == 1.0);
}

TEST_CASE("custom input functions resolve through the registry") {
  register_input_fn("halfwave", 1, [](const Vec& x) { return Vec{std::max(0.0, x[0])}; });
  InputFn g = InputFn::custom("halfwave");
  CHECK(g.units() == 1);
  CHECK(g.eval(Vec{2.0})[0] == 2.0);
  CHECK(g.eval(Vec{-2.0})[0] == 0.0);
  CHECK_THROWS_AS(InputFn::custom("missing").eval(Vec{0.0}), std::invalid_argument);
}
