#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "eic/network.hpp"
#include "test_helpers.hpp"

using namespace eic;
using namespace eic::testing;

namespace {

HybridTrajectory run_connected(double omega, const Vec& lams, double T = 10.0,
                               double dt = 1e-3) {
  auto ctrl = connected_axis_controller(lams, 1.5);
  return simulate(rotation_plant(1.0, omega), ctrl, Vec{4.0, 0.0},
                  SimParams{T, dt, 1e-9});
}

}  // namespace

TEST_CASE("null weight of the +/- pair") {
  auto nw = compute_null_weight(Mat(1, 2, {-1.0, 1.0}));
  REQUIRE(nw.w.size() == 2);
  CHECK(nw.w[0] == Catch::Approx(2.0).margin(1e-12));
  CHECK(nw.w[1] == Catch::Approx(2.0).margin(1e-12));
  CHECK(nw.residual <= 1e-9);
}

TEST_CASE("null weight of the per-axis pairs") {
  auto nw = compute_null_weight(axis_pair_B());
  for (double wi : nw.w) CHECK(wi == Catch::Approx(2.0).margin(1e-12));
  CHECK(nw.residual <= 1e-9);
  for (double wi : nw.w) CHECK(wi >= 1.0);
}

TEST_CASE("null weight construction fails without steering") {
  CHECK_THROWS_AS(compute_null_weight(Mat::identity(2)), SteeringFailed);
  Mat with_zero(1, 3, {-1.0, 1.0, 0.0});
  CHECK_THROWS_AS(compute_null_weight(with_zero), SteeringFailed);
}

TEST_CASE("z bounds in the equal-leak regime") {
  Mat B(1, 2, {-1.0, 1.0});
  auto nw = compute_null_weight(B);
  auto zb = z_bounds(B, Vec{0.5, 0.5}, nw);
  CHECK(zb.regime == ZBounds::Regime::EqualLeak);
  CHECK(zb.lower[0] == Catch::Approx(-1.0).margin(1e-12));
  CHECK(zb.lower[1] == Catch::Approx(-1.0).margin(1e-12));
  CHECK(zb.upper[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(zb.upper[1] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("z bounds in the spread-leak regime") {
  Mat B(1, 2, {-1.0, 1.0});
  auto nw = compute_null_weight(B);
  auto zb = z_bounds(B, Vec{1.0, 2.0}, nw);
  CHECK(zb.regime == ZBounds::Regime::SpreadLeak);
  CHECK(zb.gamma == Catch::Approx(-1.0).margin(1e-12));
  // gamma * w'd / w_i - sum_{j != i} w_j d_j / w_i = -2 - 1 = -3
  CHECK(zb.lower[0] == Catch::Approx(-3.0).margin(1e-12));
  CHECK(zb.lower[1] == Catch::Approx(-3.0).margin(1e-12));
  CHECK(zb.wz_lower == Catch::Approx(-4.0).margin(1e-12));
  CHECK(zb.wz_upper == Catch::Approx(4.0).margin(1e-12));
}

TEST_CASE("leak spreads containing zero are rejected") {
  Mat B(1, 2, {-1.0, 1.0});
  auto nw = compute_null_weight(B);
  CHECK_THROWS_AS(z_bounds(B, Vec{0.0, 1.0}, nw), UnsupportedLeak);
}

TEST_CASE("connected run: weighted sum of neuronal variables vanishes") {
  auto traj = run_connected(0.5, Vec(4, 0.2));
  REQUIRE(traj.events.size() > 10);
  auto nw = compute_null_weight(axis_pair_B());
  auto zb = z_bounds(axis_pair_B(), Vec(4, 0.2), nw);
  auto rep = monitor_connected(traj, connected_axis_controller(Vec(4, 0.2), 1.5), nw, zb);
  double wd = 0.0;
  for (std::size_t i = 0; i < 4; ++i) wd += nw.w[i] * zb.upper[i];
  CHECK(rep.max_abs_wz <= 1e-6 * wd);
  CHECK(rep.max_upper_violation <= 1e-9);
  CHECK(rep.max_lower_violation <= 1e-9);
  CHECK(rep.max_d1 <= rep.d1_bound + 1e-9);
  CHECK(rep.max_d2 <= rep.d2_bound + 1e-9);
}

TEST_CASE("connected run with spread leaks stays in the gamma band") {
  const Vec lams{0.2, 0.2, 0.4, 0.4};
  auto traj = run_connected(0.5, lams);
  auto nw = compute_null_weight(axis_pair_B());
  auto zb = z_bounds(axis_pair_B(), lams, nw);
  auto rep = monitor_connected(traj, connected_axis_controller(lams, 1.5), nw, zb);
  CHECK(rep.wz_low >= zb.wz_lower - 1e-9);
  CHECK(rep.wz_high <= zb.wz_upper + 1e-9);
  CHECK(rep.max_upper_violation <= 1e-9);
  CHECK(rep.max_lower_violation <= 1e-9);
}

TEST_CASE("connected trigger/reset identity") {
  auto traj = run_connected(0.5, Vec(4, 0.2), 5.0);
  REQUIRE(traj.events.size() > 4);
  const Mat BtB = axis_pair_B().transposed() * axis_pair_B();
  std::size_t checked = 0;
  for (std::size_t i = 0; i + 1 < traj.samples(); ++i) {
    if (traj.kind[i] != SampleKind::PreEvent) continue;
    REQUIRE(traj.kind[i + 1] == SampleKind::PostEvent);
    const EventRecord* ev = nullptr;
    for (const auto& e : traj.events)
      if (e.t == traj.t[i]) ev = &e;
    REQUIRE(ev != nullptr);
    for (std::size_t j = 0; j < 4; ++j) {
      const double jump = traj.z_at(i + 1)[j] - traj.z_at(i)[j];
      CHECK(std::abs(jump + BtB(j, ev->unit)) <= 1e-12);
    }
    // Pre-event value sits at (or a hair above) the threshold.
    CHECK(traj.z_at(i)[ev->unit] >= BtB(ev->unit, ev->unit) - 1e-12);
    CHECK(traj.z_at(i)[ev->unit] <= BtB(ev->unit, ev->unit) + 1e-6);
    ++checked;
  }
  CHECK(checked >= traj.events.size());
}

TEST_CASE("auxiliary dynamics follow the analogue loop plus disturbances") {
  const double dt = 1e-3;
  auto ctrl = connected_axis_controller(Vec(4, 0.2), 1.5);
  auto traj = run_connected(0.5, Vec(4, 0.2), 5.0, dt);
  const Mat A(2, 2, {1.0, 0.5, -0.5, 1.0});
  const Mat Kg = 1.5 * Mat::identity(2);
  const Mat R = auxiliary_map(ctrl);
  Mat RL = R;
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t i = 0; i < 2; ++i) RL(i, j) *= 0.2;

  // Uniform-grid samples only, indexed by time step.
  std::vector<std::size_t> grid;
  for (std::size_t i = 0; i < traj.samples(); ++i)
    if (traj.kind[i] == SampleKind::Grid) grid.push_back(i);

  std::size_t tested = 0;
  for (std::size_t g = 2; g + 2 < grid.size() && tested < 400; ++g) {
    const double t0 = traj.t[grid[g - 2]], t1 = traj.t[grid[g + 2]];
    bool clean = true;
    for (const auto& ev : traj.events)
      if (ev.t > t0 - dt && ev.t < t1 + dt) clean = false;
    if (!clean) continue;
    for (std::size_t c = 0; c < 2; ++c) {
      const double deriv = (-traj.xc_at(grid[g + 2])[c] + 8.0 * traj.xc_at(grid[g + 1])[c] -
                            8.0 * traj.xc_at(grid[g - 1])[c] + traj.xc_at(grid[g - 2])[c]) /
                           (12.0 * dt);
      auto x = traj.x_at(grid[g]);
      auto z = traj.z_at(grid[g]);
      double rhs = 0.0;
      for (std::size_t j = 0; j < 2; ++j) rhs += (A(c, j) - Kg(c, j)) * x[j];
      for (std::size_t j = 0; j < 4; ++j) rhs -= RL(c, j) * z[j];
      CHECK(std::abs(deriv - rhs) <= 1e-6);
    }
    ++tested;
  }
  CHECK(tested > 50);
}

TEST_CASE("connected ultimate bound contains the steady state") {
  const Vec lams(4, 0.2);
  auto ctrl = connected_axis_controller(lams, 1.5);
  auto nw = compute_null_weight(axis_pair_B());
  auto zb = z_bounds(axis_pair_B(), lams, nw);
  auto bound = connected_bound(Mat(2, 2, {1.0, 0.5, -0.5, 1.0}), ctrl, zb);
  REQUIRE(bound.applicable);
  CHECK(bound.decay_rate < 0.0);

  auto traj = run_connected(0.5, lams, 20.0);
  double limsup = 0.0;
  for (std::size_t i = 0; i < traj.samples(); ++i) {
    if (traj.t[i] < 10.0) continue;
    auto x = traj.x_at(i);
    limsup = std::max(limsup, std::sqrt(x[0] * x[0] + x[1] * x[1]));
  }
  CHECK(limsup <= bound.ultimate_bound + 1e-9);
  CHECK(limsup > 0.0);
}
