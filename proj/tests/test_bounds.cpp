#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "eic/bounds.hpp"
#include "eic/hybridsim.hpp"
#include "test_helpers.hpp"

using namespace eic;
using namespace eic::testing;

namespace {
const Mat kPairB(1, 2, {-1.0, 1.0});
InputFn pair_input() { return InputFn::rectified(Mat(2, 1, {1.0, -1.0}), {1.0, 1.0}); }
}  // namespace

TEST_CASE("scalar bound on the reference configuration") {
  auto r = scalar_bound(1.0, 2.5, 3.0, kPairB);
  REQUIRE(r.applicable);
  CHECK(r.prefactor == 1.0);
  CHECK(r.decay_rate == Catch::Approx(-0.75).margin(1e-15));
  CHECK(r.ultimate_bound == Catch::Approx(2.0).margin(1e-12));

  r = scalar_bound(1.0, 2.5, 1.5, kPairB);
  REQUIRE(r.applicable);
  CHECK(r.ultimate_bound == Catch::Approx(1.0).margin(1e-12));

  CHECK_FALSE(scalar_bound(2.5, 2.5, 0.0, kPairB).applicable);
  CHECK_FALSE(scalar_bound(3.0, 2.5, 0.0, kPairB).applicable);
}

TEST_CASE("simplified scalar bound requires b >= a + lam") {
  auto r = scalar_bound_simplified(1.0, 2.5, 1.5, kPairB);
  REQUIRE(r.applicable);
  CHECK(r.ultimate_bound == Catch::Approx(2.0).margin(1e-12));
  CHECK(r.decay_rate == Catch::Approx(-0.75).margin(1e-15));

  CHECK_FALSE(scalar_bound_simplified(1.0, 2.5, 3.0, kPairB).applicable);
  CHECK(scalar_bound_simplified(1.0, 2.5, 0.0, kPairB).applicable);
  CHECK(scalar_bound_simplified(1.0, 2.5, 0.0, kPairB).ultimate_bound ==
        Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("tight scalar bound doubles the decay rate") {
  auto r = scalar_bound_tight(1.0, 2.5, 0.0, kPairB, pair_input());
  REQUIRE(r.applicable);
  CHECK(r.decay_rate == Catch::Approx(-1.5).margin(1e-15));
  CHECK(r.ultimate_bound == Catch::Approx(1.0).margin(1e-12));

  // Boundary of the leak condition.
  CHECK(scalar_bound_tight(1.0, 2.5, 1.5, kPairB, pair_input()).applicable);
  CHECK_FALSE(scalar_bound_tight(1.0, 2.5, 1.6, kPairB, pair_input()).applicable);

  // Same-sided input pair is not sign-partitioned.
  InputFn same = InputFn::rectified(Mat(2, 1, {1.0, 1.0}), {1.0, 1.0});
  CHECK_FALSE(scalar_bound_tight(1.0, 2.5, 0.0, kPairB, same).applicable);
}

TEST_CASE("quadratic bound reduces to the scalar bound in one dimension") {
  auto q = quadratic_bound(Mat(1, 1, {1.0}), Mat(1, 1, {2.5}), kPairB, Vec{3.0, 3.0});
  auto s = scalar_bound(1.0, 2.5, 3.0, kPairB);
  REQUIRE(q.applicable);
  CHECK(q.aux.at("lambda_min_P") == Catch::Approx(1.0 / 3.0).margin(1e-12));
  CHECK(q.decay_rate == Catch::Approx(s.decay_rate).margin(1e-12));
  CHECK(q.ultimate_bound == Catch::Approx(s.ultimate_bound).margin(1e-12));
  CHECK(q.prefactor == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("quadratic bound on the rotation plant") {
  for (double w : {0.5, 3.0}) {
    const Mat A(2, 2, {1.0, w, -w, 1.0});
    auto r = quadratic_bound(A, 1.5 * Mat::identity(2), axis_pair_B(), Vec(4, 0.2));
    REQUIRE(r.applicable);
    // Skew cancellation gives P = I.
    CHECK(r.aux.at("lambda_min_P") == Catch::Approx(1.0).margin(1e-10));
    CHECK(r.aux.at("kappa_P") == Catch::Approx(1.0).margin(1e-10));
    CHECK(r.decay_rate == Catch::Approx(-0.25).margin(1e-10));
    CHECK(r.prefactor == Catch::Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("quadratic bound refuses a non-Hurwitz closed loop") {
  auto r = quadratic_bound(Mat(1, 1, {0.1}), Mat(1, 1, {0.0}), kPairB, Vec{0.0, 0.0});
  CHECK_FALSE(r.applicable);
}

TEST_CASE("equal-leak bound carries the rotation term") {
  const double s2 = std::sqrt(2.0);
  auto r05 = quadratic_bound_equal_leak(Mat(2, 2, {1.0, 0.5, -0.5, 1.0}),
                                        1.5 * Mat::identity(2), axis_pair_B(), 0.2);
  REQUIRE(r05.applicable);
  CHECK(r05.aux.at("norm_S") == Catch::Approx(0.5).margin(1e-10));
  CHECK(r05.ultimate_bound == Catch::Approx(3.0 * s2).margin(1e-9));

  auto r3 = quadratic_bound_equal_leak(Mat(2, 2, {1.0, 3.0, -3.0, 1.0}),
                                       1.5 * Mat::identity(2), axis_pair_B(), 0.2);
  REQUIRE(r3.applicable);
  CHECK(r3.aux.at("norm_S") == Catch::Approx(3.0).margin(1e-10));
  CHECK(r3.ultimate_bound == Catch::Approx(8.0 * s2).margin(1e-9));
}

TEST_CASE("equal-leak bound rejects leaks stronger than the certificate") {
  // Scalar loop with P = 1/(2(b-a)) = 0.625 and lam = 1: 1/(2 lam) = 0.5 < P.
  auto r = quadratic_bound_equal_leak(Mat(1, 1, {1.0}), Mat(1, 1, {1.8}), kPairB, 1.0);
  CHECK_FALSE(r.applicable);
  // Zero leak is vacuously fine.
  CHECK(quadratic_bound_equal_leak(Mat(1, 1, {1.0}), Mat(1, 1, {1.8}), kPairB, 0.0)
            .applicable);
}

TEST_CASE("applicable reports always describe decaying envelopes") {
  for (const auto& r :
       {scalar_bound(1.0, 2.5, 3.0, kPairB), scalar_bound_simplified(1.0, 2.5, 1.5, kPairB),
        scalar_bound_tight(1.0, 2.5, 0.0, kPairB, pair_input()),
        quadratic_bound(Mat(1, 1, {1.0}), Mat(1, 1, {2.5}), kPairB, Vec{0.0, 0.0})}) {
    REQUIRE(r.applicable);
    CHECK(r.decay_rate < 0.0);
    CHECK(r.ultimate_bound >= 0.0);
    CHECK(envelope_value(r, 2.0, 0.0) >= r.ultimate_bound);
    CHECK(envelope_value(r, 2.0, 1e9) == Catch::Approx(r.ultimate_bound));
  }
}

TEST_CASE("scalar envelope dominates a simulated run") {
  auto traj = simulate(scalar_plant(1.0), scalar_pair_controller(0.4, 3.0), Vec{2.0},
                       SimParams{5.0, 1e-3, 1e-9});
  auto r = scalar_bound(1.0, 2.5, 3.0, kPairB);
  for (std::size_t i = 0; i < traj.samples(); ++i) {
    const double env = envelope_value(r, 2.0, traj.t[i]);
    CHECK(std::abs(traj.x_at(i)[0]) <= env + 1e-6);
  }
}

TEST_CASE("inter-event bounds on known inputs") {
  auto b = inter_event_bounds(0.4, 0.0, 0.0, 50.5);
  CHECK(b.lower == Catch::Approx(0.4 / 50.5).epsilon(1e-12));
  CHECK(std::isinf(b.upper));

  b = inter_event_bounds(1.0, 1.0, 0.0, 2.0);
  CHECK(b.lower == Catch::Approx(std::log(2.0)).epsilon(1e-12));

  b = inter_event_bounds(1.0, 2.0, 1.0, 3.0);
  CHECK(std::isinf(b.upper));  // 1 - theta*lam/g_minus <= 0: the leak can starve the unit

  b = inter_event_bounds(1.0, 0.5, 1.0, 2.0);
  CHECK(b.upper == Catch::Approx(-std::log1p(-0.5) / 0.5).epsilon(1e-12));
  CHECK(b.lower <= b.upper);
}

TEST_CASE("inter-event bounds flag units that can never fire") {
  CHECK_THROWS_AS(inter_event_bounds(1.0, 2.0, 0.0, 1.0), NoEventsEver);
  CHECK_THROWS_AS(inter_event_bounds(1.0, 0.0, 0.0, 0.0), NoEventsEver);
}

TEST_CASE("inter-event lower bound grows with the leak") {
  // The firing-rate effect of leakage, stated where it is provable: for a
  // fixed drive ceiling the minimum gap is nondecreasing in lam.
  double prev = 0.0;
  for (double lam : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    const double lower = inter_event_bounds(0.4, lam, 0.0, 5.0).lower;
    CHECK(lower >= prev);
    prev = lower;
  }
}

TEST_CASE("global minimum inter-event time") {
  auto alpha = rectified_drive_envelope(pair_input());
  CHECK(alpha(3.0) == Catch::Approx(3.0));

  const double C = 2.0 + 2.0;  // envelope of the scalar bound at t = 0 for x0 = 2
  CHECK(min_inter_event_global(Vec{0.4, 0.4}, Vec{0.0, 0.0}, alpha, C) ==
        Catch::Approx(0.4 / C).epsilon(1e-12));
  CHECK(std::isinf(min_inter_event_global(Vec{0.4, 0.4}, Vec{0.0, 0.0}, alpha, 0.0)));
  CHECK(min_inter_event_global(Vec{1.0, 1.0}, Vec{1.0, 1.0}, alpha, 2.0) ==
        Catch::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(std::isinf(min_inter_event_global(Vec{1.0, 1.0}, Vec{2.0, 2.0}, alpha, 1.0)));
}

TEST_CASE("observed gaps respect the lower bound on a simulated run") {
  auto traj = simulate(scalar_plant(1.0), scalar_pair_controller(0.4, 0.0), Vec{2.0},
                       SimParams{8.0, 1e-3, 1e-9});
  // Per-unit drive maxima over the run.
  double g0 = 0.0, g1 = 0.0;
  for (std::size_t i = 0; i < traj.samples(); ++i) {
    g0 = std::max(g0, std::max(0.0, traj.x_at(i)[0]));
    g1 = std::max(g1, std::max(0.0, -traj.x_at(i)[0]));
  }
  for (std::size_t u = 0; u < 2; ++u) {
    const auto& st = traj.unit_stats[u];
    if (st.count < 2) continue;
    const double lower = inter_event_bounds(0.4, 0.0, 0.0, u == 0 ? g0 : g1).lower;
    CHECK(st.min_gap >= lower - 2e-9);
  }
}
