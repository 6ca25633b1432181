#include <doctest.h>

#include "fbmrds/attractor.hpp"
#include "fbmrds/fbm_gen.hpp"

#include <cmath>
#include <random>

using namespace fbmrds;

namespace {

DiscretePath hilbert_path(std::size_t n, std::uint64_t seed, double t0, double t1, std::size_t per_unit, double trace) {
  FbmConfig c;
  c.H = 0.75;
  c.dt = 1.0 / static_cast<double>(per_unit);
  c.t0 = t0;
  c.m = static_cast<std::size_t>(std::llround((t1 - t0) * per_unit));
  c.seed = seed;
  return sample_fbm_hilbert(c, TraceClassQ::power_law(n, trace));
}

StoppingParams stop_params(double mu) {
  StoppingParams sp;
  sp.mu = mu;
  return sp;
}

CocycleSystem system(const DiscretePath& w, const NonlinearityG& G, double mu, int i_min, int i_max) {
  return CocycleSystem(w, SpectralOperator::squares(w.dim()), G, HolderParams{}, stop_params(mu), SolverConfig{},
                       i_min, i_max);
}

}  // namespace

TEST_CASE("absorbing constants") {
  auto k = AbsorbConstants::make(1.0, 1.0 / 11.0, 0.0, 1.0, 1.0);
  CHECK(k.k1 == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(k.k2 == k.k1);
  CHECK(k.k0 == doctest::Approx(1.1).epsilon(1e-14));
  CHECK(k.series_ratio() == doctest::Approx(1.1 * std::exp(-0.5)));
  CHECK_THROWS(AbsorbConstants::make(2.0, 0.5, 0.0, 1.0, 1.0));
  SUBCASE("k1 grows with mu and the feasibility boundary is located") {
    double prev = 0.0;
    for (double mu : {0.01, 0.05, 0.1, 0.2, 0.4}) {
      const double k1 = AbsorbConstants::make(1.5, mu, 0.0, 1.0, 1.0).k1;
      CHECK(k1 > prev);
      prev = k1;
    }
    const double edge = mu_for_margin(1.5, 1.0, 1.0);
    CHECK(mu_condition_holds(AbsorbConstants::make(1.5, 0.99 * edge, 0, 1, 1).k1, 1.0));
    CHECK_FALSE(mu_condition_holds(AbsorbConstants::make(1.5, 1.01 * edge, 0, 1, 1).k1, 1.0));
    const double m125 = mu_for_margin(1.5, 1.0, 1.25);
    CHECK(mu_condition_margin(AbsorbConstants::make(1.5, m125, 0, 1, 1).k1, 1.0) == doctest::Approx(0.2));
    CHECK(mu_condition_margin(0.7, 1.0) < 0.0);
    CHECK(mu_condition_margin(9.0, 3.0) < 0.0);
  }
}

TEST_CASE("absorbing radius") {
  auto k = AbsorbConstants::make(1.0, 1.0 / 11.0, 0.0, 1.0, 1.0);
  const double closed = 0.4 / (1.0 - 1.1 * std::exp(-0.5));
  CHECK(closed == doctest::Approx(1.2018).epsilon(1e-4));
  SUBCASE("uniform steps") {
    auto seq = stopping_sequence(DiscretePath::zeros(-80.0, 0.25, 340, 1), stop_params(0.1), -75, 2);
    auto R = absorbing_radius(seq, k, 1);
    CHECK(R.terms == 65);
    CHECK(std::abs(R.value - closed) <= 1e-10 * closed);
    CHECK(absorbing_radius(seq, k, 2).value == doctest::Approx(R.value).epsilon(1e-10));
  }
  SUBCASE("tail bound covers the omitted terms") {
    for (int avail : {3, 10, 30}) {
      auto seq = stopping_sequence(DiscretePath::zeros(-avail - 0.5, 0.25, 4 * avail + 6, 1), stop_params(0.1), -avail, 0);
      auto R = absorbing_radius(seq, k, 1);
      CHECK(R.terms == avail + 1);
      // omitted = closed - truncated is known only up to cancellation noise of order eps * closed
      const double omitted = closed - R.truncated;
      CHECK(omitted > 0.0);
      CHECK(R.tail_bound >= omitted - 1e-14 * closed);
    }
  }
  SUBCASE("linear in k2") {
    auto seq = stopping_sequence(hilbert_path(1, 3, -20.0, 1.0, 16, 0.01), stop_params(0.2), -16, 1);
    AbsorbConstants k2 = k;
    k2.k2 = 2 * k.k2;
    CHECK(absorbing_radius(seq, k2, 1).value == doctest::Approx(2 * absorbing_radius(seq, k, 1).value).epsilon(1e-13));
    k2.k2 = 0.0;
    CHECK(absorbing_radius(seq, k2, 1).value == 0.0);
  }
  SUBCASE("divergent series") {
    auto seq = stopping_sequence(DiscretePath::zeros(-4.0, 0.25, 20, 1), stop_params(0.1), -3, 0);
    AbsorbConstants bad = AbsorbConstants::make(1.0, 0.3, 0.0, 0.05, 1.0);
    CHECK_THROWS_WITH(absorbing_radius(seq, bad, 1), "absorbing series diverges under estimated d");
  }
}

TEST_CASE("semidistance and diameter") {
  auto s = [](double x) { return Vector::Constant(1, x); };
  FiniteSet X{s(0.0), s(2.0)}, Y{s(0.0)};
  CHECK(hausdorff_semidist(X, Y) == 2.0);
  CHECK(hausdorff_semidist(Y, X) == 0.0);
  CHECK(hausdorff_semidist({s(1.5)}, {s(-0.5)}) == 2.0);
  CHECK(hausdorff_semidist(Y, Y) == 0.0);
  CHECK(diameter(X) == 2.0);
  CHECK(diameter(Y) == 0.0);
  CHECK_THROWS(hausdorff_semidist({}, Y));
  auto ball = sample_ball(5, 200, 3.0, 11);
  CHECK(ball.size() == 200);
  double mx = 0.0;
  for (const auto& v : ball) mx = std::max(mx, v.norm());
  CHECK(mx <= 3.0);
  CHECK(mx > 2.5);
  CHECK((sample_ball(5, 200, 3.0, 11)[17] - ball[17]).norm() == 0.0);
}

TEST_CASE("discrete cocycle") {
  const std::size_t n = 4;
  auto G = NonlinearityG::sine(n, 0.5, 0.5);
  SUBCASE("identity and pure decay") {
    auto w = hilbert_path(n, 2, -6.0, 6.0, 32, 0.01);
    auto sys0 = system(w, NonlinearityG::zero(n), 0.2, -3, 3);
    Vector u0 = Vector::LinSpaced(n, 1.0, -1.0);
    CHECK((sys0.phi(0, 1, u0) - u0).norm() == 0.0);
    const double T = sys0.sequence().abs_at(3) - sys0.sequence().abs_at(1);
    Vector expect = sys0.op().apply_semigroup(T, u0);
    CHECK((sys0.phi(2, 1, u0) - expect).norm() <= 1e-12);
    CHECK((sys0.phi(2, 1, u0, CocycleMode::Single) - expect).norm() <= 1e-12);
    CHECK_THROWS(sys0.phi(-1, 0, u0));
    CHECK_THROWS(sys0.phi(5, 0, u0));
  }
  SUBCASE("composition over random index triples") {
    std::mt19937 rng(9);
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      auto w = hilbert_path(n, seed, -8.0, 8.0, 32, 0.01);
      auto sys = system(w, G, 0.2, -4, 4);
      std::uniform_int_distribution<int> I(1, 2), J(-4, 0);
      for (int r = 0; r < 3; ++r) {
        const int i = I(rng), i2 = I(rng), j = J(rng);
        Vector u0 = Vector::Constant(n, 0.3 * r + 0.1);
        const Vector whole = sys.phi(i + i2, j, u0, CocycleMode::Single);
        const Vector parts = sys.phi(i2, j + i, sys.phi(i, j, u0, CocycleMode::Single), CocycleMode::Single);
        CHECK((whole - parts).norm() <= 10 * sys.solver().fp_tol * std::max(1.0, whole.norm()));
        CHECK((sys.phi(i + i2, j, u0) - whole).norm() <= 10 * sys.solver().fp_tol * std::max(1.0, whole.norm()));
      }
    }
  }
}

TEST_CASE("a priori bound") {
  const std::size_t n = 4;
  SUBCASE("zero path and G = 0") {
    auto sys = system(DiscretePath::zeros(-1.0, 0.125, 72, n), NonlinearityG::zero(n), 0.1, 0, 6);
    auto k = AbsorbConstants::make(1.0, 0.1, 0.0, 1.0, 1.0);
    CHECK(k.k0 >= 1.0);
    Vector u0 = 2.0 * Vector::Unit(n, 0);
    auto rep = apriori_bound_check(sys, 6, 0, u0, k);
    CHECK(rep.holds);
    for (int i = 1; i <= 6; ++i) CHECK(rep.lhs[i - 1] == doctest::Approx(2.0 * std::exp(-double(i))).epsilon(1e-10));
    CHECK(rep.worst_ratio < 1.0);
  }
  SUBCASE("fitted constant is stable under refinement") {
    auto G = NonlinearityG::sine(n, 0.5, 0.5);
    for (std::uint64_t seed : {5u, 6u}) {
      auto fine = hilbert_path(n, seed, -1.0, 7.0, 64, 0.01);
      auto coarse = fine.coarsen(2);
      Vector u0 = Vector::Constant(n, 0.5);
      auto k = AbsorbConstants::make(1.0, 0.2, 0.0, 0.5, 1.0);
      const double cf = apriori_bound_check(system(fine, G, 0.2, 0, 4), 4, 0, u0, k).fitted_c;
      const double cc = apriori_bound_check(system(coarse, G, 0.2, 0, 4), 4, 0, u0, k).fitted_c;
      CHECK(std::isfinite(cf));
      CHECK(std::abs(cf / cc - 1.0) < 0.2);
      CHECK(calibrate_interval_constant(system(fine, G, 0.2, 0, 4), 4, 0, u0) == doctest::Approx(cf));
    }
  }
}

TEST_CASE("pullback estimate") {
  const std::size_t n = 4;
  PullbackSettings ps;
  ps.depths = {2, 4, 8};
  ps.ensemble = 12;
  ps.seed = 3;
  SUBCASE("G = 0 decays at the first eigenvalue") {
    auto sys = system(hilbert_path(n, 7, -12.0, 2.0, 16, 0.01), NonlinearityG::zero(n), 0.2, -10, 1);
    auto k = AbsorbConstants::make(1.0, 0.2, 0.0, 0.01, 1.0);  // d this small leaves no absorbing series
    auto rep = pullback_attractor_estimate(sys, k, ps);
    CHECK(rep.radius_source == "fallback");
    CHECK(rep.decay_rate == doctest::Approx(1.0).epsilon(0.1));
    CHECK(rep.depths.back().diameter < rep.depths.front().diameter);
  }
  SUBCASE("sine nonlinearity") {
    auto sys = system(hilbert_path(n, 8, -12.0, 2.0, 16, 0.01), NonlinearityG::sine(n, 0.5, 0.5), 0.2, -10, 1);
    auto k = AbsorbConstants::make(0.5, 0.2, 0.0, 0.5, 4.0);
    ps.invariance_probe = true;
    auto rep = pullback_attractor_estimate(sys, k, ps);
    CHECK(rep.radius_source == "absorbing");
    REQUIRE(rep.depths.size() == 3);
    CHECK(rep.depths[0].semidist_prev == -1.0);
    for (const auto& d : rep.depths) {
      CHECK(d.cloud.size() == 12);
      CHECK(d.invariance >= 0.0);
      CHECK(d.max_norm <= d.ball_radius + 1.0);
    }
    CHECK(rep.depths[2].semidist_prev <= rep.depths[1].semidist_prev);
    CHECK(rep.semidist_nonincreasing);
  }
}

TEST_CASE("temperedness") {
  std::vector<double> t, r1, r2;
  for (int k = 0; k <= 40; ++k) {
    t.push_back(-0.5 * k);
    r1.push_back(3.0);
    r2.push_back(std::exp(0.3 * 0.5 * k));
  }
  auto flat = temperedness_check(t, r1, 0.1);
  CHECK(flat.slope == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(flat.tempered);
  auto grow = temperedness_check(t, r2, 0.1);
  CHECK(std::abs(grow.slope / 0.3 - 1.0) < 0.05);
  CHECK_FALSE(grow.tempered);
  CHECK_FALSE(grow.exp_growing);
  CHECK(temperedness_check(t, r2, 0.5).exp_growing);
  CHECK_THROWS(temperedness_check({0.0}, {1.0}, 0.1));
}

TEST_CASE("continuous-time sweep bound") {
  const std::size_t n = 4;
  SUBCASE("zero path") {
    auto sys = system(DiscretePath::zeros(-1.0, 0.125, 32, n), NonlinearityG::sine(n, 0.5, 0.5), 0.2, 0, 2);
    Vector u0 = Vector::Constant(n, 0.7);
    auto rep = continuous_time_sweep_bound(sys, 1, u0, 1.0);
    CHECK(rep.sup == doctest::Approx(u0.norm()));
    CHECK(rep.holds);
    CHECK(rep.fitted_c <= 1.0);
    CHECK(rep.starts == 9);
  }
  SUBCASE("fBm path and vanishing mu") {
    auto w = hilbert_path(n, 4, -1.0, 3.0, 32, 0.01);
    Vector u0 = Vector::Constant(n, 0.5);
    auto sys = system(w, NonlinearityG::sine(n, 0.5, 0.5), 0.2, 0, 2);
    auto rep = continuous_time_sweep_bound(sys, 1, u0, 2.0);
    CHECK(std::isfinite(rep.fitted_c));
    CHECK(rep.holds == (rep.fitted_c <= 2.0));
    CHECK(sweep_rhs(1.0, 0.0, 2.0) == 2.0);
    CHECK(sweep_rhs(1.0, 1e-6, 2.0) == doctest::Approx(2.0).epsilon(1e-5));
  }
}
