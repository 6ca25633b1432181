#include <doctest.h>

#include "fbmrds/fbm_gen.hpp"
#include "fbmrds/stopping_times.hpp"
#include "test_support.hpp"

#include <cmath>
#include <random>

using namespace fbmrds;

namespace {

DiscretePath fbm(std::uint64_t seed, double t0, double t1, std::size_t per_unit = 64, double scale = 1.0) {
  FbmConfig c;
  c.H = 0.75;
  c.dt = 1.0 / static_cast<double>(per_unit);
  c.t0 = t0;
  c.m = static_cast<std::size_t>(std::llround((t1 - t0) * per_unit));
  c.seed = seed;
  auto p = sample_fbm_1d(c);
  return DiscretePath(p.t0(), p.dt(), RowMatrix(scale * p.values()));
}

StoppingParams params(double mu = 0.2) {
  StoppingParams sp;
  sp.mu = mu;
  return sp;
}

}  // namespace

TEST_CASE("parameter checks") {
  StoppingParams sp;
  CHECK_NOTHROW(sp.validate());
  sp.mu = 0.0;
  CHECK_THROWS(sp.validate());
  sp = StoppingParams{};
  sp.beta_dprime = 0.5;
  CHECK_THROWS(sp.validate());
}

TEST_CASE("zero path") {
  auto w = DiscretePath::zeros(-3.0, 1.0 / 32, 192, 2);
  auto sp = params();
  CHECK(forward_stopping_time(w, sp) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(backward_stopping_time(w, sp) == doctest::Approx(-1.0).epsilon(1e-12));
  auto seq = stopping_sequence(w, sp, -3, 3);
  CHECK_FALSE(seq.truncated);
  for (int i = -3; i <= 3; ++i) CHECK(seq.at(i) == doctest::Approx(i).epsilon(1e-9));
  CHECK(seq.at(0) == 0.0);
}

TEST_CASE("linear path closed form") {
  // mu = c = 1, beta' = 0.75: root of tau^{1/4} + tau^{1/4} = 1
  auto w = testsupport::from_function(-2.0, 1.0 / 50, 200, [](double t) { return t; });
  StoppingParams sp;
  sp.mu = 1.0;
  sp.beta_prime = 0.75;
  sp.beta_dprime = 0.8;
  CHECK(std::abs(forward_stopping_time(w, sp) - 0.0625) <= sp.bisect_tol);
  CHECK(std::abs(backward_stopping_time(w, sp) + 0.0625) <= sp.bisect_tol);
  for (double c : {0.3, 2.0}) {
    auto v = testsupport::from_function(-2.0, 1.0 / 50, 200, [c](double t) { return c * t; });
    const double expect = std::pow(1.0 / (c + 1.0), 4.0);
    CHECK(std::abs(forward_stopping_time(v, sp, 0.37) - expect) <= sp.bisect_tol);
  }
}

TEST_CASE("stopping times on fBm paths") {
  auto sp = params();
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto w = fbm(seed, -6.0, 6.0);
    const double T = forward_stopping_time(w, sp);
    CHECK(T > 0.0);
    CHECK(T <= 1.0);
    SUBCASE("reflection identity") {
      CHECK(std::abs(T + backward_stopping_time(w, sp, T)) <= 2 * sp.bisect_tol);
      const double Th = backward_stopping_time(w, sp);
      CHECK(std::abs(Th + forward_stopping_time(w, sp, Th)) <= 2 * sp.bisect_tol);
    }
    SUBCASE("doubling the path shortens the time") {
      DiscretePath w2(w.t0(), w.dt(), RowMatrix(2.0 * w.values()));
      CHECK(forward_stopping_time(w2, sp) < T);
      CHECK(backward_stopping_time(w2, sp) > backward_stopping_time(w, sp));
    }
    SUBCASE("objective is non-decreasing") {
      for (int dir : {1, -1}) {
        double prev = -1e300;
        for (int k = 1; k <= 200; ++k) {
          const double g = stopping_objective(w, sp, 0.0, dir, 0.005 * k);
          CHECK(g >= prev - 1e-12);
          prev = g;
        }
      }
    }
    SUBCASE("sequence steps and cocycle") {
      auto seq = stopping_sequence(w, sp, -4, 4);
      REQUIRE(seq.contains(-4));
      REQUIRE(seq.contains(4));
      CHECK(seq.at(0) == 0.0);
      for (int i = -4; i < 4; ++i) {
        const double step = seq.at(i + 1) - seq.at(i);
        CHECK(step > 0.0);
        CHECK(step <= 1.0 + 1e-12);
      }
      std::mt19937 rng(static_cast<unsigned>(seed));
      std::uniform_int_distribution<int> pick(-2, 2);
      for (int r = 0; r < 5; ++r) {
        const int i = pick(rng), j = pick(rng);
        auto sub = stopping_sequence(w, sp, std::min(j, 0), std::max(j, 0), seq.abs_at(i));
        CHECK(std::abs(seq.at(i) + sub.at(j) - seq.at(i + j)) <= 4 * sp.bisect_tol);
      }
    }
  }
}

TEST_CASE("truncated sequence and short paths") {
  auto sp = params();
  auto w = DiscretePath::zeros(-2.5, 1.0 / 16, 80, 1);
  auto seq = stopping_sequence(w, sp, -5, 5);
  CHECK(seq.truncated);
  CHECK(seq.i_min == -2);
  CHECK(seq.i_max == 2);
  CHECK_THROWS_AS(seq.at(3), std::out_of_range);
  CHECK(seq.index_at_or_before(0.5) == 0);
  auto shortp = DiscretePath::zeros(0.0, 1.0 / 16, 8, 1);
  CHECK_THROWS_WITH_AS(forward_stopping_time(shortp, sp), doctest::Contains("insufficient horizon"), InsufficientHorizon);
  CHECK_THROWS_AS(stopping_sequence(w, sp, 1, 2), std::invalid_argument);
}

TEST_CASE("order property") {
  auto sp = params();
  SUBCASE("trivial cases") {
    auto w = fbm(3, -4.0, 1.0);
    auto eq = order_property_check(w, sp, -1.0, -1.0);
    CHECK(eq.holds);
    CHECK(eq.lhs == eq.rhs);
    auto z = DiscretePath::zeros(-4.0, 1.0 / 16, 80, 1);
    auto rep = order_property_check(z, sp, -1.5, -0.25);
    CHECK(rep.holds);
    CHECK(rep.lhs == doctest::Approx(-2.5));
    CHECK(rep.rhs == doctest::Approx(-1.25));
    CHECK_THROWS(order_property_check(w, sp, 0.0, -0.5));
  }
  SUBCASE("random grid-aligned pairs") {
    int pairs = 0, chains = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      auto w = fbm(seed, -5.0, 1.0, 32);
      std::mt19937 rng(static_cast<unsigned>(seed));
      std::uniform_int_distribution<int> idx(0, 96);  // grid points in [-2, 1]
      for (int r = 0; r < 100; ++r) {
        int a = idx(rng), b = idx(rng);
        if (a > b) std::swap(a, b);
        const double t1 = -2.0 + a / 32.0, t2 = -2.0 + b / 32.0;
        auto rep = order_property_check(w, sp, t1, t2);
        CHECK(rep.holds);
        CHECK(rep.chain_holds);
        chains += rep.chain_checked;
        ++pairs;
      }
    }
    CHECK(pairs == 1000);
    CHECK(chains > 0);
  }
}

TEST_CASE("counting bound") {
  auto sp = params();
  SUBCASE("zero path") {
    auto rep = counting_bound_check(DiscretePath::zeros(-2.0, 1.0 / 32, 96, 1), sp);
    CHECK(rep.N == 1);
    CHECK(rep.bound == doctest::Approx(1.0));
    CHECK(rep.holds);
  }
  SUBCASE("fBm seeds") {
    int maxN = 0, maxN10 = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      auto w = fbm(seed, -1.5, 0.5, 128);
      auto rep = counting_bound_check(w, sp);
      CHECK(rep.holds);
      CHECK(rep.N >= 1);
      maxN = std::max(maxN, rep.N);
      if (seed <= 10) {
        auto big = counting_bound_check(DiscretePath(w.t0(), w.dt(), RowMatrix(10.0 * w.values())), sp);
        CHECK(big.holds);
        CHECK(big.N >= rep.N);
        maxN10 = std::max(maxN10, big.N);
      }
    }
    CHECK(maxN10 > maxN / 2);
    CHECK(maxN10 > 1);
  }
  CHECK_THROWS(counting_bound_check(DiscretePath::zeros(-0.5, 0.1, 10, 1), sp));
}

TEST_CASE("growth rate estimate") {
  auto sp = params();
  GrowthSettings gs;
  gs.window = 8;
  gs.nu = 0.1;
  gs.lambda1 = 4.0;
  gs.c = 0.5;
  SUBCASE("zero ensemble") {
    std::vector<DiscretePath> ens(3, DiscretePath::zeros(-10.0, 1.0 / 16, 176, 1));
    auto rep = growth_rate_estimate(ens, sp, gs);
    CHECK(rep.d_mc == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.d_proxy == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.d_hat == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(rep.growth_mc);
    CHECK(rep.paths == 3);
  }
  SUBCASE("smaller noise gives a larger rate") {
    double prev = 0.0;
    for (double scale : {1.0, 0.5, 0.25}) {
      std::vector<DiscretePath> ens;
      for (std::uint64_t seed = 1; seed <= 6; ++seed) ens.push_back(fbm(seed, -10.0, 1.0, 32, scale));
      auto rep = growth_rate_estimate(ens, sp, gs);
      CHECK(rep.d_mc > prev);
      CHECK(rep.d_proxy >= rep.d_mc);
      CHECK(rep.d_hat >= rep.d_proxy);
      prev = rep.d_mc;
    }
  }
  SUBCASE("short paths") {
    std::vector<DiscretePath> ens(1, DiscretePath::zeros(-3.0, 1.0 / 16, 64, 1));
    CHECK_THROWS(growth_rate_estimate(ens, sp, gs));
  }
}

TEST_CASE("feasibility helpers") {
  CHECK(mu_condition_holds(0.1, 1.0));
  CHECK_FALSE(mu_condition_holds(0.7, 1.0));
  CHECK(smallness_holds(0.5, 0.6, 0.05, 0.1, 4.0));
  CHECK_FALSE(smallness_holds(0.5, 0.4, 0.05, 0.1, 4.0));
  CHECK_FALSE(smallness_holds(0.5, 0.6, 0.05, 1.5, 4.0));
}
