#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "rado/losses.hpp"
#include "test_helpers.hpp"

using Catch::Approx;
using rado::GamePair;
using rado::PairKind;

namespace {

std::vector<double> normal_z(std::size_t m, std::uint64_t seed) {
  rado::RandomStream stream(seed);
  std::vector<double> z(m);
  for (auto& zi : z) zi = rado::sample_standard_normal(stream);
  return z;
}

}  // namespace

TEST_CASE("example losses evaluate their defining formulas", "[losses]") {
  std::vector<double> zz{0.0, 0.0};
  CHECK(rado::example_loss(PairKind::LogExp, zz, 1.0) ==
        Approx(2.0 * std::numbers::ln2).epsilon(1e-12));

  std::vector<double> z{1.0, -2.0, 3.0};
  CHECK(rado::example_loss(PairKind::Relu, z, 1.0) == Approx(2.0));
  CHECK(rado::example_loss(PairKind::Unhinged, z, 1.0) == Approx(-2.0));
  CHECK(rado::example_loss(PairKind::SquareMeanVar, z, 1.0) ==
        Approx(0.0 + 9.0 + 4.0));
}

TEST_CASE("rado losses evaluate over the subset sums", "[losses]") {
  std::vector<double> zz{0.0, 0.0};
  auto sums = rado::subset_sums(zz);
  CHECK(rado::rado_loss(PairKind::LogExp, sums, 1.0) == Approx(4.0));

  std::vector<double> z{1.0, -2.0, 3.0};
  auto s3 = rado::subset_sums(z);
  CHECK(rado::rado_loss(PairKind::Unhinged, s3, 1.0) == Approx(-1.0));
  CHECK(rado::rado_loss(PairKind::Relu, s3, 1.0) == Approx(2.0));

  std::vector<double> not_pow2(5, 0.0);
  CHECK_THROWS_AS(rado::rado_loss(PairKind::LogExp, not_pow2, 1.0), rado::DataError);
}

TEST_CASE("brute-force game reproduces the closed-form optima", "[losses]") {
  SECTION("log/exp at m=1, z=0") {
    auto ev = rado::brute_force_game(GamePair::coupled(PairKind::LogExp, 1), {{0.0}});
    CHECK(ev.p_star[0] == Approx(0.5));
    CHECK(ev.q_star[0] == Approx(0.5));
    CHECK(ev.q_star[1] == Approx(0.5));
    CHECK(ev.l_e_star == Approx(ev.l_r_star).margin(1e-12));  // b = 0 at m=1
  }
  SECTION("log/exp at m=2, z=0") {
    std::vector<double> z{0.0, 0.0};
    auto ev = rado::brute_force_game(GamePair::coupled(PairKind::LogExp, 2), z);
    CHECK(ev.l_e_star == Approx(2.0 * (-std::numbers::ln2 - 1.0)).margin(1e-12));
    CHECK(ev.l_r_star == Approx(-2.0 * std::numbers::ln2 - 1.0).margin(1e-12));
    CHECK(ev.l_e_star - ev.l_r_star == Approx(-1.0).margin(1e-12));
    REQUIRE(ev.lambda.has_value());
    CHECK(*ev.lambda == Approx(-std::log(4.0)).margin(1e-12));
  }
  SECTION("unhinged forces the uniform optimizers") {
    auto z = normal_z(3, 5);
    auto ev = rado::brute_force_game(GamePair::coupled(PairKind::Unhinged, 3), z);
    for (double p : ev.p_star) CHECK(p == 0.5);
    for (double q : ev.q_star) CHECK(q == Approx(1.0 / 8));
    CHECK_FALSE(ev.lambda.has_value());
  }
  SECTION("enumeration cap") {
    std::vector<double> z(13, 0.0);
    CHECK_THROWS_AS(
        rado::brute_force_game(GamePair::coupled(PairKind::LogExp, 13), z),
        rado::DataError);
  }
  SECTION("coupling is enforced") {
    GamePair bad{PairKind::LogExp, 1.0, 2.0};
    CHECK_THROWS_AS(rado::brute_force_game(bad, {{0.0}}), rado::DataError);
    GamePair bad2{PairKind::SquareMeanVar, 1.0, 1.0};
    std::vector<double> z{0.0, 0.0, 0.0};
    CHECK_THROWS_AS(rado::brute_force_game(bad2, z), rado::DataError);
  }
}

TEST_CASE("q* lies on the simplex hyperplane and p* = G q*", "[losses]") {
  for (auto kind : {PairKind::LogExp, PairKind::SquareMeanVar}) {
    for (std::size_t m = 1; m <= 8; ++m) {
      auto pair = GamePair::coupled(kind, m);
      auto z = normal_z(m, 100 + m);
      auto ev = rado::brute_force_game(pair, z);
      double qsum = 0.0;
      for (double q : ev.q_star) qsum += q;
      CHECK(std::abs(qsum - 1.0) < 1e-10);
      auto p = rado::indicator_matrix_times_q(m, ev.q_star);
      for (std::size_t i = 0; i < m; ++i) {
        CHECK(std::abs(p[i] - ev.p_star[i]) < 1e-8);
      }
    }
  }
}

TEST_CASE("gap between the optimal payoffs is z-independent", "[losses]") {
  SECTION("single trial has zero spread") {
    auto stats =
        rado::equivalence_gap_constancy(GamePair::coupled(PairKind::LogExp, 4), 1, 4, 3);
    CHECK(stats.stdev == 0.0);
  }
  SECTION("log/exp pair at m <= 8") {
    for (std::size_t m = 1; m <= 8; ++m) {
      auto stats = rado::equivalence_gap_constancy(
          GamePair::coupled(PairKind::LogExp, m), 100, m, 17);
      CHECK(stats.stdev < 1e-8);
      // empirically b = -mu (m-1)
      CHECK(stats.mean == Approx(-(double(m) - 1.0)).margin(1e-7));
    }
  }
  SECTION("mean-variance pair at m <= 8") {
    for (std::size_t m = 1; m <= 8; ++m) {
      auto stats = rado::equivalence_gap_constancy(
          GamePair::coupled(PairKind::SquareMeanVar, m), 100, m, 19);
      CHECK(stats.stdev < 1e-8);
      // empirically b = mu_e (m-1) / 4
      CHECK(stats.mean == Approx((double(m) - 1.0) / 4.0).margin(1e-7));
    }
  }
  SECTION("relu pair is exactly self-equivalent") {
    for (std::size_t m : {2ul, 5ul, 8ul}) {
      auto stats = rado::equivalence_gap_constancy(
          GamePair::coupled(PairKind::Relu, m), 100, m, 23);
      CHECK(stats.stdev < 1e-12);
      CHECK(std::abs(stats.mean) < 1e-12);
    }
  }
}

TEST_CASE("loss identities hold exactly", "[losses]") {
  SECTION("log/exp product identity") {
    std::vector<double> zz{0.0, 0.0};
    CHECK(rado::loss_identity_residual(PairKind::LogExp, zz, 1.0) ==
          Approx(0.0).margin(1e-12));
    for (std::size_t m = 1; m <= 12; ++m) {
      auto z = normal_z(m, 41 + m);
      CHECK(rado::logexp_product_identity_rel_residual(z, 1.0) < 1e-10);
      CHECK(rado::logexp_product_identity_rel_residual(z, 0.37) < 1e-10);
    }
  }
  SECTION("mean-variance identity l_e = m + 4 l_r at mu_e=1") {
    for (double z1 : {-3.0, -0.5, 0.0, 1.25, 8.0}) {
      CHECK(rado::loss_identity_residual(PairKind::SquareMeanVar, {{z1}}, 1.0) ==
            Approx(0.0).margin(1e-10));
    }
    for (std::size_t m = 1; m <= 10; ++m) {
      auto z = normal_z(m, 77 + m);
      CHECK(std::abs(rado::loss_identity_residual(PairKind::SquareMeanVar, z, 1.0)) <
            1e-10);
    }
  }
  SECTION("relu and unhinged identities") {
    std::vector<double> z{1.0, -2.0, 3.0};
    CHECK(rado::loss_identity_residual(PairKind::Unhinged, z, 1.0) ==
          Approx(0.0).margin(1e-13));
    for (std::size_t m = 1; m <= 10; ++m) {
      auto zr = normal_z(m, 123 + m);
      CHECK(std::abs(rado::loss_identity_residual(PairKind::Relu, zr, 1.0)) < 1e-12);
      CHECK(std::abs(rado::loss_identity_residual(PairKind::Unhinged, zr, 1.0)) < 1e-12);
    }
  }
}

TEST_CASE("monotone transforms tie L* to the plain losses", "[losses]") {
  // For the log/exp pair: -L*_e = mu l_e + c_e and -L*_r = mu log(l_r) + c_r
  // with constants independent of z. Fit each constant once, check on fresh z.
  const std::size_t m = 5;
  const double mu = 1.3;
  auto pair = GamePair::coupled(PairKind::LogExp, m, mu);

  auto z0 = normal_z(m, 1);
  auto ev0 = rado::brute_force_game(pair, z0);
  const double c_e = -ev0.l_e_star - mu * rado::example_loss(PairKind::LogExp, z0, mu);
  const double c_r =
      -ev0.l_r_star - mu * rado::log_exp_rado_loss(rado::subset_sums(z0), mu);

  for (int trial = 2; trial <= 51; ++trial) {
    auto z = normal_z(m, 1000 + trial);
    auto ev = rado::brute_force_game(pair, z);
    const double le = rado::example_loss(PairKind::LogExp, z, mu);
    const double log_lr = rado::log_exp_rado_loss(rado::subset_sums(z), mu);
    CHECK(std::abs(-ev.l_e_star - (mu * le + c_e)) < 1e-8);
    CHECK(std::abs(-ev.l_r_star - (mu * log_lr + c_r)) < 1e-8);
  }
}

TEST_CASE("logsumexp is stable far outside double range", "[losses]") {
  std::vector<double> xs{1000.0, 1000.0};
  CHECK(rado::logsumexp(xs) == Approx(1000.0 + std::numbers::ln2));
  std::vector<double> lo{-4000.0, -4000.0};
  CHECK(rado::logsumexp(lo) == Approx(-4000.0 + std::numbers::ln2));
}

namespace {

// 1-D convex minimization by ternary search, used as an oracle for the
// per-coordinate example game.
template <typename F>
double ternary_min(F f, double lo, double hi, int iters = 300) {
  for (int i = 0; i < iters; ++i) {
    const double a = lo + (hi - lo) / 3.0;
    const double b = hi - (hi - lo) / 3.0;
    if (f(a) < f(b)) {
      hi = b;
    } else {
      lo = a;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("closed-form optimizers satisfy the stationarity conditions",
          "[losses]") {
  // For the differentiable pairs: z_i + mu_e phi_e'(p_i) = 0 per coordinate,
  // and S_I + mu_r phi_r'(q_I) constant over subsets (= lambda).
  for (std::size_t m : {2ul, 4ul, 6ul}) {
    auto z = normal_z(m, 900 + m);
    const auto sums = rado::subset_sums(z);

    SECTION("log/exp at m=" + std::to_string(m)) {
      const double mu = 1.0;
      auto ev = rado::brute_force_game(GamePair::coupled(PairKind::LogExp, m, mu), z);
      for (std::size_t i = 0; i < m; ++i) {
        const double p = ev.p_star[i];
        // phi_e'(p) = log(p/(1-p))
        CHECK(z[i] + mu * std::log(p / (1.0 - p)) == Approx(0.0).margin(1e-9));
      }
      REQUIRE(ev.lambda.has_value());
      for (std::size_t idx = 0; idx < sums.size(); ++idx) {
        // phi_r'(q) = log(q)
        CHECK(sums[idx] + mu * std::log(ev.q_star[idx]) ==
              Approx(*ev.lambda).margin(1e-9));
      }
    }

    SECTION("mean-variance at m=" + std::to_string(m)) {
      auto pair = GamePair::coupled(PairKind::SquareMeanVar, m, 1.0);
      auto ev = rado::brute_force_game(pair, z);
      for (std::size_t i = 0; i < m; ++i) {
        // phi_e'(p) = 2p - 1
        CHECK(z[i] + pair.mu_e * (2.0 * ev.p_star[i] - 1.0) ==
              Approx(0.0).margin(1e-9));
      }
      REQUIRE(ev.lambda.has_value());
      for (std::size_t idx = 0; idx < sums.size(); ++idx) {
        // phi_r'(q) = q
        CHECK(sums[idx] + pair.mu_r * ev.q_star[idx] ==
              Approx(*ev.lambda).margin(1e-9));
      }
    }
  }
}

TEST_CASE("numeric per-coordinate minimization reproduces L*_e", "[losses]") {
  auto xlogx = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };
  for (std::size_t m : {1ul, 3ul, 5ul}) {
    auto z = normal_z(m, 40 + m);

    {
      const double mu = 1.0;
      auto ev = rado::brute_force_game(GamePair::coupled(PairKind::LogExp, m, mu), z);
      double numeric = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        auto objective = [&](double p) {
          return p * z[i] + mu * (xlogx(p) + xlogx(1.0 - p) - 1.0);
        };
        numeric += objective(ternary_min(objective, 1e-12, 1.0 - 1e-12));
      }
      CHECK(numeric == Approx(ev.l_e_star).margin(1e-8));
    }

    {
      auto pair = GamePair::coupled(PairKind::SquareMeanVar, m, 1.0);
      auto ev = rado::brute_force_game(pair, z);
      double numeric = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        auto objective = [&](double p) {
          return p * z[i] + pair.mu_e * 0.5 * (1.0 - 2.0 * p * (1.0 - p));
        };
        numeric += objective(ternary_min(objective, -50.0, 50.0));
      }
      CHECK(numeric == Approx(ev.l_e_star).margin(1e-8));
    }
  }
}

TEST_CASE("gap scan rejects an invalid coupling", "[losses]") {
  GamePair bad{PairKind::LogExp, 1.0, 2.0};
  CHECK_THROWS_AS(rado::equivalence_gap_constancy(bad, 5, 3, 0), rado::DataError);
  CHECK_THROWS_AS(
      rado::equivalence_gap_constancy(GamePair::coupled(PairKind::Relu, 13), 5, 13, 0),
      rado::DataError);
}

TEST_CASE("coupled pair construction validates mu", "[losses]") {
  CHECK_THROWS_AS(GamePair::coupled(PairKind::LogExp, 3, 0.0), rado::DataError);
  CHECK_THROWS_AS(GamePair::coupled(PairKind::LogExp, 3, -1.0), rado::DataError);
  auto sq = GamePair::coupled(PairKind::SquareMeanVar, 5, 2.0);
  CHECK(sq.mu_r == Approx(2.0 * 16.0));
  CHECK_NOTHROW(sq.validate_for(5));
  CHECK_THROWS_AS(sq.validate_for(4), rado::DataError);
}
