#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "rado/boost.hpp"
#include "rado/rados.hpp"
#include "test_helpers.hpp"

using Catch::Approx;
using rado::BoostConfig;
using rado::RegKind;
using rado::RegularizerSpec;

namespace {

rado::RadoSet rados_from_rows(const std::vector<std::vector<double>>& rows) {
  rado::RadoSet rset;
  rset.rados = rado::Matrix(rows.size(), rows[0].size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (std::size_t k = 0; k < rows[0].size(); ++k) rset.rados(j, k) = rows[j][k];
  }
  rset.provenance.source_m = rows.size();
  return rset;
}

rado::RadoSet random_rados(std::size_t n, std::size_t d, unsigned seed,
                           double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, scale);
  rado::RadoSet rset;
  rset.rados = rado::Matrix(n, d);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < d; ++k) rset.rados(j, k) = gauss(rng);
  }
  rset.provenance.source_m = n;
  return rset;
}

BoostConfig config_for(RegKind kind, double omega, int T) {
  BoostConfig config;
  config.T = T;
  config.regularizer.kind = kind;
  config.regularizer.omega = omega;
  return config;
}

// Re-derives the whole weight path from the recorded history and checks the
// recorded edges, alphas and normalizers against it.
void replay_and_check(const rado::RadoSet& rset, const rado::LinearModel& model,
                      double clamp_gamma) {
  const std::size_t n = rset.n();
  const auto scale = rado::FeatureScale::from(rset);
  const rado::CompiledRegularizer reg(model.regularizer, rset.d());
  const double omega = model.regularizer.omega;
  const bool ridge = model.regularizer.kind == RegKind::Ridge;

  std::vector<double> w(n, 1.0 / double(n));
  std::vector<double> theta(rset.d(), 0.0);
  double omega_prev = 0.0;
  for (const auto& rec : model.history) {
    const std::size_t k = static_cast<std::size_t>(rec.feature);
    double r = rado::edge(rset, w, k, scale);
    if (ridge) r = rado::clamp_edge_ridge(r, clamp_gamma);
    REQUIRE(rec.edge_r == Approx(r).margin(1e-12));
    const double alpha = rado::alpha_update(r, scale.pi_star[k]);
    REQUIRE(rec.alpha == Approx(alpha).margin(1e-12));

    theta[k] += alpha;
    const double omega_now = reg.value(theta);
    REQUIRE(rec.delta == Approx(omega * (omega_now - omega_prev)).margin(1e-10));
    omega_prev = omega_now;

    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      w[j] *= std::exp(-alpha * rset.rados(j, k) + rec.delta);
      z += w[j];
    }
    REQUIRE(rec.z_norm == Approx(z).epsilon(1e-12));
    double total = 0.0;
    for (auto& wj : w) {
      wj /= z;
      REQUIRE(wj >= 0.0);
      total += wj;
    }
    REQUIRE(std::abs(total - 1.0) < 1e-12);
  }
}

}  // namespace

TEST_CASE("edge scales the weighted column mean into [-1,1]", "[boost]") {
  auto rset = rados_from_rows({{3.0}, {3.0}, {3.0}});
  std::vector<double> w(3, 1.0 / 3.0);
  auto scale = rado::FeatureScale::from(rset);
  CHECK(rado::edge(rset, w, 0, scale) == Approx(1.0));

  auto mixed = rados_from_rows({{2.0}, {-1.0}, {1.0}});
  scale = rado::FeatureScale::from(mixed);
  CHECK(rado::edge(mixed, w, 0, scale) == Approx(1.0 / 3.0));

  std::vector<double> concentrated{0.0, 1.0, 0.0};
  auto extreme = rados_from_rows({{2.0}, {-2.0}, {1.0}});
  scale = rado::FeatureScale::from(extreme);
  CHECK(rado::edge(extreme, concentrated, 0, scale) == Approx(-1.0));

  auto dead = rados_from_rows({{0.0, 1.0}, {0.0, -1.0}});
  scale = rado::FeatureScale::from(dead);
  std::vector<double> w2(2, 0.5);
  CHECK(rado::edge(dead, w2, 0, scale) == 0.0);
}

TEST_CASE("alpha inverts the edge map", "[boost]") {
  CHECK(rado::alpha_update(0.0, 1.0) == 0.0);
  CHECK(rado::alpha_update(std::tanh(1.0), 1.0) == Approx(1.0).margin(1e-12));
  CHECK(rado::alpha_update(1.0 / 3.0, 2.0) ==
        Approx(0.25 * std::numbers::ln2).margin(1e-12));
  CHECK_THROWS_AS(rado::alpha_update(1.0, 1.0), rado::NumericError);
  CHECK_THROWS_AS(rado::alpha_update(-1.0, 1.0), rado::NumericError);
  CHECK_THROWS_AS(rado::alpha_update(0.5, 0.0), rado::DataError);
}

TEST_CASE("ridge clamp preserves sign and passes small edges", "[boost]") {
  CHECK(rado::clamp_edge_ridge(0.5, 0.98) == 0.5);
  CHECK(rado::clamp_edge_ridge(0.995, 0.98) == Approx(0.98));
  CHECK(rado::clamp_edge_ridge(-0.999, 0.98) == Approx(-0.98));
  CHECK_THROWS_AS(rado::clamp_edge_ridge(0.5, 1.0), rado::DataError);
}

TEST_CASE("weak learner ranking", "[boost]") {
  SECTION("a single live feature wins in every mode") {
    auto rset = rados_from_rows({{0.0, 2.0}, {0.0, -1.0}, {0.0, 1.0}});
    std::vector<double> w(3, 1.0 / 3.0);
    std::vector<double> theta(2, 0.0);
    for (auto mode : {rado::WlMode::FirstAdmissible, rado::WlMode::PreferenceOrder}) {
      auto config = config_for(RegKind::Lasso, 0.5, 1);
      config.wl_mode = mode;
      auto choice = rado::weak_learner(rset, w, config, theta);
      CHECK(choice.feature == 1);
      CHECK(choice.r == Approx(1.0 / 3.0));
    }
  }
  SECTION("omega = 0 preference order degenerates to argmax |r|") {
    auto rset = random_rados(10, 5, 77);
    std::vector<double> w(10, 0.1);
    std::vector<double> theta(5, 0.0);
    auto pref = config_for(RegKind::Lasso, 0.0, 1);
    auto first = pref;
    first.wl_mode = rado::WlMode::FirstAdmissible;
    auto a = rado::weak_learner(rset, w, pref, theta);
    auto b = rado::weak_learner(rset, w, first, theta);
    CHECK(a.feature == b.feature);
    CHECK(a.r == b.r);
  }
  SECTION("the regularization increment breaks exact |r| ties") {
    // Identical columns, so |r1| = |r2|; theta already spends the sup-norm
    // budget on feature 0, making delta_1 > 0 = delta_2.
    auto rset = rados_from_rows({{2.0, 2.0}, {-1.0, -1.0}, {1.0, 1.0}});
    std::vector<double> w(3, 1.0 / 3.0);
    std::vector<double> theta{10.0, 0.0};
    auto pref = config_for(RegKind::LInf, 0.5, 1);
    auto choice = rado::weak_learner(rset, w, pref, theta);
    CHECK(choice.feature == 1);

    auto first = pref;
    first.wl_mode = rado::WlMode::FirstAdmissible;
    choice = rado::weak_learner(rset, w, first, theta);
    CHECK(choice.feature == 0);  // tie resolves to the lowest index
  }
  SECTION("all features dead") {
    auto rset = rados_from_rows({{0.0, 0.0}, {0.0, 0.0}});
    std::vector<double> w(2, 0.5);
    std::vector<double> theta(2, 0.0);
    auto config = config_for(RegKind::Lasso, 0.0, 1);
    CHECK_THROWS_AS(rado::weak_learner(rset, w, config, theta), rado::DataError);
  }
}

TEST_CASE("regularized exponential rado loss", "[boost]") {
  auto rset = rados_from_rows({{1.0, 0.0}});
  RegularizerSpec lasso;

  std::vector<double> zero(2, 0.0);
  CHECK(rado::regularized_exp_rado_loss(rset, zero, lasso).value == Approx(1.0));

  std::vector<double> theta{1.0, 0.0};
  CHECK(rado::regularized_exp_rado_loss(rset, theta, lasso).value ==
        Approx(std::exp(-1.0)).margin(1e-12));

  // omega > 0 factors out of the mean as exp(omega * Omega(theta)).
  auto multi = random_rados(6, 2, 5);
  RegularizerSpec strong = lasso;
  strong.omega = 0.7;
  std::vector<double> th{0.3, -1.2};
  const double omega_val = rado::omega_value(strong, th);
  const double base = rado::regularized_exp_rado_loss(multi, th, lasso).value;
  CHECK(rado::regularized_exp_rado_loss(multi, th, strong).value ==
        Approx(std::exp(0.7 * omega_val) * base).epsilon(1e-12));
}

TEST_CASE("one boosting step on the worked column", "[boost]") {
  auto rset = rados_from_rows({{2.0}, {-1.0}, {1.0}});
  auto model = rado::boost(rset, config_for(RegKind::Lasso, 0.0, 1));
  REQUIRE(model.history.size() == 1);
  CHECK(model.history[0].edge_r == Approx(1.0 / 3.0));
  CHECK(model.history[0].alpha == Approx(0.25 * std::numbers::ln2).margin(1e-12));
  CHECK(model.theta[0] == Approx(0.1732868).margin(1e-7));
  const double z_expect =
      (std::pow(2.0, -0.5) + std::pow(2.0, 0.25) + std::pow(2.0, -0.25)) / 3.0;
  CHECK(model.history[0].z_norm == Approx(z_expect).epsilon(1e-12));
  CHECK(model.history[0].z_norm == Approx(0.9124034).margin(1e-7));
}

TEST_CASE("a perfectly aligned column surfaces the infinite step", "[boost]") {
  auto rset = rados_from_rows({{2.0}, {2.0}});
  CHECK_THROWS_WITH(rado::boost(rset, config_for(RegKind::Lasso, 0.0, 1)),
                    Catch::Matchers::ContainsSubstring("iteration 1"));
}

TEST_CASE("history replay: weights stay on the simplex, records are exact",
          "[boost]") {
  for (auto kind : {RegKind::Lasso, RegKind::Ridge, RegKind::LInf, RegKind::Slope}) {
    auto rset = random_rados(20, 4, 11 + static_cast<unsigned>(kind), 2.0);
    auto config = config_for(kind, 0.05, 40);
    auto model = rado::boost(rset, config);
    replay_and_check(rset, model, config.clamp_gamma);
  }
}

TEST_CASE("product of normalizers telescopes to the final loss", "[boost]") {
  for (auto kind : {RegKind::Lasso, RegKind::Ridge, RegKind::LInf, RegKind::Slope}) {
    auto rset = random_rados(50, 5, 3 + static_cast<unsigned>(kind));
    auto config = config_for(kind, 0.02, 100);
    auto model = rado::boost(rset, config);
    const double log_prod = rado::log_z_product(model);
    const auto loss =
        rado::regularized_exp_rado_loss(rset, model.theta, config.regularizer);
    CHECK(std::abs(std::expm1(log_prod - loss.log_value)) < 1e-8);
  }
}

TEST_CASE("minkowski-shifted rados give the same exponents as the fold-in",
          "[boost]") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> gauss;
  auto rset = random_rados(12, 4, 9);
  for (auto kind : {RegKind::Lasso, RegKind::Ridge, RegKind::LInf, RegKind::Slope}) {
    RegularizerSpec spec;
    spec.kind = kind;
    spec.omega = 0.3;
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<double> theta(4);
      for (auto& v : theta) v = gauss(rng);
      const double omega_val = rado::omega_value(spec, theta);
      auto shifted = rado::regularize_rados(rset, theta, spec.omega, omega_val);
      for (std::size_t j = 0; j < rset.n(); ++j) {
        const double direct =
            rado::dot(theta, rset.rados.row(j)) - spec.omega * omega_val;
        const double via_shift = rado::dot(theta, shifted.rados.row(j));
        CHECK(via_shift == Approx(direct).epsilon(1e-9).margin(1e-12));
      }
    }
  }
}

TEST_CASE("best-on-training selection never loses to the last iterate", "[boost]") {
  // A strong lasso penalty makes the regularized loss grow after the first
  // few steps, so the best iterate appears strictly before T.
  auto rset = random_rados(8, 6, 33, 3.0);
  auto last_config = config_for(RegKind::Lasso, 1.0, 60);
  auto best_config = last_config;
  best_config.select = rado::SelectRule::BestOnTraining;
  auto last = rado::boost(rset, last_config);
  auto best = rado::boost(rset, best_config);
  CHECK(best.selected_iteration >= 1);
  CHECK(best.selected_iteration < 60);
  const double loss_last =
      rado::regularized_exp_rado_loss(rset, last.theta, last_config.regularizer)
          .log_value;
  const double loss_best =
      rado::regularized_exp_rado_loss(rset, best.theta, best_config.regularizer)
          .log_value;
  CHECK(loss_best < loss_last);
  // Same history either way; only the exported iterate differs.
  REQUIRE(best.history.size() == last.history.size());
  for (std::size_t t = 0; t < best.history.size(); ++t) {
    CHECK(best.history[t].alpha == last.history[t].alpha);
  }
}

TEST_CASE("boosting drives the training loss down exponentially", "[boost]") {
  // Every rado coordinate is positive with bounded spread, so every edge
  // stays above (min pi) / (max pi).
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unif(1.0, 2.0);
  rado::RadoSet rset;
  rset.rados = rado::Matrix(30, 3);
  for (std::size_t j = 0; j < 30; ++j) {
    for (std::size_t k = 0; k < 3; ++k) rset.rados(j, k) = unif(rng);
  }
  rset.provenance.source_m = 30;
  const int T = 80;
  auto model = rado::boost(rset, config_for(RegKind::Lasso, 0.0, T));
  double gamma_hat = 1.0;
  for (const auto& rec : model.history) {
    gamma_hat = std::min(gamma_hat, std::abs(rec.edge_r));
  }
  CHECK(gamma_hat >= 0.2);
  const auto loss = rado::regularized_exp_rado_loss(rset, model.theta,
                                                    model.regularizer);
  CHECK(loss.log_value <= -gamma_hat * gamma_hat * T / 2.0);
}

TEST_CASE("baseline boosting over examples is boosting over singleton rados",
          "[boost]") {
  auto ds = testutil::random_dataset(10, 3, 55);
  auto config = config_for(RegKind::Lasso, 0.0, 15);
  auto direct = rado::baseline_example_boost(ds, config);
  auto manual = rado::boost(rado::singleton_rados(ds), config);
  CHECK(direct.theta == manual.theta);
  REQUIRE(direct.history.size() == manual.history.size());
  for (std::size_t t = 0; t < direct.history.size(); ++t) {
    CHECK(direct.history[t].feature == manual.history[t].feature);
    CHECK(direct.history[t].alpha == manual.history[t].alpha);
  }

  // Separable two-point data: training error reaches 0 well within 50 rounds.
  auto two = testutil::two_point_dataset();
  auto trained = rado::baseline_example_boost(two, config_for(RegKind::Lasso, 0.0, 50));
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < two.m(); ++i) {
    if (rado::predict(trained, two.features.row(i)).label != two.labels[i]) ++wrong;
  }
  CHECK(wrong == 0);

  // omega = 0 telescoping holds on the baseline too.
  const auto loss =
      rado::regularized_exp_rado_loss(rado::singleton_rados(two), trained.theta,
                                      trained.regularizer);
  CHECK(std::abs(std::expm1(rado::log_z_product(trained) - loss.log_value)) < 1e-8);
}

TEST_CASE("training is bit-reproducible", "[boost]") {
  auto rset = random_rados(25, 4, 8);
  auto config = config_for(RegKind::Slope, 0.1, 30);
  const unsigned saved = rado::thread_cap();
  rado::set_thread_cap(1);
  auto a = rado::boost(rset, config);
  rado::set_thread_cap(8);
  auto b = rado::boost(rset, config);
  rado::set_thread_cap(saved);
  CHECK(a.theta == b.theta);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t t = 0; t < a.history.size(); ++t) {
    CHECK(a.history[t].z_norm == b.history[t].z_norm);
  }
}

TEST_CASE("weight underflow is floored, counted, and survivable", "[boost]") {
  // The weight ratio between the two rados shrinks by roughly
  // exp(-atanh(r) (1 - 550/1000)) ~ e^-0.28 per round, crossing the 1e-300
  // floor after ~2500 rounds.
  auto rset = rados_from_rows({{550.0}, {1000.0}});
  auto config = config_for(RegKind::Lasso, 0.0, 3000);
  auto model = rado::boost(rset, config);
  CHECK(model.underflow_events > 0);
  CHECK(model.iterations_run == 3000);
  model.validate();
  for (const auto& rec : model.history) {
    CHECK(rec.z_norm > 0.0);
    CHECK(std::isfinite(rec.alpha));
  }
}

TEST_CASE("clamp_gamma = 1 disables the ridge clamp", "[boost]") {
  auto rset = random_rados(10, 2, 3);
  auto config = config_for(RegKind::Ridge, 0.01, 20);
  config.clamp_gamma = 1.0;
  auto model = rado::boost(rset, config);  // edges stay below 1 on this data
  for (const auto& rec : model.history) {
    CHECK(std::abs(rec.edge_r) < 1.0);
  }
  // A degenerate column now surfaces the infinite step instead of clamping.
  auto degenerate = rados_from_rows({{2.0}, {2.0}});
  auto bad = config_for(RegKind::Ridge, 0.0, 3);
  bad.clamp_gamma = 1.0;
  CHECK_THROWS_AS(rado::boost(degenerate, bad), rado::NumericError);
  bad.clamp_gamma = 0.98;
  CHECK_NOTHROW(rado::boost(degenerate, bad));
}

TEST_CASE("exp loss reports log-domain values past double range", "[boost]") {
  auto rset = rados_from_rows({{-1000.0}, {-900.0}});
  std::vector<double> theta{1.0};
  RegularizerSpec lasso;
  const auto loss = rado::regularized_exp_rado_loss(rset, theta, lasso);
  CHECK(loss.overflowed);
  CHECK(std::isinf(loss.value));
  CHECK(loss.log_value == Approx(1000.0 - std::numbers::ln2 +
                                 std::log1p(std::exp(-100.0))));
  const auto sums = rado::subset_sums(std::vector<double>{-800.0, -750.0});
  const auto big = rado::exp_rado_loss(sums, 1.0);
  CHECK(big.overflowed);
  CHECK(std::isfinite(big.log_value));
}
