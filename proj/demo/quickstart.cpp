// End-to-end tour of the library API: build a dataset, sample rados, boost a
// regularized model, check the loss telescoping, and deliver a private copy.

#include <cstdio>
#include <random>

#include "rado/boost.hpp"
#include "rado/losses.hpp"
#include "rado/privacy.hpp"
#include "rado/rados.hpp"

int main() {
  // A toy two-class dataset in R^3.
  std::mt19937_64 rng(1);
  std::normal_distribution<double> gauss;
  rado::Dataset ds;
  const std::size_t m = 40;
  ds.features = rado::Matrix(m, 3);
  ds.labels.resize(m);
  ds.feature_names = {"x0", "x1", "x2"};
  for (std::size_t i = 0; i < m; ++i) {
    const int label = i % 2 == 0 ? 1 : -1;
    ds.labels[i] = label;
    ds.features(i, 0) = label * 1.5 + gauss(rng);
    ds.features(i, 1) = gauss(rng);
    ds.features(i, 2) = label * 0.5 + gauss(rng);
  }

  // n = m plain random rados.
  const rado::RadoSet rset = rado::sample_plain(ds, m, /*seed=*/7);

  // Slope-regularized boosting, keeping the best iterate on training loss.
  rado::BoostConfig config;
  config.T = 200;
  config.regularizer.kind = rado::RegKind::Slope;
  config.regularizer.slope_q = 0.05;
  config.regularizer.omega = 1.0;
  config.select = rado::SelectRule::BestOnTraining;
  const rado::LinearModel model = rado::boost(rset, config);

  const auto loss = rado::regularized_exp_rado_loss(rset, model.theta,
                                                    config.regularizer);
  std::printf("selected iterate t=%d, regularized exp-rado-loss %.3e (log %.2f)\n",
              model.selected_iteration, loss.value, loss.log_value);
  std::printf("theta = (%.4f, %.4f, %.4f)\n", model.theta[0], model.theta[1],
              model.theta[2]);

  std::size_t wrong = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (rado::predict(model, ds.features.row(i)).label != ds.labels[i]) ++wrong;
  }
  std::printf("training error %.1f%%\n", 100.0 * double(wrong) / double(m));

  // The example/rado equivalence gap at small scale: constant across payoffs.
  const auto pair = rado::GamePair::coupled(rado::PairKind::LogExp, 6);
  const auto stats = rado::equivalence_gap_constancy(pair, 50, 6, 3);
  std::printf("log/exp gap: mean %.6f, spread %.2e\n", stats.mean, stats.stdev);

  // Differentially private delivery of the same rados.
  const rado::DpParams params = rado::make_dp_params(ds, /*epsilon=*/0.1, /*seed=*/11);
  const rado::RadoSet shielded = rado::dp_protect(rset, params);
  std::printf("protected %zu rados at epsilon=%.2f (noise scale %.1f), eps_a=%.2e\n",
              shielded.n(), params.epsilon, rado::dp_noise_scale(params, rset.n()),
              rado::epsilon_a(params.epsilon, rset.n(), m));
  return 0;
}
