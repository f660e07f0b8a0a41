#pragma once

// Coordinate boosting over rados with the regularizer folded into the
// weight update, so the regularized exponential rado loss is minimized
// without ever materializing Minkowski-shifted rado sets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rado/core.hpp"
#include "rado/losses.hpp"
#include "rado/rados.hpp"
#include "rado/regularizers.hpp"

namespace rado {

struct BoostConfig {
  int T = 100;
  RegularizerSpec regularizer;
  double clamp_gamma = 0.98;  // ridge only
  WlMode wl_mode = WlMode::PreferenceOrder;
  SelectRule select = SelectRule::Last;
  std::uint64_t seed = 0;  // recorded for provenance; the loop is deterministic

  void validate() const {
    if (T < 1) throw DataError("BoostConfig: need T >= 1");
    if (!(clamp_gamma > 0.0 && clamp_gamma <= 1.0)) {
      throw DataError("BoostConfig: clamp_gamma must lie in (0,1]");
    }
    regularizer.validate();
  }
};

// Per-feature scales pi*_k = max_j |pi_jk|. A zero scale marks a dead
// feature (all rados vanish on that coordinate).
struct FeatureScale {
  std::vector<double> pi_star;

  static FeatureScale from(const RadoSet& rset) {
    FeatureScale out;
    out.pi_star.assign(rset.d(), 0.0);
    for (std::size_t j = 0; j < rset.n(); ++j) {
      auto row = rset.rados.row(j);
      for (std::size_t k = 0; k < rset.d(); ++k) {
        out.pi_star[k] = std::max(out.pi_star[k], std::abs(row[k]));
      }
    }
    return out;
  }
};

// Weighted scaled edge of feature k; lands in [-1,1] because the scale is
// the column's absolute maximum. Dead features get edge 0.
inline double edge(const RadoSet& rset, std::span<const double> w, std::size_t k,
                   const FeatureScale& scale) {
  if (w.size() != rset.n()) throw DataError("edge: weight count != n");
  if (k >= rset.d()) throw DataError("edge: feature index out of range");
  if (scale.pi_star[k] == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t j = 0; j < rset.n(); ++j) s += w[j] * rset.rados(j, k);
  return s / scale.pi_star[k];
}

// Leveraging coefficient alpha = log((1+r)/(1-r)) / (2 pi*_k). An edge of
// magnitude 1 means an infinite step; surfaced, never clamped here.
inline double alpha_update(double r, double pi_star_k) {
  if (!(pi_star_k > 0.0)) throw DataError("alpha_update: need pi*_k > 0");
  if (!(std::abs(r) < 1.0)) {
    throw NumericError("alpha_update: |edge| = 1 gives an infinite step");
  }
  return std::log((1.0 + r) / (1.0 - r)) / (2.0 * pi_star_k);
}

inline double clamp_edge_ridge(double r, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw DataError("clamp_edge_ridge: gamma must lie in (0,1)");
  }
  if (std::abs(r) <= gamma) return r;
  return r > 0.0 ? gamma : -gamma;
}

struct WeakChoice {
  std::size_t feature = 0;
  double r = 0.0;  // post-clamp under ridge
};

namespace detail {

// Shared weak-learner body; `compiled` must match config.regularizer.
inline WeakChoice weak_learner_impl(const RadoSet& rset, std::span<const double> w,
                                    const BoostConfig& config,
                                    std::span<const double> theta,
                                    const FeatureScale& scale,
                                    const CompiledRegularizer& compiled) {
  const std::size_t d = rset.d();
  if (theta.size() != d) throw DataError("weak_learner: theta dimension mismatch");
  // clamp_gamma = 1 switches the ridge clamp off entirely.
  const bool ridge =
      config.regularizer.kind == RegKind::Ridge && config.clamp_gamma < 1.0;
  const double omega = config.regularizer.omega;

  std::vector<double> edges(d, 0.0);
  bool any_live = false;
  for (std::size_t k = 0; k < d; ++k) {
    if (scale.pi_star[k] == 0.0) continue;
    any_live = true;
    edges[k] = edge(rset, w, k, scale);
  }
  if (!any_live) throw DataError("weak_learner: all features are dead");

  const bool use_preference =
      config.wl_mode == WlMode::PreferenceOrder && omega > 0.0;

  std::size_t best_k = d;
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<double> probe(theta.begin(), theta.end());
  const double omega_at_theta = use_preference ? compiled.value(theta) : 0.0;

  for (std::size_t k = 0; k < d; ++k) {
    if (scale.pi_star[k] == 0.0) continue;
    const double r_raw = edges[k];
    const double r_eff = ridge ? clamp_edge_ridge(r_raw, config.clamp_gamma) : r_raw;
    double score = std::abs(r_raw);
    if (use_preference) {
      if (!(std::abs(r_eff) < 1.0)) {
        throw NumericError("weak_learner: |edge| = 1 on feature " + std::to_string(k));
      }
      // Lookahead of the real update: delta uses the alpha that would be
      // applied, post-clamp under ridge.
      const double alpha = alpha_update(r_eff, scale.pi_star[k]);
      probe[k] = theta[k] + alpha;
      const double delta = omega * (compiled.value(probe) - omega_at_theta);
      probe[k] = theta[k];
      score = std::abs(r_raw) - delta;
    }
    if (score > best_score) {  // strict: ties keep the lowest index
      best_score = score;
      best_k = k;
    }
  }
  const double r_raw = edges[best_k];
  return {best_k, ridge ? clamp_edge_ridge(r_raw, config.clamp_gamma) : r_raw};
}

}  // namespace detail

inline WeakChoice weak_learner(const RadoSet& rset, std::span<const double> w,
                               const BoostConfig& config,
                               std::span<const double> theta) {
  const FeatureScale scale = FeatureScale::from(rset);
  const CompiledRegularizer compiled(config.regularizer, rset.d());
  return detail::weak_learner_impl(rset, w, config, theta, scale, compiled);
}

// Normalized regularized exponential rado loss
//   (1/n) sum_j exp(-theta^T pi_j + omega * Omega(theta)),
// kept in log space; `value` degrades to +inf with `overflowed` set when the
// plain number is not representable.
inline LossValue regularized_exp_rado_loss(const RadoSet& rset,
                                           std::span<const double> theta,
                                           const RegularizerSpec& spec) {
  rset.validate();
  if (theta.size() != rset.d()) {
    throw DataError("regularized_exp_rado_loss: theta dimension mismatch");
  }
  std::vector<double> exponents(rset.n());
  for (std::size_t j = 0; j < rset.n(); ++j) {
    exponents[j] = -dot(theta, rset.rados.row(j));
  }
  double log_value = logsumexp(exponents) - std::log(static_cast<double>(rset.n()));
  if (!is_zero_vector(theta) && spec.omega > 0.0) {
    log_value += spec.omega * omega_value(spec, theta);
  }
  return LossValue::from_log(log_value);
}

constexpr double kWeightFloor = 1e-300;

inline LinearModel boost(const RadoSet& rset, const BoostConfig& config) {
  rset.validate();
  config.validate();
  const std::size_t n = rset.n();
  const std::size_t d = rset.d();
  const FeatureScale scale = FeatureScale::from(rset);
  const CompiledRegularizer compiled(config.regularizer, d);
  const double omega = config.regularizer.omega;

  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  std::vector<double> theta(d, 0.0);
  std::vector<double> factors(n);

  LinearModel model;
  model.regularizer = config.regularizer;
  model.feature_names = rset.feature_names;
  model.history.reserve(static_cast<std::size_t>(config.T));

  // Running -theta^T pi_j, for best-iterate selection on the training set.
  const bool track_best = config.select == SelectRule::BestOnTraining;
  std::vector<double> exponents;
  if (track_best) exponents.assign(n, 0.0);
  double best_log_loss = std::numeric_limits<double>::infinity();
  std::vector<double> best_theta(d, 0.0);
  int best_t = 0;

  double omega_at_theta = 0.0;  // Omega(theta_{t-1})
  for (int t = 1; t <= config.T; ++t) {
    WeakChoice choice;
    double alpha;
    try {
      choice = detail::weak_learner_impl(rset, w, config, theta, scale, compiled);
      alpha = alpha_update(choice.r, scale.pi_star[choice.feature]);
    } catch (const NumericError& err) {
      throw NumericError("boost: iteration " + std::to_string(t) + ": " + err.what());
    }

    theta[choice.feature] += alpha;
    const double omega_new = compiled.value(theta);
    const double delta = omega * (omega_new - omega_at_theta);
    omega_at_theta = omega_new;

    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      factors[j] = std::exp(-alpha * rset.rados(j, choice.feature));
      sum += w[j] * factors[j];
    }
    const double z_norm = std::exp(delta) * sum;
    bool floored = false;
    for (std::size_t j = 0; j < n; ++j) {
      w[j] = w[j] * factors[j] / sum;
      if (w[j] < kWeightFloor) {
        w[j] = kWeightFloor;
        floored = true;
        ++model.underflow_events;
      }
    }
    if (floored) {
      double renorm = 0.0;
      for (double wj : w) renorm += wj;
      for (double& wj : w) wj /= renorm;
    }

    model.history.push_back({t, static_cast<int>(choice.feature), alpha, choice.r,
                             delta, z_norm});

    if (track_best) {
      for (std::size_t j = 0; j < n; ++j) {
        exponents[j] -= alpha * rset.rados(j, choice.feature);
      }
      double log_loss = logsumexp(exponents) - std::log(static_cast<double>(n));
      if (omega > 0.0 && !is_zero_vector(theta)) log_loss += omega * omega_new;
      if (log_loss < best_log_loss) {
        best_log_loss = log_loss;
        best_theta = theta;
        best_t = t;
      }
    }
  }

  model.iterations_run = config.T;
  if (track_best) {
    model.theta = best_theta;
    model.selected_iteration = best_t;
  } else {
    model.theta = theta;
    model.selected_iteration = config.T;
  }
  model.scaling = rset.scaling;
  model.clamp_gamma = config.clamp_gamma;
  model.wl_mode = config.wl_mode;
  model.select = config.select;
  model.seed = config.seed;
  model.validate();
  return model;
}

// The example-space comparator: boosting over the n = m singleton rados
// (one edge vector each), which minimizes the exponential example loss.
inline RadoSet singleton_rados(const Dataset& ds) {
  ds.validate();
  RadoSet out;
  out.rados = edge_vectors(ds);
  out.provenance = {RadoMode::PlainRandom, std::nullopt, std::nullopt, std::nullopt,
                    ds.m()};
  out.feature_names = ds.feature_names;
  return out;
}

inline LinearModel baseline_example_boost(const Dataset& ds, const BoostConfig& config) {
  return boost(singleton_rados(ds), config);
}

// Sum of log Z_t over the recorded history; exp of it telescopes to the
// final regularized loss.
inline double log_z_product(const LinearModel& model) {
  double s = 0.0;
  for (const auto& rec : model.history) s += std::log(rec.z_norm);
  return s;
}

}  // namespace rado
