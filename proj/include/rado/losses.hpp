#pragma once

// The four example/rado loss pairs (exponential, mean-variance, ReLU,
// unhinged) and a brute-force two-player-game oracle that evaluates both
// optimal payoffs by full subset enumeration, used to verify that each pair
// differs by a z-independent constant.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rado/core.hpp"
#include "rado/normal.hpp"
#include "rado/rng.hpp"

namespace rado {

inline double logsumexp(std::span<const double> xs) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : xs) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - hi);
  return hi + std::log(s);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

enum class PairKind { LogExp, SquareMeanVar, Relu, Unhinged };

inline std::string to_string(PairKind kind) {
  switch (kind) {
    case PairKind::LogExp: return "logexp";
    case PairKind::SquareMeanVar: return "square";
    case PairKind::Relu: return "relu";
    case PairKind::Unhinged: return "unhinged";
  }
  return "?";
}

// A generator pair together with its mu coupling. LogExp needs mu_e = mu_r;
// the mean-variance pair needs mu_e = mu_r / 2^{m-1} at the m it is
// evaluated on; the nondifferentiable pairs accept anything.
struct GamePair {
  PairKind kind = PairKind::LogExp;
  double mu_e = 1.0;
  double mu_r = 1.0;

  // The coupled pair for a given m, with mu_e = mu.
  static GamePair coupled(PairKind kind, std::size_t m, double mu = 1.0) {
    if (!(mu > 0.0)) throw DataError("GamePair: mu must be > 0");
    switch (kind) {
      case PairKind::LogExp: return {kind, mu, mu};
      case PairKind::SquareMeanVar:
        return {kind, mu, mu * std::ldexp(1.0, static_cast<int>(m) - 1)};
      default: return {kind, mu, mu};
    }
  }

  void validate_for(std::size_t m) const {
    if (!(mu_e > 0.0 && mu_r > 0.0)) throw DataError("GamePair: mu must be > 0");
    switch (kind) {
      case PairKind::LogExp:
        if (std::abs(mu_e - mu_r) > 1e-12 * std::max(mu_e, mu_r)) {
          throw DataError("GamePair: log/exp pair needs mu_e = mu_r");
        }
        break;
      case PairKind::SquareMeanVar: {
        const double want = mu_r / std::ldexp(1.0, static_cast<int>(m) - 1);
        if (std::abs(mu_e - want) > 1e-12 * std::max(mu_e, want)) {
          throw DataError("GamePair: mean-variance pair needs mu_e = mu_r / 2^(m-1)");
        }
        break;
      }
      default:
        break;
    }
  }
};

// Subset sums S_I = sum_{i in I} z_i for every I, indexed so that bit i of
// the row index is set iff i belongs to I. Same convention everywhere.
inline std::vector<double> subset_sums(std::span<const double> z) {
  const std::size_t m = z.size();
  if (m > 26) throw DataError("subset_sums: m too large to enumerate");
  std::vector<double> sums(std::size_t{1} << m, 0.0);
  for (std::size_t idx = 1; idx < sums.size(); ++idx) {
    const std::size_t prev = idx & (idx - 1);
    const unsigned bit = static_cast<unsigned>(std::countr_zero(idx));
    sums[idx] = sums[prev] + z[bit];
  }
  return sums;
}

inline std::size_t subset_count_to_m(std::size_t count, const char* who) {
  if (count == 0 || (count & (count - 1)) != 0) {
    throw DataError(std::string(who) + ": length must be a power of two");
  }
  return static_cast<std::size_t>(std::countr_zero(count));
}

inline double example_loss(PairKind kind, std::span<const double> z, double mu) {
  if (!(mu > 0.0)) throw DataError("example_loss: mu must be > 0");
  double s = 0.0;
  switch (kind) {
    case PairKind::LogExp:
      for (double zi : z) s += softplus(-zi / mu);
      return s;
    case PairKind::SquareMeanVar:
      for (double zi : z) {
        const double t = 1.0 - zi / mu;
        s += t * t;
      }
      return s;
    case PairKind::Relu:
      for (double zi : z) s += std::max(0.0, -zi / mu);
      return s;
    case PairKind::Unhinged:
      for (double zi : z) s -= zi / mu;
      return s;
  }
  throw DataError("example_loss: unknown kind");
}

// Log of the exponential rado loss sum_I exp(-S_I / mu), always finite.
inline double log_exp_rado_loss(std::span<const double> sums, double mu_r) {
  std::vector<double> ex(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) ex[i] = -sums[i] / mu_r;
  return logsumexp(ex);
}

// Exponential aggregate carried in log space; `value` is the plain number
// when representable and +inf with `overflowed` set otherwise.
struct LossValue {
  double value = 0.0;
  double log_value = 0.0;
  bool overflowed = false;

  static LossValue from_log(double log_value) {
    LossValue out;
    out.log_value = log_value;
    out.overflowed = log_value >= std::log(std::numeric_limits<double>::max());
    out.value = out.overflowed ? std::numeric_limits<double>::infinity()
                               : std::exp(log_value);
    return out;
  }
};

inline LossValue exp_rado_loss(std::span<const double> sums, double mu_r) {
  return LossValue::from_log(log_exp_rado_loss(sums, mu_r));
}

inline double rado_loss(PairKind kind, std::span<const double> subset_sums_in,
                        double mu_r) {
  if (!(mu_r > 0.0)) throw DataError("rado_loss: mu must be > 0");
  const std::size_t m = subset_count_to_m(subset_sums_in.size(), "rado_loss");
  const double count = static_cast<double>(subset_sums_in.size());
  switch (kind) {
    case PairKind::LogExp:
      // Aggregated in log space; +inf signals an unrepresentable plain value.
      return std::exp(log_exp_rado_loss(subset_sums_in, mu_r));
    case PairKind::SquareMeanVar: {
      double mean = 0.0;
      for (double s : subset_sums_in) mean += s;
      mean /= count;
      double var = 0.0;
      for (double s : subset_sums_in) var += (s - mean) * (s - mean);
      var /= count;  // uniform weights over subsets
      const double coeff = std::ldexp(1.0, static_cast<int>(m) - 1) / mu_r;
      return -(mean - coeff * var);
    }
    case PairKind::Relu: {
      double worst = 0.0;
      for (double s : subset_sums_in) worst = std::max(worst, -s / mu_r);
      return worst;
    }
    case PairKind::Unhinged: {
      double s = 0.0;
      for (double v : subset_sums_in) s -= v / mu_r;
      return s / count;
    }
  }
  throw DataError("rado_loss: unknown kind");
}

// Both optimal game values, the adversary's optimizers, and the simplex
// multiplier when one exists.
struct GameEvaluation {
  double l_e_star = 0.0;
  double l_r_star = 0.0;
  std::vector<double> p_star;            // length m
  std::vector<double> q_star;            // length 2^m
  std::optional<double> lambda;          // LogExp / SquareMeanVar only
};

// p_i = sum over subsets containing i of q_I (the subset-indicator matrix
// applied to q).
inline std::vector<double> indicator_matrix_times_q(std::size_t m,
                                                    std::span<const double> q) {
  if (q.size() != (std::size_t{1} << m)) {
    throw DataError("indicator_matrix_times_q: size mismatch");
  }
  std::vector<double> p(m, 0.0);
  for (std::size_t idx = 0; idx < q.size(); ++idx) {
    for (std::size_t i = 0; i < m; ++i) {
      if (idx & (std::size_t{1} << i)) p[i] += q[idx];
    }
  }
  return p;
}

constexpr std::size_t kGameEnumerationCap = 12;

inline GameEvaluation brute_force_game(const GamePair& pair, std::span<const double> z) {
  const std::size_t m = z.size();
  if (m < 1) throw DataError("brute_force_game: need m >= 1");
  if (m > kGameEnumerationCap) {
    throw DataError("brute_force_game: m = " + std::to_string(m) +
                    " exceeds enumeration cap " + std::to_string(kGameEnumerationCap));
  }
  pair.validate_for(m);
  const std::vector<double> sums = subset_sums(z);
  const std::size_t total = sums.size();

  GameEvaluation ev;
  ev.p_star.resize(m);
  ev.q_star.assign(total, 0.0);

  auto xlogx = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };

  switch (pair.kind) {
    case PairKind::LogExp: {
      const double mu = pair.mu_e;
      for (std::size_t i = 0; i < m; ++i) {
        ev.p_star[i] = 1.0 / (1.0 + std::exp(z[i] / mu));
      }
      const double lse = log_exp_rado_loss(sums, mu);
      for (std::size_t idx = 0; idx < total; ++idx) {
        ev.q_star[idx] = std::exp(-sums[idx] / mu - lse);
      }
      ev.lambda = -mu * lse;
      double le = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double p = ev.p_star[i];
        le += p * z[i] + mu * (xlogx(p) + xlogx(1.0 - p) - 1.0);
      }
      double lr = 0.0;
      for (std::size_t idx = 0; idx < total; ++idx) {
        const double q = ev.q_star[idx];
        lr += q * sums[idx] + mu * (xlogx(q) - q);
      }
      ev.l_e_star = le;
      ev.l_r_star = lr;
      break;
    }
    case PairKind::SquareMeanVar: {
      const double mu_e = pair.mu_e;
      const double mu_r = pair.mu_r;
      double zsum = 0.0;
      for (double zi : z) zsum += zi;
      for (std::size_t i = 0; i < m; ++i) ev.p_star[i] = 0.5 * (1.0 - z[i] / mu_e);
      const double base = 1.0 / static_cast<double>(total);
      for (std::size_t idx = 0; idx < total; ++idx) {
        ev.q_star[idx] = base - sums[idx] / mu_r + zsum / (2.0 * mu_r);
      }
      ev.lambda = mu_r * base + 0.5 * zsum;
      double le = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double p = ev.p_star[i];
        le += p * z[i] + mu_e * 0.5 * (1.0 - 2.0 * p * (1.0 - p));
      }
      double lr = 0.0;
      for (std::size_t idx = 0; idx < total; ++idx) {
        const double q = ev.q_star[idx];
        lr += q * sums[idx] + mu_r * 0.5 * q * q;
      }
      ev.l_e_star = le;
      ev.l_r_star = lr;
      break;
    }
    case PairKind::Relu: {
      std::size_t neg_idx = 0;
      double le = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (z[i] < 0.0) {
          ev.p_star[i] = 1.0;
          neg_idx |= (std::size_t{1} << i);
          le += z[i];
        } else {
          ev.p_star[i] = 0.0;
        }
      }
      ev.q_star[neg_idx] = 1.0;
      ev.l_e_star = le;
      ev.l_r_star = sums[neg_idx];
      break;
    }
    case PairKind::Unhinged: {
      const double base = 1.0 / static_cast<double>(total);
      double zsum = 0.0;
      for (double zi : z) zsum += zi;
      for (std::size_t i = 0; i < m; ++i) ev.p_star[i] = 0.5;
      double lr = 0.0;
      for (std::size_t idx = 0; idx < total; ++idx) {
        ev.q_star[idx] = base;
        lr += base * sums[idx];
      }
      ev.l_e_star = 0.5 * zsum;
      ev.l_r_star = lr;
      break;
    }
  }
  return ev;
}

struct GapStats {
  double mean = 0.0;
  double stdev = 0.0;
};

// Spread of L*_e - L*_r over random standard-normal payoff vectors. For a
// proportionate pair the gap is a constant, so the spread hugs zero.
inline GapStats equivalence_gap_constancy(const GamePair& pair, std::size_t trials,
                                          std::size_t m, std::uint64_t seed) {
  if (trials < 1) throw DataError("equivalence_gap_constancy: need trials >= 1");
  if (m < 1 || m > kGameEnumerationCap) {
    throw DataError("equivalence_gap_constancy: m out of range");
  }
  pair.validate_for(m);
  const RandomStream root(seed);
  std::vector<double> gaps(trials);
  for (std::size_t t = 0; t < trials; ++t) {
    RandomStream stream = root.substream(t);
    std::vector<double> z(m);
    for (auto& zi : z) zi = sample_standard_normal(stream);
    const GameEvaluation ev = brute_force_game(pair, z);
    gaps[t] = ev.l_e_star - ev.l_r_star;
  }
  double mean = 0.0;
  for (double g : gaps) mean += g;
  mean /= static_cast<double>(trials);
  double var = 0.0;
  for (double g : gaps) var += (g - mean) * (g - mean);
  var /= static_cast<double>(trials);
  return {mean, std::sqrt(var)};
}

// Relative residual of sum_I exp(-S_I/mu) against prod_i (1+exp(-z_i/mu)),
// evaluated in log space so it stays meaningful for any payoff scale.
inline double logexp_product_identity_rel_residual(std::span<const double> z,
                                                   double mu) {
  const double log_lhs = log_exp_rado_loss(subset_sums(z), mu);
  double log_rhs = 0.0;
  for (double zi : z) log_rhs += softplus(-zi / mu);
  return std::abs(std::expm1(log_lhs - log_rhs));
}

// Residual of each pair's exact loss-level identity:
//   LogExp:        sum_I exp(-S_I/mu) - prod_i (1 + exp(-z_i/mu))
//   SquareMeanVar: l_e(mu) - (m + (4/mu) l_r(mu 2^{m-1}))
//   Relu:          l_r(mu) - l_e(mu)
//   Unhinged:      l_r(mu) - l_e(mu) / 2
inline double loss_identity_residual(PairKind kind, std::span<const double> z,
                                     double mu) {
  const std::size_t m = z.size();
  if (m > kGameEnumerationCap) {
    throw DataError("loss_identity_residual: m exceeds enumeration cap");
  }
  const std::vector<double> sums = subset_sums(z);
  switch (kind) {
    case PairKind::LogExp: {
      const double log_lhs = log_exp_rado_loss(sums, mu);
      double log_rhs = 0.0;
      for (double zi : z) log_rhs += softplus(-zi / mu);
      return std::exp(log_rhs) * std::expm1(log_lhs - log_rhs);
    }
    case PairKind::SquareMeanVar: {
      const double mu_r = mu * std::ldexp(1.0, static_cast<int>(m) - 1);
      const double le = example_loss(kind, z, mu);
      const double lr = rado_loss(kind, sums, mu_r);
      return le - (static_cast<double>(m) + (4.0 / mu) * lr);
    }
    case PairKind::Relu:
      return rado_loss(kind, sums, mu) - example_loss(kind, z, mu);
    case PairKind::Unhinged:
      return rado_loss(kind, sums, mu) - 0.5 * example_loss(kind, z, mu);
  }
  throw DataError("loss_identity_residual: unknown kind");
}

}  // namespace rado
