#pragma once

// The four sparsity-controlling regularizers (lasso, diagonal ridge,
// l-infinity, slope with normal-quantile weights) plus linear combinations,
// and the omega strengths under which the boosting guarantees hold.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rado/core.hpp"
#include "rado/normal.hpp"
#include "rado/rados.hpp"

namespace rado {

struct SlopeXis {
  std::vector<double> xis;  // nonincreasing, positive while q < 1

  void validate() const {
    for (std::size_t k = 0; k < xis.size(); ++k) {
      if (!(xis[k] > 0.0)) throw DataError("SlopeXis: xi must be > 0");
      if (k > 0 && xis[k] > xis[k - 1]) throw DataError("SlopeXis: not nonincreasing");
    }
  }
};

// xi_k = Phi^{-1}(1 - k q / (2 d)) for k = 1..d.
inline SlopeXis slope_xis(std::size_t d, double q) {
  if (d < 1) throw DataError("slope_xis: need d >= 1");
  if (!(q > 0.0 && q < 1.0)) throw DataError("slope_xis: q must lie in (0,1)");
  SlopeXis out;
  out.xis.reserve(d);
  for (std::size_t k = 1; k <= d; ++k) {
    out.xis.push_back(
        inverse_normal_cdf(1.0 - static_cast<double>(k) * q / (2.0 * static_cast<double>(d))));
  }
  out.validate();
  return out;
}

namespace detail {

inline double ridge_value(const std::vector<double>& gamma_diag,
                          std::span<const double> theta) {
  if (!gamma_diag.empty() && gamma_diag.size() != theta.size()) {
    throw DataError("ridge: gamma diagonal size != d");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double g = gamma_diag.empty() ? 1.0 : gamma_diag[k];
    s += g * theta[k] * theta[k];
  }
  return s;
}

// Sorting |theta| nonincreasing attains the permutation maximum of
// (permuted |theta|)^T xi, by the rearrangement inequality.
inline double slope_value(const std::vector<double>& xis, std::span<const double> theta) {
  if (xis.size() != theta.size()) throw DataError("slope: xi size != d");
  std::vector<double> mag(theta.begin(), theta.end());
  for (double& v : mag) v = std::abs(v);
  std::sort(mag.begin(), mag.end(), std::greater<>());
  double s = 0.0;
  for (std::size_t k = 0; k < mag.size(); ++k) s += xis[k] * mag[k];
  return s;
}

}  // namespace detail

// RegularizerSpec flattened into atomic weighted terms, with slope quantile
// sequences materialized once. The boosting loop evaluates Omega(theta)
// every iteration for every candidate feature, so this is the form it keeps.
class CompiledRegularizer {
 public:
  struct Atom {
    RegKind kind;
    double weight;
    std::vector<double> gamma_diag;  // ridge
    std::vector<double> xis;         // slope
  };

  CompiledRegularizer() = default;

  CompiledRegularizer(const RegularizerSpec& spec, std::size_t d) : omega_(spec.omega) {
    spec.validate();
    flatten(spec, 1.0, d);
  }

  double value(std::span<const double> theta) const {
    double total = 0.0;
    for (const Atom& atom : atoms_) {
      double v = 0.0;
      switch (atom.kind) {
        case RegKind::Lasso: v = l1_norm(theta); break;
        case RegKind::Ridge: v = detail::ridge_value(atom.gamma_diag, theta); break;
        case RegKind::LInf: v = linf_norm(theta); break;
        case RegKind::Slope: v = detail::slope_value(atom.xis, theta); break;
        case RegKind::Combo: break;  // flattened away
      }
      total += atom.weight * v;
    }
    return total;
  }

  double omega() const { return omega_; }

 private:
  void flatten(const RegularizerSpec& spec, double weight, std::size_t d) {
    if (spec.kind == RegKind::Combo) {
      for (const auto& [w, sub] : spec.terms) flatten(sub, weight * w, d);
      return;
    }
    Atom atom{spec.kind, weight, {}, {}};
    if (spec.kind == RegKind::Ridge) atom.gamma_diag = spec.gamma_diag;
    if (spec.kind == RegKind::Slope) atom.xis = slope_xis(d, spec.slope_q).xis;
    atoms_.push_back(std::move(atom));
  }

  std::vector<Atom> atoms_;
  double omega_ = 0.0;
};

// Omega(theta) for a spec; Omega(0) = 0 for every kind.
inline double omega_value(const RegularizerSpec& spec, std::span<const double> theta) {
  return CompiledRegularizer(spec, theta.size()).value(theta);
}

namespace detail {

inline std::vector<double> column_abs_max(const RadoSet& rset) {
  std::vector<double> out(rset.d(), 0.0);
  for (std::size_t j = 0; j < rset.n(); ++j) {
    auto row = rset.rados.row(j);
    for (std::size_t k = 0; k < rset.d(); ++k) out[k] = std::max(out[k], std::abs(row[k]));
  }
  return out;
}

inline double min_column_abs_max(const RadoSet& rset) {
  const auto maxima = column_abs_max(rset);
  return *std::min_element(maxima.begin(), maxima.end());
}

}  // namespace detail

// Omega strengths under which the boosting guarantees hold.
// Ridge: the strict upper bound 2 a min_k max_j pi_jk^2 / (T lambda_Gamma),
//   lambda_Gamma being the top eigenvalue of the diagonal Gamma; pick omega
//   strictly below the returned value. Requires 0 < a < 1/5.
// Lasso / LInf: the exact prescription a * gamma_wl * min_k max_j |pi_jk|,
//   requiring 0 < a < 3/11.
// Slope: fixed at 1.
inline double admissible_omega(const RegularizerSpec& spec, const RadoSet& rset,
                               int T, double gamma_wl, double a) {
  rset.validate();
  if (T < 1) throw DataError("admissible_omega: need T >= 1");
  switch (spec.kind) {
    case RegKind::Ridge: {
      if (!(a > 0.0 && a < 0.2)) {
        throw DataError("admissible_omega: ridge requires 0 < a < 1/5");
      }
      double lambda_gamma = 1.0;
      if (!spec.gamma_diag.empty()) {
        lambda_gamma = *std::max_element(spec.gamma_diag.begin(), spec.gamma_diag.end());
      }
      const double min_max = detail::min_column_abs_max(rset);
      return 2.0 * a * min_max * min_max / (static_cast<double>(T) * lambda_gamma);
    }
    case RegKind::Lasso:
    case RegKind::LInf: {
      if (!(a > 0.0 && a < 3.0 / 11.0)) {
        throw DataError("admissible_omega: lasso/linf requires 0 < a < 3/11");
      }
      if (!(gamma_wl > 0.0 && gamma_wl < 1.0)) {
        throw DataError("admissible_omega: gamma_wl must lie in (0,1)");
      }
      return a * gamma_wl * detail::min_column_abs_max(rset);
    }
    case RegKind::Slope:
      return 1.0;
    case RegKind::Combo:
      throw DataError("admissible_omega: no rule for combo regularizers");
  }
  throw DataError("admissible_omega: unknown kind");
}

// Smallest q admitted by the slope guarantee:
//   q >= 2 max_k (1 - Phi((3 gamma / 11) * max_j |pi_jk|)) / (k / d).
// Columns must already be in the feature order used at training.
inline double slope_q_check(const RadoSet& rset, double gamma_wl, std::size_t d) {
  rset.validate();
  if (d != rset.d()) throw DataError("slope_q_check: d != number of rado columns");
  const auto maxima = detail::column_abs_max(rset);
  double best = 0.0;
  for (std::size_t k = 1; k <= d; ++k) {
    const double tail = 1.0 - normal_cdf((3.0 * gamma_wl / 11.0) * maxima[k - 1]);
    best = std::max(best, tail / (static_cast<double>(k) / static_cast<double>(d)));
  }
  return 2.0 * best;
}

}  // namespace rado
