#pragma once

// Differentially private rado delivery: per-coordinate Laplace noise of
// scale n * r_e / epsilon, where r_e upper-bounds the l1 diameter of the
// edge-vector set, plus the example-equivalent budget used for reporting.

#include <cmath>
#include <cstdint>
#include <iostream>

#include "rado/core.hpp"
#include "rado/rados.hpp"
#include "rado/rng.hpp"

namespace rado {

struct DpParams {
  double epsilon = 1.0;  // total budget over the n delivered rados
  double r_e = 1.0;      // l1 diameter bound on edge vectors
  std::uint64_t seed = 0;

  void validate() const {
    if (!(epsilon > 0.0)) throw DataError("DpParams: epsilon must be > 0");
    if (!(r_e > 0.0)) throw DataError("DpParams: r_e must be > 0");
  }
};

// Inverse CDF of the zero-centered Laplace distribution, u in (-1/2, 1/2).
inline double laplace_icdf(double u, double scale) {
  if (!(scale > 0.0)) throw DataError("laplace_icdf: scale must be > 0");
  if (!(u > -0.5 && u < 0.5)) throw DataError("laplace_icdf: u must lie in (-1/2,1/2)");
  if (u == 0.0) return 0.0;
  const double sign = u > 0.0 ? 1.0 : -1.0;
  return -scale * sign * std::log(1.0 - 2.0 * std::abs(u));
}

inline double laplace_sample(double scale, RandomStream& stream) {
  return laplace_icdf(stream.next_open_unit() - 0.5, scale);
}

// Cheap upper bound 2 max_i ||e_i||_1 on the pairwise l1 diameter of the
// edge vectors; the exhaustive mode computes the exact maximum.
inline double edge_diameter_bound(const Dataset& ds, bool exhaustive = false) {
  ds.validate();
  const Matrix edges = edge_vectors(ds);
  if (!exhaustive) {
    double worst = 0.0;
    for (std::size_t i = 0; i < edges.rows(); ++i) {
      worst = std::max(worst, l1_norm(edges.row(i)));
    }
    return 2.0 * worst;
  }
  if (ds.m() > 10000) {
    throw DataError("edge_diameter_bound: exhaustive mode limited to m <= 10^4");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < edges.rows(); ++i) {
    for (std::size_t j = i + 1; j < edges.rows(); ++j) {
      double dist = 0.0;
      auto a = edges.row(i);
      auto b = edges.row(j);
      for (std::size_t k = 0; k < a.size(); ++k) dist += std::abs(a[k] - b[k]);
      worst = std::max(worst, dist);
    }
  }
  return worst;
}

// DpParams from a dataset; a user-supplied r_e below the cheap bound voids
// the guarantee, so it is kept but flagged.
inline DpParams make_dp_params(const Dataset& ds, double epsilon,
                               std::uint64_t seed, double user_r_e = 0.0,
                               std::ostream* warnings = nullptr) {
  DpParams params;
  params.epsilon = epsilon;
  params.seed = seed;
  const double bound = edge_diameter_bound(ds);
  if (user_r_e > 0.0) {
    params.r_e = user_r_e;
    if (user_r_e < bound && warnings != nullptr) {
      (*warnings) << "warning: supplied r_e = " << user_r_e
                  << " is below the edge-diameter bound " << bound
                  << "; the privacy guarantee no longer holds\n";
    }
  } else {
    params.r_e = bound;
  }
  params.validate();
  return params;
}

inline double dp_noise_scale(const DpParams& params, std::size_t n) {
  return static_cast<double>(n) * params.r_e / params.epsilon;
}

// Every coordinate of every rado gets an independent Laplace draw from a
// stream keyed by (seed, rado index, coordinate), so protection is
// reproducible and schedule-independent.
inline RadoSet dp_protect(const RadoSet& rset, const DpParams& params) {
  rset.validate();
  params.validate();
  const double scale = dp_noise_scale(params, rset.n());
  RadoSet out = rset;
  const RandomStream root(params.seed);
  parallel_for(rset.n(), [&](std::size_t j) {
    const RandomStream row_stream = root.substream(j);
    auto row = out.rados.row(j);
    for (std::size_t k = 0; k < rset.d(); ++k) {
      RandomStream cell = row_stream.substream(k);
      row[k] += laplace_sample(scale, cell);
    }
  });
  out.provenance.mode = RadoMode::Protected;
  out.provenance.epsilon = params.epsilon;
  out.provenance.r_e = params.r_e;
  out.provenance.seed = params.seed;
  return out;
}

// Example-equivalent budget eps_a = n ln(1 + (e^{eps/n} - 1)/m); strictly
// below eps for m >= 2, and a reporting convenience only - never a noise
// calibration input.
inline double epsilon_a(double epsilon, std::size_t n, std::size_t m) {
  if (!(epsilon > 0.0) || n < 1 || m < 1) {
    throw DataError("epsilon_a: all arguments must be positive");
  }
  const double nn = static_cast<double>(n);
  return nn * std::log1p(std::expm1(epsilon / nn) / static_cast<double>(m));
}

}  // namespace rado
