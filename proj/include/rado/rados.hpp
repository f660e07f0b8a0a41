#pragma once

// Rademacher observations. A rado is pi_sigma = (1/2) * sum_i (sigma_i + y_i) x_i,
// i.e. the sum of edge vectors over the examples where sigma agrees with the
// label. Construction modes: full enumeration, plain random sampling,
// class-wise sampling, plus the Minkowski shift that folds a regularizer
// into the rado set itself.

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rado/core.hpp"
#include "rado/rng.hpp"

namespace rado {

struct SigmaVector {
  std::vector<int> entries;  // each -1 or +1

  std::size_t size() const { return entries.size(); }

  void validate() const {
    for (int s : entries) {
      if (s != -1 && s != 1) throw DataError("SigmaVector: entries must be -1 or +1");
    }
  }
};

enum class RadoMode { Full, PlainRandom, ClassWise, Protected };

inline std::string to_string(RadoMode mode) {
  switch (mode) {
    case RadoMode::Full: return "full";
    case RadoMode::PlainRandom: return "plain";
    case RadoMode::ClassWise: return "classwise";
    case RadoMode::Protected: return "protected";
  }
  return "?";
}

struct RadoProvenance {
  RadoMode mode = RadoMode::PlainRandom;
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;  // set when mode == Protected
  std::optional<double> r_e;      // edge-diameter bound used for protection
  std::size_t source_m = 0;
  // Hash commitment of the protection seed; persisted instead of the seed.
  std::optional<std::string> seed_commitment;
};

struct RadoSet {
  Matrix rados;  // n x d
  RadoProvenance provenance;
  std::vector<std::string> feature_names;
  // Scaling applied to the source dataset before these rados were built.
  ScalingInfo scaling;

  std::size_t n() const { return rados.rows(); }
  std::size_t d() const { return rados.cols(); }

  void validate() const {
    if (n() < 1) throw DataError("RadoSet: need n >= 1");
    if (!rados.all_finite()) throw DataError("RadoSet: non-finite entry");
    if (provenance.mode == RadoMode::Full &&
        n() != (std::size_t{1} << provenance.source_m)) {
      throw DataError("RadoSet: full mode requires n = 2^source_m");
    }
  }
};

// pi_sigma as the exact sum of edge vectors over {i : sigma_i = y_i}.
inline std::vector<double> rado_from_sigma(const Dataset& ds, const SigmaVector& sigma) {
  ds.validate();
  sigma.validate();
  if (sigma.size() != ds.m()) {
    throw DataError("rado_from_sigma: sigma length " + std::to_string(sigma.size()) +
                    " != m = " + std::to_string(ds.m()));
  }
  std::vector<double> out(ds.d(), 0.0);
  for (std::size_t i = 0; i < ds.m(); ++i) {
    if (sigma.entries[i] == ds.labels[i]) {
      const double y = static_cast<double>(ds.labels[i]);
      for (std::size_t j = 0; j < ds.d(); ++j) out[j] += y * ds.features(i, j);
    }
  }
  return out;
}

constexpr std::size_t kDefaultEnumerationCap = 20;

// All 2^m rados, row idx holding the rado whose agreement set is the bit
// pattern of idx (bit i set <=> sigma_i = y_i).
inline RadoSet enumerate_rados(const Dataset& ds,
                               std::size_t cap = kDefaultEnumerationCap) {
  ds.validate();
  if (ds.m() > cap) {
    throw DataError("enumerate_rados: m = " + std::to_string(ds.m()) +
                    " exceeds enumeration cap " + std::to_string(cap));
  }
  const Matrix edges = edge_vectors(ds);
  const std::size_t total = std::size_t{1} << ds.m();
  RadoSet out;
  out.rados = Matrix(total, ds.d());
  // Row idx = row (idx without lowest set bit) + that bit's edge vector.
  for (std::size_t idx = 1; idx < total; ++idx) {
    const std::size_t prev = idx & (idx - 1);
    const unsigned bit = static_cast<unsigned>(std::countr_zero(idx));
    auto dst = out.rados.row(idx);
    auto src = out.rados.row(prev);
    auto e = edges.row(bit);
    for (std::size_t j = 0; j < ds.d(); ++j) dst[j] = src[j] + e[j];
  }
  out.provenance = {RadoMode::Full, std::nullopt, std::nullopt, std::nullopt, ds.m()};
  out.feature_names = ds.feature_names;
  return out;
}

// n rados from independent uniform sigma draws; bit-identical for a given
// seed whatever the thread count, because rado j only consumes its own
// substream.
inline RadoSet sample_plain(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  ds.validate();
  if (n < 1) throw DataError("sample_plain: need n >= 1");
  const Matrix edges = edge_vectors(ds);
  RadoSet out;
  out.rados = Matrix(n, ds.d());
  const RandomStream root(seed);
  parallel_for(n, [&](std::size_t j) {
    RandomStream stream = root.substream(j);
    auto row = out.rados.row(j);
    for (std::size_t i = 0; i < ds.m(); ++i) {
      if (stream.next_bool()) {  // sigma_i == y_i
        auto e = edges.row(i);
        for (std::size_t k = 0; k < ds.d(); ++k) row[k] += e[k];
      }
    }
  });
  out.provenance = {RadoMode::PlainRandom, seed, std::nullopt, std::nullopt, ds.m()};
  out.feature_names = ds.feature_names;
  return out;
}

// Class-wise rados: pick a class uniformly, then include each of its
// examples independently with probability 1/2. Every rado is therefore a
// sum of edge vectors from a single class.
inline RadoSet sample_classwise(const Dataset& ds, std::size_t n, std::uint64_t seed) {
  ds.validate();
  if (n < 1) throw DataError("sample_classwise: need n >= 1");
  bool has_pos = false, has_neg = false;
  for (int y : ds.labels) (y > 0 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) {
    throw DataError("sample_classwise: both classes must be present");
  }
  const Matrix edges = edge_vectors(ds);
  RadoSet out;
  out.rados = Matrix(n, ds.d());
  const RandomStream root(seed);
  parallel_for(n, [&](std::size_t j) {
    RandomStream stream = root.substream(j);
    const int chosen = stream.next_bool() ? 1 : -1;
    auto row = out.rados.row(j);
    for (std::size_t i = 0; i < ds.m(); ++i) {
      if (ds.labels[i] != chosen) continue;
      if (stream.next_bool()) {
        auto e = edges.row(i);
        for (std::size_t k = 0; k < ds.d(); ++k) row[k] += e[k];
      }
    }
  });
  out.provenance = {RadoMode::ClassWise, seed, std::nullopt, std::nullopt, ds.m()};
  out.feature_names = ds.feature_names;
  return out;
}

// Minkowski shift: every rado moves by -(a_e * Omega(theta) / ||theta||_2^2) * theta,
// so theta^T (shifted rado) = theta^T rado - a_e * Omega(theta) exactly.
// theta = 0 leaves the set unchanged.
inline RadoSet regularize_rados(const RadoSet& rset, std::span<const double> theta,
                                double a_e, double omega_value) {
  rset.validate();
  if (theta.size() != rset.d()) {
    throw DataError("regularize_rados: theta dimension mismatch");
  }
  RadoSet out = rset;
  if (is_zero_vector(theta)) return out;
  const double scale = a_e * omega_value / l2_norm_sq(theta);
  for (std::size_t j = 0; j < out.n(); ++j) {
    auto row = out.rados.row(j);
    for (std::size_t k = 0; k < out.d(); ++k) row[k] -= scale * theta[k];
  }
  return out;
}

}  // namespace rado
