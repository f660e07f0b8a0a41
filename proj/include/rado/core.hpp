#pragma once

// Core domain types shared by every module: datasets of signed examples,
// edge vectors, linear models and their training history.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rado {

// Error taxonomy. DataError covers malformed inputs, shape mismatches and
// file problems; NumericError covers failures of the numerics themselves
// (degenerate edges, overflow). The CLI maps them to distinct exit codes.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class LabelError : public DataError {
 public:
  using DataError::DataError;
};

class MissingValueError : public DataError {
 public:
  using DataError::DataError;
};

// Dense row-major matrix. Nothing fancy: the algorithms here only need
// row access, column scans and dot products.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DataError("dot: dimension mismatch (" + std::to_string(a.size()) +
                    " vs " + std::to_string(b.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l1_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

inline double l2_norm_sq(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline double linf_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

inline bool is_zero_vector(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

// Labeled examples. Labels are strictly -1/+1; the mapping from raw file
// tokens happens in data_io.
struct Dataset {
  Matrix features;                         // m x d
  std::vector<int> labels;                 // each -1 or +1
  std::vector<std::string> feature_names;  // d names

  std::size_t m() const { return features.rows(); }
  std::size_t d() const { return features.cols(); }

  void validate() const {
    if (m() < 1 || d() < 1) throw DataError("Dataset: need m >= 1 and d >= 1");
    if (labels.size() != m()) throw DataError("Dataset: label count != m");
    for (int y : labels) {
      if (y != -1 && y != 1) throw DataError("Dataset: labels must be -1 or +1");
    }
    if (!features.all_finite()) throw DataError("Dataset: non-finite feature value");
    if (!feature_names.empty() && feature_names.size() != d()) {
      throw DataError("Dataset: feature_names size != d");
    }
  }
};

// Optional per-feature min-max scaling. Fitted on whichever sample generates
// the rados and carried through to the model, so a model trained on scaled
// data stays evaluable on raw feature rows.
struct ScalingInfo {
  bool enabled = false;
  std::vector<double> feature_min;
  std::vector<double> feature_range;  // 1 for constant columns

  std::vector<double> apply(std::span<const double> x) const {
    if (!enabled) return {x.begin(), x.end()};
    if (x.size() != feature_min.size()) {
      throw DataError("ScalingInfo: dimension mismatch");
    }
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
      out[k] = (x[k] - feature_min[k]) / feature_range[k];
    }
    return out;
  }
};

inline ScalingInfo fit_min_max_scaling(const Dataset& ds) {
  ds.validate();
  ScalingInfo info;
  info.enabled = true;
  info.feature_min.assign(ds.d(), std::numeric_limits<double>::infinity());
  std::vector<double> feature_max(ds.d(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < ds.m(); ++i) {
    for (std::size_t k = 0; k < ds.d(); ++k) {
      info.feature_min[k] = std::min(info.feature_min[k], ds.features(i, k));
      feature_max[k] = std::max(feature_max[k], ds.features(i, k));
    }
  }
  info.feature_range.resize(ds.d());
  for (std::size_t k = 0; k < ds.d(); ++k) {
    const double range = feature_max[k] - info.feature_min[k];
    info.feature_range[k] = range > 0.0 ? range : 1.0;
  }
  return info;
}

inline Dataset apply_scaling(const ScalingInfo& info, const Dataset& ds) {
  if (!info.enabled) return ds;
  Dataset out = ds;
  for (std::size_t i = 0; i < ds.m(); ++i) {
    const auto row = info.apply(ds.features.row(i));
    std::copy(row.begin(), row.end(), out.features.row(i).begin());
  }
  return out;
}

// Edge vectors e_i = y_i * x_i, one per row. Flipping every label negates
// every row.
inline Matrix edge_vectors(const Dataset& ds) {
  ds.validate();
  Matrix e(ds.m(), ds.d());
  for (std::size_t i = 0; i < ds.m(); ++i) {
    const double y = static_cast<double>(ds.labels[i]);
    for (std::size_t j = 0; j < ds.d(); ++j) e(i, j) = y * ds.features(i, j);
  }
  return e;
}

// One boosting step: chosen feature, leveraging coefficient, scaled edge,
// regularization increment and weight normalizer.
struct IterationRecord {
  int t = 0;
  int feature = 0;
  double alpha = 0.0;
  double edge_r = 0.0;
  double delta = 0.0;
  double z_norm = 1.0;
};

enum class RegKind { Lasso, Ridge, LInf, Slope, Combo };

enum class WlMode { FirstAdmissible, PreferenceOrder };
enum class SelectRule { Last, BestOnTraining };

// Regularizer description: which norm, its parameters, and the strength
// omega that multiplies it during training.
struct RegularizerSpec {
  RegKind kind = RegKind::Lasso;
  double omega = 0.0;

  // Ridge: positive diagonal of Gamma; empty means identity.
  std::vector<double> gamma_diag;
  // Slope: q-value in (0,1).
  double slope_q = 0.05;
  // Combo: nonnegative weights, at least one positive.
  std::vector<std::pair<double, RegularizerSpec>> terms;

  void validate() const {
    if (omega < 0.0) throw DataError("RegularizerSpec: omega must be >= 0");
    switch (kind) {
      case RegKind::Ridge:
        for (double g : gamma_diag) {
          if (!(g > 0.0)) throw DataError("RegularizerSpec: ridge diagonal must be > 0");
        }
        break;
      case RegKind::Slope:
        if (!(slope_q > 0.0 && slope_q < 1.0)) {
          throw DataError("RegularizerSpec: slope q must lie in (0,1)");
        }
        break;
      case RegKind::Combo: {
        if (terms.empty()) throw DataError("RegularizerSpec: empty combo");
        bool any_positive = false;
        for (const auto& [w, sub] : terms) {
          if (w < 0.0) throw DataError("RegularizerSpec: combo weight must be >= 0");
          if (w > 0.0) any_positive = true;
          sub.validate();
        }
        if (!any_positive) {
          throw DataError("RegularizerSpec: combo needs a positive weight");
        }
        break;
      }
      default:
        break;
    }
  }
};

struct LinearModel {
  std::vector<double> theta;
  std::vector<IterationRecord> history;
  RegularizerSpec regularizer;
  int iterations_run = 0;
  // Index (1-based t) of the iterate exported as theta; equals
  // iterations_run under last-iterate selection.
  int selected_iteration = 0;
  // Times the weight-underflow floor fired during training.
  std::int64_t underflow_events = 0;
  std::vector<std::string> feature_names;
  // Feature scaling the training rados were built under, if any.
  ScalingInfo scaling;
  // Training configuration, persisted with the model.
  double clamp_gamma = 0.98;
  WlMode wl_mode = WlMode::PreferenceOrder;
  SelectRule select = SelectRule::Last;
  std::uint64_t seed = 0;

  std::size_t d() const { return theta.size(); }

  void validate() const {
    for (double v : theta) {
      if (!std::isfinite(v)) throw DataError("LinearModel: non-finite theta");
    }
    if (static_cast<int>(history.size()) != iterations_run) {
      throw DataError("LinearModel: history length != iterations_run");
    }
    for (const auto& rec : history) {
      if (!(std::abs(rec.edge_r) <= 1.0)) throw DataError("LinearModel: |r| > 1 in history");
      if (!(rec.z_norm > 0.0)) throw DataError("LinearModel: Z <= 0 in history");
    }
  }
};

struct Prediction {
  double score = 0.0;
  int label = 1;
};

// score = theta^T x; the tie at score exactly 0 resolves to +1.
inline Prediction predict(const LinearModel& model, std::span<const double> x) {
  if (x.size() != model.theta.size()) {
    throw DataError("predict: dimension mismatch (" + std::to_string(x.size()) +
                    " vs " + std::to_string(model.theta.size()) + ")");
  }
  const double score = dot(model.theta, x);
  return {score, score >= 0.0 ? 1 : -1};
}

// predict() after routing raw features through the model's recorded scaling.
inline Prediction predict_scaled(const LinearModel& model, std::span<const double> x) {
  if (!model.scaling.enabled) return predict(model, x);
  return predict(model, model.scaling.apply(x));
}

// Worker cap shared by the few parallel loops in the library. Outputs never
// depend on it: every work item writes its own slot and owns its own RNG
// stream.
inline unsigned& thread_cap() {
  static unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  return cap;
}

inline void set_thread_cap(unsigned cap) { thread_cap() = std::max(1u, cap); }

inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(thread_cap(), n));
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace rado
