#pragma once

// Cross-validation machinery and the experiment harness: stratified folds,
// per-fold rado generation, a (regularizer x omega x selection) grid, and
// aggregated error/support rows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "rado/boost.hpp"
#include "rado/core.hpp"
#include "rado/data_io.hpp"
#include "rado/rados.hpp"
#include "rado/rng.hpp"

namespace rado {

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Deterministic k-fold partition. Stratified mode deals each class
// round-robin after an in-class shuffle, so per-class fold counts differ by
// at most one.
inline std::vector<FoldSplit> kfold(const Dataset& ds, std::size_t k,
                                    std::uint64_t seed, bool stratified) {
  ds.validate();
  const std::size_t m = ds.m();
  if (k < 2 || k > m) throw DataError("kfold: need 2 <= k <= m");

  std::vector<std::vector<std::size_t>> fold_members(k);
  RandomStream stream = RandomStream(seed).substream(0x666f6c64);  // "fold"

  auto shuffle = [&](std::vector<std::size_t>& idx) {
    for (std::size_t i = idx.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(stream.next_u64() % i);
      std::swap(idx[i - 1], idx[j]);
    }
  };

  if (stratified) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < m; ++i) (ds.labels[i] > 0 ? pos : neg).push_back(i);
    if (pos.size() < k || neg.size() < k) {
      throw DataError("kfold: stratification needs every class to have >= k members");
    }
    std::size_t cursor = 0;
    for (auto* cls : {&pos, &neg}) {
      shuffle(*cls);
      for (std::size_t i = 0; i < cls->size(); ++i) {
        fold_members[(cursor + i) % k].push_back((*cls)[i]);
      }
      cursor += cls->size();
    }
  } else {
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    shuffle(idx);
    for (std::size_t i = 0; i < m; ++i) fold_members[i % k].push_back(idx[i]);
  }

  std::vector<FoldSplit> out(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::sort(fold_members[f].begin(), fold_members[f].end());
    out[f].test = fold_members[f];
    for (std::size_t g = 0; g < k; ++g) {
      if (g == f) continue;
      out[f].train.insert(out[f].train.end(), fold_members[g].begin(),
                          fold_members[g].end());
    }
    std::sort(out[f].train.begin(), out[f].train.end());
  }
  return out;
}

inline Dataset subset_dataset(const Dataset& ds, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.feature_names = ds.feature_names;
  out.features = Matrix(rows.size(), ds.d());
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = ds.features.row(rows[i]);
    auto dst = out.features.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    out.labels[i] = ds.labels[rows[i]];
  }
  return out;
}

// 0/1 error of the model on raw feature rows, in percent; any scaling the
// model was trained under is applied first.
inline double zero_one_error_percent(const LinearModel& model, const Dataset& ds) {
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < ds.m(); ++i) {
    if (predict_scaled(model, ds.features.row(i)).label != ds.labels[i]) ++wrong;
  }
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(ds.m());
}

// supp% = 100 ||theta||_0 / d.
inline double support_percent(std::span<const double> theta) {
  std::size_t nonzero = 0;
  for (double v : theta) {
    if (v != 0.0) ++nonzero;
  }
  return 100.0 * static_cast<double>(nonzero) / static_cast<double>(theta.size());
}

struct GridCell {
  RegularizerSpec regularizer;  // omega field ignored; the grid supplies it
  std::vector<double> omegas;
};

struct ExperimentConfig {
  std::filesystem::path dataset_path;
  std::string label_column = "label";
  std::optional<std::string> positive_token;
  std::string domain;  // row label; defaults to the dataset file stem
  std::size_t folds = 10;
  bool stratified = true;
  RadoMode rado_mode = RadoMode::PlainRandom;
  std::size_t n_rados = 0;  // 0 => n = m of the training fold
  int T = 1000;
  double clamp_gamma = 0.98;
  bool min_max_scale = false;
  WlMode wl_mode = WlMode::PreferenceOrder;
  std::vector<SelectRule> selects = {SelectRule::BestOnTraining};
  std::uint64_t seed = 0;
  std::vector<GridCell> grid;

  void validate() const {
    if (folds < 2) throw DataError("ExperimentConfig: need folds >= 2");
    if (grid.empty()) throw DataError("ExperimentConfig: empty grid");
    if (selects.empty()) throw DataError("ExperimentConfig: no selection rule");
    for (const auto& cell : grid) {
      if (cell.omegas.empty()) throw DataError("ExperimentConfig: cell without omegas");
    }
  }
};

struct ResultsRow {
  std::string domain;
  std::string regularizer;
  double omega = 0.0;
  std::string select;
  double test_error_mean = 0.0;
  double test_error_std = 0.0;
  double support_mean = 0.0;
  double support_std = 0.0;
};

namespace io_detail {

inline void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
}

}  // namespace io_detail

inline std::vector<ResultsRow> run_experiment(const ExperimentConfig& config,
                                              const Dataset& ds) {
  config.validate();
  ds.validate();
  const auto folds = kfold(ds, config.folds, config.seed, config.stratified);

  struct CellKey {
    std::size_t cell, omega_idx, select_idx;
  };
  std::vector<CellKey> keys;
  for (std::size_t c = 0; c < config.grid.size(); ++c) {
    for (std::size_t o = 0; o < config.grid[c].omegas.size(); ++o) {
      for (std::size_t s = 0; s < config.selects.size(); ++s) keys.push_back({c, o, s});
    }
  }

  // errors[key][fold], supports[key][fold]
  std::vector<std::vector<double>> errors(keys.size(),
                                          std::vector<double>(folds.size(), 0.0));
  std::vector<std::vector<double>> supports(keys.size(),
                                            std::vector<double>(folds.size(), 0.0));

  parallel_for(folds.size(), [&](std::size_t f) {
    Dataset train = subset_dataset(ds, folds[f].train);
    const Dataset test = subset_dataset(ds, folds[f].test);
    ScalingInfo scaling;
    if (config.min_max_scale) {
      scaling = fit_min_max_scaling(train);
      train = apply_scaling(scaling, train);
    }
    const std::uint64_t fold_seed =
        RandomStream(config.seed).substream(0x72616473).substream(f).next_u64();
    const std::size_t n = config.n_rados == 0 ? train.m() : config.n_rados;
    RadoSet rset;
    switch (config.rado_mode) {
      case RadoMode::Full: rset = enumerate_rados(train); break;
      case RadoMode::ClassWise: rset = sample_classwise(train, n, fold_seed); break;
      default: rset = sample_plain(train, n, fold_seed); break;
    }
    rset.scaling = scaling;

    for (std::size_t ki = 0; ki < keys.size(); ++ki) {
      const auto& key = keys[ki];
      BoostConfig bc;
      bc.T = config.T;
      bc.clamp_gamma = config.clamp_gamma;
      bc.wl_mode = config.wl_mode;
      bc.select = config.selects[key.select_idx];
      bc.seed = fold_seed;
      bc.regularizer = config.grid[key.cell].regularizer;
      bc.regularizer.omega = config.grid[key.cell].omegas[key.omega_idx];
      const LinearModel model = boost(rset, bc);
      errors[ki][f] = zero_one_error_percent(model, test);
      supports[ki][f] = support_percent(model.theta);
    }
  });

  const std::string domain =
      config.domain.empty() ? config.dataset_path.stem().string() : config.domain;
  std::vector<ResultsRow> rows;
  rows.reserve(keys.size());
  for (std::size_t ki = 0; ki < keys.size(); ++ki) {
    const auto& key = keys[ki];
    ResultsRow row;
    row.domain = domain;
    row.regularizer = to_string(config.grid[key.cell].regularizer.kind);
    row.omega = config.grid[key.cell].omegas[key.omega_idx];
    row.select = to_string(config.selects[key.select_idx]);
    io_detail::mean_std(errors[ki], row.test_error_mean, row.test_error_std);
    io_detail::mean_std(supports[ki], row.support_mean, row.support_std);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::vector<ResultsRow> run_experiment(const ExperimentConfig& config) {
  const Dataset ds =
      load_csv(config.dataset_path, config.label_column, config.positive_token);
  return run_experiment(config, ds);
}

inline void write_results_csv(const std::filesystem::path& path,
                              const std::vector<ResultsRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "domain,regularizer,omega,select,test_error_mean,test_error_std,"
         "support_mean,support_std\n";
  for (const auto& row : rows) {
    out << row.domain << ',' << row.regularizer << ','
        << io_detail::format_double(row.omega) << ',' << row.select << ','
        << io_detail::format_double(row.test_error_mean) << ','
        << io_detail::format_double(row.test_error_std) << ','
        << io_detail::format_double(row.support_mean) << ','
        << io_detail::format_double(row.support_std) << '\n';
  }
}

// --- config file -----------------------------------------------------------

inline WlMode wl_mode_from_string(const std::string& s) {
  if (s == "first") return WlMode::FirstAdmissible;
  if (s == "preference") return WlMode::PreferenceOrder;
  throw DataError("unknown weak-learner mode '" + s + "'");
}

inline SelectRule select_from_string(const std::string& s) {
  if (s == "last") return SelectRule::Last;
  if (s == "best") return SelectRule::BestOnTraining;
  throw DataError("unknown selection rule '" + s + "'");
}

inline RadoMode rado_mode_from_string(const std::string& s) {
  if (s == "plain") return RadoMode::PlainRandom;
  if (s == "classwise") return RadoMode::ClassWise;
  if (s == "full") return RadoMode::Full;
  throw DataError("unknown rado mode '" + s + "'");
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  ExperimentConfig config;
  config.dataset_path = j.at("dataset").get<std::string>();
  config.label_column = j.value("label_column", std::string("label"));
  if (j.contains("positive_token")) {
    config.positive_token = j["positive_token"].get<std::string>();
  }
  config.domain = j.value("domain", std::string());
  config.folds = j.value("folds", std::size_t{10});
  config.stratified = j.value("stratified", true);
  config.rado_mode = rado_mode_from_string(j.value("rado_mode", std::string("plain")));
  config.n_rados = j.value("n_rados", std::size_t{0});
  config.T = j.value("T", 1000);
  config.clamp_gamma = j.value("clamp_gamma", 0.98);
  config.min_max_scale = j.value("min_max_scale", false);
  config.wl_mode = wl_mode_from_string(j.value("wl_mode", std::string("preference")));
  if (j.contains("select")) {
    config.selects.clear();
    for (const auto& s : j["select"]) {
      config.selects.push_back(select_from_string(s.get<std::string>()));
    }
  }
  config.seed = j.value("seed", std::uint64_t{0});
  for (const auto& cell : j.at("grid")) {
    GridCell gc;
    gc.regularizer = regularizer_from_json(cell.at("regularizer"));
    gc.omegas = cell.at("omegas").get<std::vector<double>>();
    config.grid.push_back(std::move(gc));
  }
  config.validate();
  return config;
}

}  // namespace rado
