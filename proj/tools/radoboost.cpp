// Command-line front end: rado generation, differential-privacy protection,
// boosting, evaluation, the loss-equivalence verifier, the cross-validation
// experiment harness, and the example-equivalent privacy budget.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure
// (including a failed verification).

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rado/boost.hpp"
#include "rado/core.hpp"
#include "rado/data_io.hpp"
#include "rado/experiment.hpp"
#include "rado/losses.hpp"
#include "rado/privacy.hpp"
#include "rado/rados.hpp"
#include "rado/regularizers.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

void require_writable(const std::filesystem::path& path, bool force) {
  if (!force && std::filesystem::exists(path)) {
    throw rado::DataError(path.string() + " already exists (use --force to overwrite)");
  }
}

rado::RegularizerSpec parse_regularizer(const std::string& text, double omega,
                                        double slope_q) {
  rado::RegularizerSpec spec;
  spec.omega = omega;
  spec.slope_q = slope_q;
  if (text == "lasso") {
    spec.kind = rado::RegKind::Lasso;
  } else if (text == "ridge") {
    spec.kind = rado::RegKind::Ridge;
  } else if (text == "linf") {
    spec.kind = rado::RegKind::LInf;
  } else if (text == "slope") {
    spec.kind = rado::RegKind::Slope;
  } else if (text.rfind("combo:", 0) == 0) {
    // combo:W*KIND+W*KIND..., e.g. combo:0.5*lasso+0.5*ridge
    spec.kind = rado::RegKind::Combo;
    std::string body = text.substr(6);
    std::size_t pos = 0;
    while (pos < body.size()) {
      std::size_t plus = body.find('+', pos);
      if (plus == std::string::npos) plus = body.size();
      const std::string term = body.substr(pos, plus - pos);
      const std::size_t star = term.find('*');
      if (star == std::string::npos) {
        throw rado::DataError("combo term '" + term + "' must look like WEIGHT*KIND");
      }
      double weight;
      try {
        weight = std::stod(term.substr(0, star));
      } catch (const std::exception&) {
        throw rado::DataError("cannot parse combo weight in '" + term + "'");
      }
      spec.terms.emplace_back(
          weight, parse_regularizer(term.substr(star + 1), 0.0, slope_q));
      pos = plus + 1;
    }
  } else {
    throw rado::DataError("unknown regularizer '" + text +
                          "' (expected lasso|ridge|linf|slope|combo:...)");
  }
  spec.validate();
  return spec;
}

int run_verify(const std::string& pair_name, std::size_t m, std::size_t trials,
               std::uint64_t seed) {
  using rado::PairKind;
  std::vector<PairKind> kinds;
  if (pair_name == "all") {
    kinds = {PairKind::LogExp, PairKind::SquareMeanVar, PairKind::Relu,
             PairKind::Unhinged};
  } else if (pair_name == "log") {
    kinds = {PairKind::LogExp};
  } else if (pair_name == "square") {
    kinds = {PairKind::SquareMeanVar};
  } else if (pair_name == "relu") {
    kinds = {PairKind::Relu};
  } else if (pair_name == "unhinged") {
    kinds = {PairKind::Unhinged};
  } else {
    throw rado::DataError("unknown pair '" + pair_name + "'");
  }

  bool all_ok = true;
  for (PairKind kind : kinds) {
    const rado::GamePair pair = rado::GamePair::coupled(kind, m, 1.0);
    const auto stats = rado::equivalence_gap_constancy(pair, trials, m, seed);

    double max_identity = 0.0;
    double max_pgq = 0.0;
    const rado::RandomStream root(seed);
    for (std::size_t t = 0; t < trials; ++t) {
      rado::RandomStream stream = root.substream(t);
      std::vector<double> z(m);
      for (auto& zi : z) zi = rado::sample_standard_normal(stream);
      double residual;
      if (kind == PairKind::LogExp) {
        residual = rado::logexp_product_identity_rel_residual(z, 1.0);
      } else {
        residual = std::abs(rado::loss_identity_residual(kind, z, 1.0));
      }
      max_identity = std::max(max_identity, residual);
      if (kind == PairKind::LogExp || kind == PairKind::SquareMeanVar) {
        const auto ev = rado::brute_force_game(pair, z);
        const auto p_from_q = rado::indicator_matrix_times_q(m, ev.q_star);
        for (std::size_t i = 0; i < m; ++i) {
          max_pgq = std::max(max_pgq, std::abs(p_from_q[i] - ev.p_star[i]));
        }
      }
    }

    const double identity_tol =
        (kind == PairKind::Relu || kind == PairKind::Unhinged) ? 1e-12 : 1e-10;
    bool ok = stats.stdev < 1e-8 && max_identity < identity_tol;
    if (kind == PairKind::LogExp || kind == PairKind::SquareMeanVar) {
      ok = ok && max_pgq < 1e-8;
    }
    all_ok = all_ok && ok;

    std::printf("pair=%s m=%zu trials=%zu gap_mean=%.6e gap_stdev=%.1e "
                "max_identity_residual=%.1e",
                rado::to_string(kind).c_str(), m, trials, stats.mean, stats.stdev,
                max_identity);
    if (kind == PairKind::LogExp || kind == PairKind::SquareMeanVar) {
      std::printf(" max_p_vs_Gq=%.1e", max_pgq);
    }
    std::printf(" %s\n", ok ? "PASS" : "FAIL");
  }
  return all_ok ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning sparse linear classifiers from Rademacher observations"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "cap worker threads (results never depend on it)");

  // gen
  auto* gen = app.add_subcommand("gen", "generate rados from a dataset CSV");
  std::string gen_data, gen_mode = "plain", gen_out, gen_label = "label";
  std::optional<std::string> gen_positive;
  std::size_t gen_n = 0, gen_cap = rado::kDefaultEnumerationCap;
  std::uint64_t gen_seed = 0;
  bool gen_force = false;
  gen->add_option("--data", gen_data, "dataset CSV")->required();
  gen->add_option("--n", gen_n, "number of rados (ignored by --mode full)");
  gen->add_option("--mode", gen_mode, "plain|classwise|full")
      ->check(CLI::IsMember({"plain", "classwise", "full"}));
  gen->add_option("--seed", gen_seed, "RNG seed (default 0)");
  gen->add_option("--out", gen_out, "output rado CSV")->required();
  gen->add_option("--label-column", gen_label, "label column name (default: label)");
  gen->add_option("--positive-token", [&gen_positive](const std::vector<std::string>& v) {
    gen_positive = v.at(0);
    return true;
  }, "label token mapped to +1");
  gen->add_option("--cap", gen_cap, "enumeration cap for --mode full");
  bool gen_min_max = false;
  gen->add_flag("--min-max", gen_min_max,
                "min-max scale features to [0,1] before building rados");
  gen->add_flag("--force", gen_force, "overwrite existing outputs");

  // protect
  auto* protect = app.add_subcommand("protect", "deliver rados with eps-DP Laplace noise");
  std::string protect_in, protect_out;
  double protect_eps = 0.0, protect_re = 0.0;
  std::uint64_t protect_seed = 0;
  bool protect_force = false;
  protect->add_option("--rados", protect_in, "input rado CSV")->required();
  protect->add_option("--epsilon", protect_eps, "privacy budget over the whole set")
      ->required();
  protect->add_option("--r-e", protect_re, "l1 diameter bound on edge vectors")
      ->required();
  protect->add_option("--seed", protect_seed, "noise seed (default 0)");
  protect->add_option("--out", protect_out, "output rado CSV")->required();
  protect->add_flag("--force", protect_force, "overwrite existing outputs");

  // train
  auto* train = app.add_subcommand("train", "boost a linear model over rados");
  std::string train_rados, train_reg = "lasso", train_select = "last",
              train_wl = "preference", train_out;
  double train_omega = 0.0, train_gamma = 0.98, train_slope_q = 0.05;
  int train_T = 1000;
  std::uint64_t train_seed = 0;
  bool train_force = false;
  train->add_option("--rados", train_rados, "input rado CSV")->required();
  train->add_option("--reg", train_reg, "lasso|ridge|linf|slope|combo:W*KIND+...");
  train->add_option("--omega", train_omega, "regularization strength (default 0)");
  train->add_option("--T", train_T, "boosting iterations (default 1000)");
  train->add_option("--gamma", train_gamma, "ridge clamp in (0,1] (default 0.98)");
  train->add_option("--select", train_select, "last|best")
      ->check(CLI::IsMember({"last", "best"}));
  train->add_option("--slope-q", train_slope_q, "slope q-value (default 0.05)");
  train->add_option("--wl-mode", train_wl, "first|preference")
      ->check(CLI::IsMember({"first", "preference"}));
  train->add_option("--seed", train_seed, "recorded seed (default 0)");
  train->add_option("--out", train_out, "output model document")->required();
  train->add_flag("--force", train_force, "overwrite existing outputs");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a model on a dataset CSV");
  std::string eval_model, eval_data, eval_label = "label";
  std::optional<std::string> eval_positive;
  eval->add_option("--model", eval_model, "model document")->required();
  eval->add_option("--data", eval_data, "dataset CSV")->required();
  eval->add_option("--label-column", eval_label, "label column name (default: label)");
  eval->add_option("--positive-token", [&eval_positive](const std::vector<std::string>& v) {
    eval_positive = v.at(0);
    return true;
  }, "label token mapped to +1");

  // verify
  auto* verify = app.add_subcommand("verify", "check the example/rado loss equivalences");
  std::string verify_pair = "all";
  std::size_t verify_m = 6, verify_trials = 50;
  std::uint64_t verify_seed = 0;
  verify->add_option("--pair", verify_pair, "all|log|square|relu|unhinged")
      ->check(CLI::IsMember({"all", "log", "square", "relu", "unhinged"}));
  verify->add_option("--m", verify_m, "payoff dimension, at most 12 (default 6)");
  verify->add_option("--trials", verify_trials, "random payoff vectors (default 50)");
  verify->add_option("--seed", verify_seed, "RNG seed (default 0)");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "run a cross-validation grid");
  std::string exp_config, exp_out = "results.csv";
  bool exp_force = false;
  experiment->add_option("--config", exp_config, "experiment config JSON")->required();
  experiment->add_option("--out", exp_out, "results CSV (default results.csv)");
  experiment->add_flag("--force", exp_force, "overwrite existing outputs");

  // dp-budget
  auto* budget = app.add_subcommand("dp-budget", "example-equivalent privacy budget");
  double budget_eps = 0.0;
  std::size_t budget_n = 0, budget_m = 0;
  budget->add_option("--epsilon", budget_eps, "rado privacy budget")->required();
  budget->add_option("--n", budget_n, "number of rados")->required();
  budget->add_option("--m", budget_m, "number of examples")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints the usage message
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (threads > 0) rado::set_thread_cap(threads);

  try {
    if (*gen) {
      rado::Dataset ds = rado::load_csv(gen_data, gen_label, gen_positive);
      rado::ScalingInfo scaling;
      if (gen_min_max) {
        scaling = rado::fit_min_max_scaling(ds);
        ds = rado::apply_scaling(scaling, ds);
      }
      rado::RadoSet rset;
      if (gen_mode == "full") {
        rset = rado::enumerate_rados(ds, gen_cap);
      } else {
        if (gen_n < 1) throw rado::DataError("gen: --n must be >= 1 for sampled modes");
        rset = gen_mode == "classwise" ? rado::sample_classwise(ds, gen_n, gen_seed)
                                       : rado::sample_plain(ds, gen_n, gen_seed);
      }
      rset.scaling = scaling;
      require_writable(gen_out, gen_force);
      require_writable(rado::sidecar_path(gen_out), gen_force);
      rado::write_rados(gen_out, rset);
      std::printf("wrote %zu rados (d=%zu, mode=%s) to %s\n", rset.n(), rset.d(),
                  gen_mode.c_str(), gen_out.c_str());
    } else if (*protect) {
      const rado::RadoSet rset = rado::read_rados(protect_in);
      rado::DpParams params{protect_eps, protect_re, protect_seed};
      const rado::RadoSet shielded = rado::dp_protect(rset, params);
      require_writable(protect_out, protect_force);
      require_writable(rado::sidecar_path(protect_out), protect_force);
      rado::write_rados(protect_out, shielded);
      std::printf("wrote %zu protected rados (epsilon=%g, scale=%g) to %s\n",
                  shielded.n(), protect_eps,
                  rado::dp_noise_scale(params, shielded.n()), protect_out.c_str());
    } else if (*train) {
      const rado::RadoSet rset = rado::read_rados(train_rados);
      rado::BoostConfig config;
      config.T = train_T;
      config.regularizer = parse_regularizer(train_reg, train_omega, train_slope_q);
      config.clamp_gamma = train_gamma;
      config.wl_mode = rado::wl_mode_from_string(train_wl);
      config.select = rado::select_from_string(train_select);
      config.seed = train_seed;
      const rado::LinearModel model = rado::boost(rset, config);
      require_writable(train_out, train_force);
      rado::write_model(train_out, model);
      const auto loss = rado::regularized_exp_rado_loss(rset, model.theta,
                                                        config.regularizer);
      std::printf("trained T=%d selected_t=%d support=%.2f%% train_loss=%.6g%s -> %s\n",
                  config.T, model.selected_iteration,
                  rado::support_percent(model.theta), loss.value,
                  loss.overflowed ? " (overflowed; see log_value)" : "",
                  train_out.c_str());
    } else if (*eval) {
      const rado::LinearModel model = rado::read_model(eval_model);
      const rado::Dataset ds = rado::load_csv(eval_data, eval_label, eval_positive);
      if (ds.d() != model.d()) {
        throw rado::DataError("eval: dataset has d=" + std::to_string(ds.d()) +
                              " but model has d=" + std::to_string(model.d()));
      }
      std::printf("error=%.4f%% support=%.2f%% m=%zu d=%zu\n",
                  rado::zero_one_error_percent(model, ds),
                  rado::support_percent(model.theta), ds.m(), ds.d());
    } else if (*verify) {
      return run_verify(verify_pair, verify_m, verify_trials, verify_seed);
    } else if (*experiment) {
      rado::ExperimentConfig config = rado::load_experiment_config(exp_config);
      // Relative dataset paths resolve against the config file location.
      if (config.dataset_path.is_relative()) {
        config.dataset_path =
            std::filesystem::path(exp_config).parent_path() / config.dataset_path;
      }
      const auto rows = rado::run_experiment(config);
      require_writable(exp_out, exp_force);
      rado::write_results_csv(exp_out, rows);
      for (const auto& row : rows) {
        std::printf("%s %s omega=%g select=%s err=%.2f+-%.2f%% supp=%.2f+-%.2f%%\n",
                    row.domain.c_str(), row.regularizer.c_str(), row.omega,
                    row.select.c_str(), row.test_error_mean, row.test_error_std,
                    row.support_mean, row.support_std);
      }
      std::printf("wrote %zu rows to %s\n", rows.size(), exp_out.c_str());
    } else if (*budget) {
      std::printf("%.5e\n", rado::epsilon_a(budget_eps, budget_n, budget_m));
    }
  } catch (const rado::NumericError& err) {
    std::fprintf(stderr, "numeric error: %s\n", err.what());
    return kExitNumeric;
  } catch (const rado::DataError& err) {
    std::fprintf(stderr, "data error: %s\n", err.what());
    return kExitData;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitData;
  }
  return kExitOk;
}
