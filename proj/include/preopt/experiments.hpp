// Experiment drivers behind the CLI: a verification battery for the
// constructed models and exact identities, estimator sweeps, head-importance
// scans, reweighter concentration fits, first-layer probing, and risk
// decompositions. Every runner derives all randomness from labeled
// substreams of the config seed and sorts its output, so a (config, seed)
// pair fixes every emitted byte regardless of thread scheduling.

#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "preopt/attention.hpp"
#include "preopt/estimators.hpp"
#include "preopt/io.hpp"
#include "preopt/linalg.hpp"
#include "preopt/preprocess.hpp"
#include "preopt/random.hpp"
#include "preopt/task.hpp"

namespace preopt {

// ---------------------------------------------------------------- config

struct ExperimentConfig {
  std::string experiment;
  std::size_t d = 16;
  std::size_t s = 4;
  std::size_t q = 1;
  std::size_t gd_layers = 4;  // k: GD layers of the constructed model
  std::size_t t = 64;         // GD steps of the estimator sweeps
  std::vector<std::size_t> n_list{128};
  std::vector<double> sigma_list{0.1};
  std::vector<double> eta_grid{1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6};
  std::vector<double> lambda_grid{1.0, 1e-1, 1e-2, 1e-3, 1e-4};
  std::vector<double> alpha_grid{1.0, 1e-1, 1e-2, 1e-3, 1e-4};
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  std::string output_path;
  double delta = 0.05;
  WeightPrior prior = WeightPrior::kRademacherOverSqrtS;
  double eta = 0.1;  // step size embedded in constructed models
  std::size_t lasso_max_sweeps = 500;
  double lasso_tol = 1e-8;
  std::vector<std::size_t> probe_steps{1, 2, 4, 8, 16, 32, 64};
  bool corrupt_sign = false;  // verify-only debug knob: flips W_out
  std::string svg_path;       // sweep only: optional risk-vs-n plot

  std::map<std::string, std::string> to_map() const;
};

namespace detail {

inline std::size_t parse_size(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(x);
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a count, got '" + v + "'");
  }
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a real number, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key '" + key + "' expects true/false, got '" + v + "'");
}

template <typename T, typename Parse>
inline std::vector<T> parse_list(const std::string& key, const std::string& v, Parse parse) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse(key, item));
  }
  if (out.empty()) throw ConfigError("config: key '" + key + "' got an empty list");
  return out;
}

template <typename T>
inline std::string join_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, double>) {
      out += format_significant(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

}  // namespace detail

inline std::map<std::string, std::string> ExperimentConfig::to_map() const {
  std::map<std::string, std::string> m;
  m["experiment"] = experiment;
  m["d"] = std::to_string(d);
  m["s"] = std::to_string(s);
  m["q"] = std::to_string(q);
  m["k"] = std::to_string(gd_layers);
  m["t"] = std::to_string(t);
  m["n"] = detail::join_list(n_list);
  m["sigma"] = detail::join_list(sigma_list);
  m["eta_grid"] = detail::join_list(eta_grid);
  m["lambda_grid"] = detail::join_list(lambda_grid);
  m["alpha_grid"] = detail::join_list(alpha_grid);
  m["trials"] = std::to_string(trials);
  m["seed"] = std::to_string(seed);
  m["out"] = output_path;
  m["delta"] = format_significant(delta);
  m["prior"] =
      prior == WeightPrior::kRademacherOverSqrtS ? "rademacher_over_sqrt_s" : "gaussian_then_sparsify";
  m["eta"] = format_significant(eta);
  m["lasso_max_sweeps"] = std::to_string(lasso_max_sweeps);
  m["lasso_tol"] = format_significant(lasso_tol);
  m["probe_steps"] = detail::join_list(probe_steps);
  m["corrupt_sign"] = corrupt_sign ? "true" : "false";
  m["svg"] = svg_path;
  return m;
}

inline ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig cfg;
  cfg.experiment = experiment;
  if (experiment == "verify") {
    cfg.n_list = {32};
    cfg.trials = 1;
  } else if (experiment == "sweep") {
    cfg.n_list = {64, 128};
  } else if (experiment == "heads") {
    cfg.n_list = {128};
  } else if (experiment == "concentration") {
    cfg.n_list = {64, 128, 256, 512, 1024, 2048, 4096, 8192};
  } else if (experiment == "probe") {
    cfg.n_list = {117};
    cfg.q = 11;
    cfg.trials = 100;
  } else if (experiment == "decompose") {
    cfg.d = 8;
    cfg.s = 2;
    cfg.n_list = {32};
    cfg.sigma_list = {0.0, 0.2};
    cfg.t = 16;
    cfg.trials = 500;
  } else {
    throw ConfigError("unknown experiment '" + experiment +
                      "' (expected verify|sweep|heads|concentration|probe|decompose)");
  }
  cfg.output_path = experiment + ".csv";
  return cfg;
}

inline void apply_config_key(ExperimentConfig& cfg, const std::string& key,
                             const std::string& value) {
  using detail::parse_bool;
  using detail::parse_list;
  using detail::parse_real;
  using detail::parse_size;
  if (key == "d") {
    cfg.d = parse_size(key, value);
  } else if (key == "s") {
    cfg.s = parse_size(key, value);
  } else if (key == "q") {
    cfg.q = parse_size(key, value);
  } else if (key == "k") {
    cfg.gd_layers = parse_size(key, value);
  } else if (key == "t") {
    cfg.t = parse_size(key, value);
  } else if (key == "n") {
    cfg.n_list = parse_list<std::size_t>(key, value, parse_size);
  } else if (key == "sigma") {
    cfg.sigma_list = parse_list<double>(key, value, parse_real);
  } else if (key == "eta_grid") {
    cfg.eta_grid = parse_list<double>(key, value, parse_real);
  } else if (key == "lambda_grid") {
    cfg.lambda_grid = parse_list<double>(key, value, parse_real);
  } else if (key == "alpha_grid") {
    cfg.alpha_grid = parse_list<double>(key, value, parse_real);
  } else if (key == "trials") {
    cfg.trials = parse_size(key, value);
  } else if (key == "seed") {
    try {
      cfg.seed = std::stoull(value);
    } catch (const std::exception&) {
      throw ConfigError("config: key 'seed' expects an integer, got '" + value + "'");
    }
  } else if (key == "out") {
    cfg.output_path = value;
  } else if (key == "delta") {
    cfg.delta = parse_real(key, value);
  } else if (key == "prior") {
    if (value == "rademacher_over_sqrt_s" || value == "rademacher") {
      cfg.prior = WeightPrior::kRademacherOverSqrtS;
    } else if (value == "gaussian_then_sparsify" || value == "gaussian") {
      cfg.prior = WeightPrior::kGaussianThenSparsify;
    } else {
      throw ConfigError("config: unknown prior '" + value + "'");
    }
  } else if (key == "eta") {
    cfg.eta = parse_real(key, value);
  } else if (key == "lasso_max_sweeps") {
    cfg.lasso_max_sweeps = parse_size(key, value);
  } else if (key == "lasso_tol") {
    cfg.lasso_tol = parse_real(key, value);
  } else if (key == "probe_steps") {
    cfg.probe_steps = parse_list<std::size_t>(key, value, parse_size);
  } else if (key == "corrupt_sign") {
    cfg.corrupt_sign = parse_bool(key, value);
  } else if (key == "svg") {
    cfg.svg_path = value;
  } else if (key == "experiment") {
    throw ConfigError("config: 'experiment' is fixed by the subcommand");
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.d < 1) throw ConfigError("config: d must be >= 1");
  if (cfg.s < 1 || cfg.s > cfg.d) throw ConfigError("config: need 1 <= s <= d");
  if (cfg.q < 1) throw ConfigError("config: q must be >= 1");
  if (cfg.n_list.empty()) throw ConfigError("config: n list is empty");
  for (std::size_t n : cfg.n_list) {
    if (n < 1) throw ConfigError("config: n entries must be >= 1");
  }
  if (cfg.sigma_list.empty()) throw ConfigError("config: sigma list is empty");
  for (double sg : cfg.sigma_list) {
    if (sg < 0.0) throw ConfigError("config: sigma must be >= 0");
  }
  for (double e : cfg.eta_grid) {
    if (!(e > 0.0)) throw ConfigError("config: eta_grid entries must be positive");
  }
  if (cfg.eta_grid.empty() || cfg.lambda_grid.empty() || cfg.alpha_grid.empty()) {
    throw ConfigError("config: hyperparameter grids must be nonempty");
  }
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ConfigError("config: delta not in (0,1)");
  if (cfg.experiment != "verify" && cfg.trials < 1) {
    throw ConfigError("config: trials must be >= 1");
  }
  if (cfg.experiment == "probe") {
    if (cfg.q < 2) throw ConfigError("config: probe needs q >= 2");
    if (cfg.probe_steps.empty()) throw ConfigError("config: probe_steps is empty");
  }
  if (cfg.experiment == "concentration") {
    std::size_t n_min = cfg.n_list.front(), n_max = cfg.n_list.front();
    for (std::size_t n : cfg.n_list) {
      n_min = std::min(n_min, n);
      n_max = std::max(n_max, n);
    }
    if (cfg.n_list.size() < 2 || n_max < 8 * n_min) {
      throw ConfigError("config: concentration needs an n list spanning at least 3 octaves");
    }
  }
}

inline ExperimentConfig build_config(const std::string& experiment,
                                     const std::map<std::string, std::string>& kv) {
  ExperimentConfig cfg = default_config(experiment);
  for (const auto& [key, value] : kv) apply_config_key(cfg, key, value);
  validate_config(cfg);
  return cfg;
}

// ---------------------------------------------------------------- results

struct CheckResult {
  std::string name;
  bool pass = false;
  double max_deviation = 0.0;
  std::string note;
};

struct RunOutput {
  std::vector<ResultRow> rows;
  std::vector<CheckResult> checks;  // populated by verify-style runs
  Json summary;
};

namespace detail {

inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const unsigned hw = std::thread::hardware_concurrency();
  const std::size_t workers = std::min<std::size_t>(hw == 0 ? 1 : hw, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (std::thread& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

inline double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return (n % 2 == 1) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

inline std::string trial_label(const std::string& scope, std::size_t a, std::size_t b,
                               std::size_t trial) {
  return scope + "/" + std::to_string(a) + "/" + std::to_string(b) + "/trial=" +
         std::to_string(trial);
}

}  // namespace detail

// ---------------------------------------------------------------- verify suites

// Forward pass of the assembled model vs the preprocess-then-GD solver at
// every query column, over instances spanning small dims, sparsities, window
// sizes, depths and noise levels.
inline CheckResult oracle_equivalence_check(std::uint64_t seed, std::size_t instances,
                                            bool corrupt_sign) {
  const RandomSource root(seed);
  const std::size_t dims[] = {2, 4, 8, 16};
  const double sigmas[] = {0.0, 0.1, 0.5};
  const double eta = 0.1;
  double max_dev = 0.0;
  double max_abs_dev = 0.0;

  std::vector<double> devs(instances, 0.0);
  std::vector<double> abs_devs(instances, 0.0);
  detail::parallel_for(instances, [&](std::size_t i) {
    RandomSource rng = root.split("oracle/" + std::to_string(i));
    const std::size_t d = dims[i % 4];
    const std::size_t s = 1 + rng.pick_index(std::max<std::size_t>(1, d / 2));
    const std::size_t n = 8 + rng.pick_index(57);  // 8..64
    const std::size_t k = i % 9;                   // 0..8
    const double sigma = sigmas[i % 3];
    const std::size_t q = 1 + rng.pick_index(3);

    DiagonalMatrix cov = DiagonalMatrix::identity(d);
    if (i % 2 == 1) {
      for (std::size_t j = 0; j < d; ++j) cov[j] = 0.5 + 1.5 * rng.uniform();
    }
    const WeightPrior prior =
        (i % 5 < 3) ? WeightPrior::kRademacherOverSqrtS : WeightPrior::kGaussianThenSparsify;
    const SparseLinearTask task = sample_task(d, s, cov, sigma, prior, rng);
    const SampledDataset sampled = sample_dataset(task, n, q, rng);
    const PromptMatrix prompt = build_prompt(sampled.data);

    AttentionModel model = assemble_icl_model(d, n, eta, k);
    if (corrupt_sign) model.w_out(0, d) = 1.0;
    const ForwardTrace trace = forward(model, prompt);

    const GdTrajectory traj = pre_gd_solve(sampled.data, eta, k);
    const DiagonalMatrix& rew = traj.reweighter->r_hat;
    double dev = 0.0, abs_dev = 0.0;
    for (std::size_t c = 0; c < q; ++c) {
      const DenseVector xt = diag_apply(rew, sampled.data.queries[c].x);
      const double expected = dot(traj.final_iterate(), xt);
      const double got = trace.y_hat[n + c];
      abs_dev = std::max(abs_dev, std::abs(got - expected));
      dev = std::max(dev, std::abs(got - expected) / (1.0 + std::abs(got)));
    }
    devs[i] = dev;
    abs_devs[i] = abs_dev;
  });
  for (std::size_t i = 0; i < instances; ++i) {
    max_dev = std::max(max_dev, devs[i]);
    max_abs_dev = std::max(max_abs_dev, abs_devs[i]);
  }

  CheckResult out;
  out.name = corrupt_sign ? "oracle_equivalence(corrupted_sign)" : "oracle_equivalence";
  out.max_deviation = max_dev;
  out.pass = max_dev <= 1e-9;
  out.note = "instances=" + std::to_string(instances) +
             " max_abs_dev=" + format_significant(max_abs_dev);
  return out;
}

// First-layer hidden state vs the preprocessing module: reweighted features
// in rows 0..d-1, labels in row d, zeros elsewhere.
inline CheckResult preprocess_layer_check(std::uint64_t seed, std::size_t instances) {
  const RandomSource root(seed);
  const std::size_t dims[] = {1, 2, 4, 8, 16};
  double max_dev = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    RandomSource rng = root.split("prop1/" + std::to_string(i));
    const std::size_t d = dims[i % 5];
    const std::size_t s = 1 + rng.pick_index(d);
    const std::size_t n = 4 + rng.pick_index(29);
    const std::size_t q = 1 + rng.pick_index(3);
    const double sigma = (i % 2) ? 0.1 : 0.0;
    const SparseLinearTask task = sample_task(d, s, DiagonalMatrix::identity(d), sigma,
                                              WeightPrior::kGaussianThenSparsify, rng);
    const SampledDataset sampled = sample_dataset(task, n, q, rng);
    const PromptMatrix prompt = build_prompt(sampled.data);
    const AttentionModel model = assemble_icl_model(d, n, 0.1, 0);
    const ForwardTrace trace = forward(model, prompt);
    const DenseMatrix& h1 = trace.hidden[1];

    const DiagonalReweighter rew = build_reweighter(estimate_correlations(sampled.data.examples));
    for (std::size_t c = 0; c < n + q; ++c) {
      const DenseVector& x =
          c < n ? sampled.data.examples[c].x : sampled.data.queries[c - n].x;
      const DenseVector xt = diag_apply(rew.r_hat, x);
      for (std::size_t r = 0; r < d; ++r) {
        max_dev = std::max(max_dev, std::abs(h1(r, c) - xt[r]));
      }
      const double label = c < n ? sampled.data.examples[c].y : 0.0;
      max_dev = std::max(max_dev, std::abs(h1(d, c) - label));
      for (std::size_t r = d + 1; r < 3 * d; ++r) {
        max_dev = std::max(max_dev, std::abs(h1(r, c)));
      }
    }
  }
  CheckResult out;
  out.name = "preprocess_layer_state";
  out.max_deviation = max_dev;
  out.pass = max_dev <= 1e-12;
  out.note = "instances=" + std::to_string(instances);
  return out;
}

struct DecompositionCheckSummary {
  CheckResult identity_pre;
  CheckResult identity_raw;
  CheckResult two_term_noiseless;
  double max_cross_noisy = 0.0;
};

// Exact decomposition identity against the solver-path risk for both the
// reweighted and the raw GD estimators, plus the two-term identity on the
// noiseless instances where the cross term vanishes.
inline DecompositionCheckSummary decomposition_identity_check(std::uint64_t seed,
                                                              std::size_t instances) {
  const RandomSource root(seed);
  const std::size_t dims[] = {4, 8, 16};
  const double sigmas[] = {0.0, 0.1, 0.2, 0.5};
  const double etas[] = {0.05, 0.1, 0.2};

  std::vector<double> dev_pre(instances, 0.0), dev_raw(instances, 0.0),
      dev_two_term(instances, 0.0), cross_mag(instances, 0.0);
  detail::parallel_for(instances, [&](std::size_t i) {
    RandomSource rng = root.split("decomp/" + std::to_string(i));
    const std::size_t d = dims[i % 3];
    const std::size_t s = 1 + rng.pick_index(std::max<std::size_t>(1, d / 2));
    const std::size_t n = 16 + rng.pick_index(49);
    const double sigma = sigmas[i % 4];
    const std::size_t steps = i % 33;
    const double eta = etas[i % 3];
    const SparseLinearTask task = sample_task(d, s, DiagonalMatrix::identity(d), sigma,
                                              WeightPrior::kRademacherOverSqrtS, rng);
    const SampledDataset sampled = sample_dataset(task, n, 1, rng);

    const GdTrajectory pre_traj = pre_gd_solve(sampled.data, eta, steps);
    const double pre_risk =
        excess_risk_pre(pre_traj.final_iterate(), pre_traj.reweighter->r_hat, task);
    const RiskDecomposition pre_dec =
        decompose_pre_gd(sampled.data, sampled.example_noise, task, eta, steps);
    dev_pre[i] = std::abs(pre_dec.total - pre_risk) / (1.0 + pre_risk);

    const GdTrajectory raw_traj =
        gd_solve(sampled.data.examples, eta, steps, DenseVector(d));
    const double raw_risk = excess_risk_raw(raw_traj.final_iterate(), task);
    const RiskDecomposition raw_dec =
        decompose_raw_gd(sampled.data, sampled.example_noise, task, eta, steps);
    dev_raw[i] = std::abs(raw_dec.total - raw_risk) / (1.0 + raw_risk);

    if (sigma == 0.0) {
      const double dev1 =
          std::abs(pre_dec.bias + pre_dec.variance - pre_dec.total) / (1.0 + pre_dec.total);
      const double dev2 =
          std::abs(raw_dec.bias + raw_dec.variance - raw_dec.total) / (1.0 + raw_dec.total);
      dev_two_term[i] = std::max(dev1, dev2);
      dev_two_term[i] = std::max(dev_two_term[i],
                                 std::max(std::abs(pre_dec.variance), std::abs(raw_dec.variance)));
    } else {
      cross_mag[i] = std::max(std::abs(pre_dec.cross), std::abs(raw_dec.cross));
    }
  });

  DecompositionCheckSummary out;
  double mp = 0, mr = 0, mt = 0, mc = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    mp = std::max(mp, dev_pre[i]);
    mr = std::max(mr, dev_raw[i]);
    mt = std::max(mt, dev_two_term[i]);
    mc = std::max(mc, cross_mag[i]);
  }
  out.identity_pre = {"decomposition_identity_pre_gd", mp <= 1e-8, mp,
                      "instances=" + std::to_string(instances)};
  out.identity_raw = {"decomposition_identity_raw_gd", mr <= 1e-8, mr,
                      "instances=" + std::to_string(instances)};
  out.two_term_noiseless = {"decomposition_two_term_noiseless", mt <= 1e-8, mt,
                            "cross term is zero without noise"};
  out.max_cross_noisy = mc;
  return out;
}

struct MaskingCheckSummary {
  CheckResult gd_layer;
  CheckResult first_layer;
  CheckResult involution;
};

// Masking identities on the constructed models: a masked GD layer behaves as
// one fewer GD step, a masked first-layer head behaves as zeroing that
// reweighted feature, and mask/unmask restores outputs bit for bit.
inline MaskingCheckSummary masking_identity_check(std::uint64_t seed, std::size_t instances) {
  const RandomSource root(seed);
  const std::size_t dims[] = {4, 8, 16};
  const double sigmas[] = {0.0, 0.1, 0.5};
  const double eta = 0.1;
  double dev_gd = 0.0, dev_first = 0.0;
  bool bit_identical = true;

  for (std::size_t i = 0; i < instances; ++i) {
    RandomSource rng = root.split("mask/" + std::to_string(i));
    const std::size_t d = dims[i % 3];
    const std::size_t s = 1 + rng.pick_index(std::max<std::size_t>(1, d / 2));
    const std::size_t n = 8 + rng.pick_index(33);
    const std::size_t k = 1 + rng.pick_index(6);
    const double sigma = sigmas[i % 3];
    const std::size_t q = 1 + rng.pick_index(2);
    const SparseLinearTask task = sample_task(d, s, DiagonalMatrix::identity(d), sigma,
                                              WeightPrior::kRademacherOverSqrtS, rng);
    const SampledDataset sampled = sample_dataset(task, n, q, rng);
    const PromptMatrix prompt = build_prompt(sampled.data);

    const AttentionModel model = assemble_icl_model(d, n, eta, k);
    const ForwardTrace base = forward(model, prompt);

    // any GD layer masked == k-1 GD layers
    const std::size_t gd_index = 1 + rng.pick_index(k);
    const ForwardTrace masked_gd = forward(mask_head(model, gd_index, 0), prompt);
    const ForwardTrace shallow = forward(assemble_icl_model(d, n, eta, k - 1), prompt);
    for (std::size_t c = 0; c < n + q; ++c) {
      dev_gd = std::max(dev_gd, std::abs(masked_gd.y_hat[c] - shallow.y_hat[c]) /
                                    (1.0 + std::abs(shallow.y_hat[c])));
    }

    // first-layer head j masked == feature j zeroed after preprocessing
    const std::size_t j = rng.pick_index(d);
    const ForwardTrace masked_first = forward(mask_head(model, 0, j), prompt);
    const DiagonalReweighter rew = build_reweighter(estimate_correlations(sampled.data.examples));
    InContextDataset zeroed = apply_preprocess(sampled.data, rew);
    for (Example& e : zeroed.examples) e.x[j] = 0.0;
    for (Query& query : zeroed.queries) query.x[j] = 0.0;
    const GdTrajectory traj = gd_solve(zeroed.examples, eta, k, DenseVector(d));
    for (std::size_t c = 0; c < q; ++c) {
      const double expected = dot(traj.final_iterate(), zeroed.queries[c].x);
      dev_first = std::max(dev_first, std::abs(masked_first.y_hat[n + c] - expected) /
                                          (1.0 + std::abs(expected)));
    }

    // mask then unmask restores the forward pass exactly
    const AttentionModel restored = unmask_head(mask_head(model, 0, j), 0, j);
    const ForwardTrace again = forward(restored, prompt);
    for (std::size_t c = 0; c < n + q; ++c) {
      if (again.y_hat[c] != base.y_hat[c]) bit_identical = false;
    }
    for (std::size_t l = 0; l < base.hidden.size(); ++l) {
      if (again.hidden[l].entries() != base.hidden[l].entries()) bit_identical = false;
    }
  }

  MaskingCheckSummary out;
  out.gd_layer = {"masking_gd_layer_equals_shallower_model", dev_gd <= 1e-9, dev_gd,
                  "instances=" + std::to_string(instances)};
  out.first_layer = {"masking_first_layer_equals_zeroed_feature", dev_first <= 1e-9, dev_first,
                     "instances=" + std::to_string(instances)};
  out.involution = {"mask_unmask_bit_identical", bit_identical,
                    bit_identical ? 0.0 : 1.0, ""};
  return out;
}

// Closed-form estimator oracles: ridge and OLS identities, the Lasso
// vanishing-penalty limit, noiseless GD convergence, the one-step tie
// between GD and the correlation estimate, and the schedule scaling law.
inline CheckResult estimator_oracle_check(std::uint64_t seed, std::size_t instances) {
  const RandomSource root(seed);
  double max_dev = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    RandomSource rng = root.split("solver/" + std::to_string(i));
    const std::size_t d = 4 + rng.pick_index(8);
    const std::size_t s = 1 + rng.pick_index(d / 2 + 1);
    const std::size_t n = 4 * d + rng.pick_index(2 * d);
    const double sigma = (i % 3 == 0) ? 0.0 : 0.2;
    const SparseLinearTask task = sample_task(d, s, DiagonalMatrix::identity(d), sigma,
                                              WeightPrior::kRademacherOverSqrtS, rng);
    const SampledDataset sampled = sample_dataset(task, n, 1, rng);
    const std::vector<Example>& examples = sampled.data.examples;

    // ridge residual identity at a positive regularizer
    const double lambda = 0.1;
    const DenseVector w_ridge = ridge_solve(examples, lambda);
    const DenseMatrix x = detail::design_matrix(examples);
    DenseMatrix a = empirical_second_moment(x);
    for (std::size_t j = 0; j < d; ++j) a(j, j) += lambda;
    const DenseVector lhs = mat_vec(a, w_ridge);
    DenseVector rhs = mat_tvec(x, detail::label_vector(examples));
    for (std::size_t j = 0; j < d; ++j) rhs[j] /= static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j) max_dev = std::max(max_dev, std::abs(lhs[j] - rhs[j]));

    // ridge at lambda=0 meets OLS; noiseless instances also recover w*
    const DenseVector w_ols = ols_solve(examples);
    const DenseVector w_ridge0 = ridge_solve(examples, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      max_dev = std::max(max_dev, std::abs(w_ridge0[j] - w_ols[j]) * 1e-2);
    }
    if (sigma == 0.0) {
      for (std::size_t j = 0; j < d; ++j) {
        max_dev = std::max(max_dev, std::abs(w_ols[j] - task.weights[j]) * 1e-2);
      }
      // vanishing lasso penalty approaches the least-squares solution
      const LassoResult lasso = lasso_cd(examples, 1e-12, 20000, 1e-12);
      for (std::size_t j = 0; j < d; ++j) {
        max_dev = std::max(max_dev, std::abs(lasso.w[j] - w_ols[j]) * 1e-6);
      }
      // long noiseless GD drives the excess risk to the floor
      const GdTrajectory traj = gd_solve(examples, 0.5, 500, DenseVector(d));
      max_dev = std::max(max_dev, excess_risk_raw(traj.final_iterate(), task) * 1e-4);
    }

    // one GD step from zero is eta times the correlation estimate
    const double eta = 0.3;
    const GdTrajectory one = gd_solve(examples, eta, 1, DenseVector(d));
    const CorrelationEstimate est = estimate_correlations(examples);
    for (std::size_t j = 0; j < d; ++j) {
      max_dev = std::max(max_dev, std::abs(one.final_iterate()[j] - eta * est.r_hat[j]) * 1e2);
    }
  }
  CheckResult out;
  out.name = "estimator_closed_form_oracles";
  out.max_deviation = max_dev;
  out.pass = max_dev <= 1e-10;
  out.note = "instances=" + std::to_string(instances) + " (deviations scaled to a 1e-10 gate)";
  return out;
}

inline CheckResult schedule_tuning_check(std::uint64_t seed) {
  RandomSource rng(seed);
  double max_dev = 0.0;
  const SparseLinearTask task = sample_task(16, 4, DiagonalMatrix::identity(16), 0.1,
                                            WeightPrior::kRademacherOverSqrtS, rng);
  // beta for the +-1/sqrt(s) prior with identity covariance
  const ScheduleSuggestion sched = theoretical_schedule(task, 4096, 0.05);
  max_dev = std::max(max_dev, std::abs(sched.beta - 0.5));
  // sqrt(2) growth of the eta*t target when the 1/n term dominates (0.01 band)
  const double ratio = schedule_target(task, 200000, 0.05) / schedule_target(task, 100000, 0.05);
  max_dev = std::max(max_dev, std::abs(ratio - std::sqrt(2.0)) * 1e-8);
  // eta*t within a factor 4 of the target
  const double target_ratio =
      sched.eta * static_cast<double>(sched.steps) / schedule_target(task, 4096, 0.05);
  if (target_ratio < 0.25 || target_ratio > 4.0) max_dev = std::max(max_dev, 1.0);

  // grid tuning returns the exhaustive optimum and skips divergent steps
  const SampledDataset sampled = sample_dataset(task, 128, 1, rng);
  const std::vector<double> grid{1e8, 1.0, 1e-1, 1e-2, 1e-3};
  const TunedRate tuned = tune_learning_rate(SolverKind::kPreGd, sampled.data, task, 64, grid);
  if (!std::isfinite(tuned.risk) || tuned.eta == 1e8) max_dev = std::max(max_dev, 1.0);
  for (double eta : grid) {
    double risk = std::numeric_limits<double>::infinity();
    try {
      const GdTrajectory traj = pre_gd_solve(sampled.data, eta, 64);
      risk = excess_risk_pre(traj.final_iterate(), traj.reweighter->r_hat, task);
    } catch (const DivergenceError&) {
    }
    if (risk < tuned.risk - 1e-15) max_dev = std::max(max_dev, 1.0);
  }
  CheckResult out;
  out.name = "schedule_and_grid_tuning";
  out.max_deviation = max_dev;
  out.pass = max_dev <= 1e-10;
  out.note = "";
  return out;
}

// ---------------------------------------------------------------- runners

inline RunOutput run_verify(const ExperimentConfig& cfg) {
  RunOutput out;
  out.checks.push_back(oracle_equivalence_check(cfg.seed, 120, cfg.corrupt_sign));
  out.checks.push_back(preprocess_layer_check(cfg.seed, 50));
  out.checks.push_back(estimator_oracle_check(cfg.seed, 30));
  out.checks.push_back(schedule_tuning_check(cfg.seed));
  const DecompositionCheckSummary dec = decomposition_identity_check(cfg.seed, 500);
  out.checks.push_back(dec.identity_pre);
  out.checks.push_back(dec.identity_raw);
  out.checks.push_back(dec.two_term_noiseless);
  const MaskingCheckSummary mask = masking_identity_check(cfg.seed, 60);
  out.checks.push_back(mask.gd_layer);
  out.checks.push_back(mask.first_layer);
  out.checks.push_back(mask.involution);

  std::size_t pass_count = 0;
  Json checks = Json::array();
  for (const CheckResult& c : out.checks) {
    if (c.pass) ++pass_count;
    checks.push_back(Json{{"name", c.name},
                          {"pass", c.pass},
                          {"max_deviation", c.max_deviation},
                          {"note", c.note}});
    ResultRow row;
    row.experiment = cfg.experiment;
    row.d = cfg.d;
    row.s = cfg.s;
    row.n = cfg.n_list.front();
    row.q = cfg.q;
    row.sigma = cfg.sigma_list.front();
    row.key = c.name;
    row.seed = cfg.seed;
    row.metric = "max_deviation";
    row.value = c.max_deviation;
    out.rows.push_back(row);
    row.metric = "pass";
    row.value = c.pass ? 1.0 : 0.0;
    out.rows.push_back(row);
  }
  out.summary["checks"] = checks;
  out.summary["pass_count"] = pass_count;
  out.summary["fail_count"] = out.checks.size() - pass_count;
  out.summary["max_cross_term_noisy"] = dec.max_cross_noisy;
  return out;
}

inline RunOutput run_sweep(const ExperimentConfig& cfg) {
  RunOutput out;
  const RandomSource root(cfg.seed);
  struct Cell {
    double risk[5];
    bool diverged[5];
    double hyper[5];
  };
  const char* names[5] = {"pre_gd", "raw_gd", "ridge", "ols", "lasso"};

  const std::size_t cells = cfg.n_list.size() * cfg.sigma_list.size() * cfg.trials;
  std::vector<Cell> results(cells);
  detail::parallel_for(cells, [&](std::size_t idx) {
    const std::size_t trial = idx % cfg.trials;
    const std::size_t si = (idx / cfg.trials) % cfg.sigma_list.size();
    const std::size_t ni = idx / (cfg.trials * cfg.sigma_list.size());
    const std::size_t n = cfg.n_list[ni];
    const double sigma = cfg.sigma_list[si];
    RandomSource rng = root.split(detail::trial_label("sweep", ni, si, trial));
    const SparseLinearTask task =
        sample_task(cfg.d, cfg.s, DiagonalMatrix::identity(cfg.d), sigma, cfg.prior, rng);
    const SampledDataset sampled = sample_dataset(task, n, cfg.q, rng);

    Cell cell{};
    for (int e = 0; e < 5; ++e) {
      cell.risk[e] = std::numeric_limits<double>::infinity();
      cell.diverged[e] = false;
      cell.hyper[e] = 0.0;
    }

    const TunedRate pre = tune_learning_rate(SolverKind::kPreGd, sampled.data, task, cfg.t,
                                             cfg.eta_grid);
    cell.risk[0] = pre.risk;
    cell.hyper[0] = pre.eta;
    cell.diverged[0] = !std::isfinite(pre.risk);

    const TunedRate raw = tune_learning_rate(SolverKind::kRawGd, sampled.data, task, cfg.t,
                                             cfg.eta_grid);
    cell.risk[1] = raw.risk;
    cell.hyper[1] = raw.eta;
    cell.diverged[1] = !std::isfinite(raw.risk);

    for (double lambda : cfg.lambda_grid) {
      double risk = std::numeric_limits<double>::infinity();
      try {
        risk = excess_risk_raw(ridge_solve(sampled.data.examples, lambda), task);
      } catch (const SingularSystemError&) {
      }
      if (!std::isfinite(risk)) continue;
      if (risk < cell.risk[2] || (risk == cell.risk[2] && lambda > cell.hyper[2])) {
        cell.risk[2] = risk;
        cell.hyper[2] = lambda;
      }
    }
    cell.diverged[2] = !std::isfinite(cell.risk[2]);

    cell.risk[3] = excess_risk_raw(ols_solve(sampled.data.examples), task);
    cell.diverged[3] = !std::isfinite(cell.risk[3]);

    for (double alpha : cfg.alpha_grid) {
      const LassoResult lres =
          lasso_cd(sampled.data.examples, alpha, cfg.lasso_max_sweeps, cfg.lasso_tol);
      const double risk = excess_risk_raw(lres.w, task);
      if (!std::isfinite(risk)) continue;
      if (risk < cell.risk[4] || (risk == cell.risk[4] && alpha > cell.hyper[4])) {
        cell.risk[4] = risk;
        cell.hyper[4] = alpha;
      }
    }
    cell.diverged[4] = !std::isfinite(cell.risk[4]);
    results[idx] = cell;
  });

  const char* hyper_metric[5] = {"selected_eta", "selected_eta", "selected_lambda", "",
                                 "selected_alpha"};
  Json medians = Json::object();
  for (std::size_t ni = 0; ni < cfg.n_list.size(); ++ni) {
    for (std::size_t si = 0; si < cfg.sigma_list.size(); ++si) {
      std::vector<std::vector<double>> risks(5);
      for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
        const std::size_t idx = (ni * cfg.sigma_list.size() + si) * cfg.trials + trial;
        const Cell& cell = results[idx];
        for (int e = 0; e < 5; ++e) {
          ResultRow row;
          row.experiment = cfg.experiment;
          row.d = cfg.d;
          row.s = cfg.s;
          row.n = cfg.n_list[ni];
          row.q = cfg.q;
          row.sigma = cfg.sigma_list[si];
          row.key = names[e];
          row.seed = cfg.seed;
          row.trial = trial;
          row.metric = "excess_risk";
          row.value = cell.diverged[e] ? 0.0 : cell.risk[e];
          row.diverged = cell.diverged[e];
          out.rows.push_back(row);
          if (hyper_metric[e][0] != '\0') {
            row.metric = hyper_metric[e];
            row.value = cell.hyper[e];
            row.diverged = false;
            out.rows.push_back(row);
          }
          risks[e].push_back(cell.risk[e]);
        }
      }
      const std::string cell_key = "n=" + std::to_string(cfg.n_list[ni]) +
                                   ",sigma=" + format_significant(cfg.sigma_list[si]);
      Json per = Json::object();
      for (int e = 0; e < 5; ++e) per[names[e]] = detail::median(risks[e]);
      medians[cell_key] = per;
    }
  }
  out.summary["median_excess_risk"] = medians;
  return out;
}

// Static log-log plot of the sweep medians (risk vs n per estimator) at the
// first noise level. The CSV stays authoritative; this is a quick look.
inline void write_sweep_svg(const RunOutput& sweep, const ExperimentConfig& cfg,
                            const std::string& path) {
  const char* names[5] = {"pre_gd", "raw_gd", "ridge", "ols", "lasso"};
  const char* colors[5] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};
  const double width = 640, height = 480, margin = 70;
  const Json& medians = sweep.summary.at("median_excess_risk");
  const double sigma = cfg.sigma_list.front();

  double min_n = 1e300, max_n = 0, min_r = 1e300, max_r = 0;
  for (std::size_t n : cfg.n_list) {
    min_n = std::min(min_n, static_cast<double>(n));
    max_n = std::max(max_n, static_cast<double>(n));
    const std::string key = "n=" + std::to_string(n) + ",sigma=" + format_significant(sigma);
    for (const char* est : names) {
      const double r = medians.at(key).at(est).get<double>();
      if (std::isfinite(r) && r > 0.0) {
        min_r = std::min(min_r, r);
        max_r = std::max(max_r, r);
      }
    }
  }
  if (!(max_r > 0.0)) return;  // nothing plottable
  const auto x_of = [&](double n) {
    if (max_n == min_n) return margin + (width - 2 * margin) * 0.5;
    return margin +
           (width - 2 * margin) * (std::log(n) - std::log(min_n)) /
               (std::log(max_n) - std::log(min_n));
  };
  const auto y_of = [&](double r) {
    if (max_r == min_r) return height - margin - (height - 2 * margin) * 0.5;
    return height - margin -
           (height - 2 * margin) * (std::log(r) - std::log(min_r)) /
               (std::log(max_r) - std::log(min_r));
  };

  std::ofstream out(path);
  if (!out) throw IoError("write_sweep_svg: cannot open " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - margin / 3
      << "\" text-anchor=\"middle\" font-size=\"14\">in-context examples n (log)</text>\n";
  out << "<text x=\"18\" y=\"" << height / 2
      << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 18 " << height / 2
      << ")\">median excess risk (log)</text>\n";
  for (std::size_t n : cfg.n_list) {
    out << "<text x=\"" << x_of(static_cast<double>(n)) << "\" y=\"" << height - margin + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << n << "</text>\n";
  }
  out << "<text x=\"" << margin - 6 << "\" y=\"" << y_of(min_r)
      << "\" text-anchor=\"end\" font-size=\"11\">" << format_significant(min_r) << "</text>\n";
  out << "<text x=\"" << margin - 6 << "\" y=\"" << y_of(max_r)
      << "\" text-anchor=\"end\" font-size=\"11\">" << format_significant(max_r) << "</text>\n";

  for (int e = 0; e < 5; ++e) {
    std::string points;
    for (std::size_t n : cfg.n_list) {
      const std::string key = "n=" + std::to_string(n) + ",sigma=" + format_significant(sigma);
      const double r = medians.at(key).at(names[e]).get<double>();
      if (!std::isfinite(r) || r <= 0.0) continue;
      const double px = x_of(static_cast<double>(n)), py = y_of(r);
      points += format_significant(px) + "," + format_significant(py) + " ";
      out << "<circle cx=\"" << format_significant(px) << "\" cy=\"" << format_significant(py)
          << "\" r=\"3.5\" fill=\"" << colors[e] << "\"/>\n";
    }
    if (!points.empty()) {
      out << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"" << colors[e]
          << "\" stroke-width=\"1.5\"/>\n";
    }
    out << "<text x=\"" << width - margin + 8 << "\" y=\"" << margin + 18 * e
        << "\" font-size=\"12\" fill=\"" << colors[e] << "\">" << names[e] << "</text>\n";
  }
  out << "</svg>\n";
}

inline RunOutput run_heads(const ExperimentConfig& cfg) {
  RunOutput out;
  const RandomSource root(cfg.seed);
  const std::size_t n = cfg.n_list.front();
  const double sigma = cfg.sigma_list.front();

  RandomSource task_rng = root.split("heads/task");
  const SparseLinearTask task =
      sample_task(cfg.d, cfg.s, DiagonalMatrix::identity(cfg.d), sigma, cfg.prior, task_rng);

  std::vector<EvalInstance> instances(cfg.trials);
  detail::parallel_for(cfg.trials, [&](std::size_t trial) {
    RandomSource rng = root.split("heads/trial=" + std::to_string(trial));
    instances[trial] = {task, sample_dataset(task, n, cfg.q, rng).data};
  });

  const AttentionModel model = assemble_icl_model(cfg.d, n, cfg.eta, cfg.gd_layers);
  const HeadImportance imp = head_importance(model, instances, ImportanceMode::kIclRisk);

  double row1_support_mass = 0.0;
  double gd_row_dev = 0.0;
  double row_sum_dev = 0.0;
  for (std::size_t li = 0; li < imp.raw_deltas.size(); ++li) {
    double row_sum = 0.0;
    for (std::size_t hi = 0; hi < imp.raw_deltas[li].size(); ++hi) {
      ResultRow row;
      row.experiment = cfg.experiment;
      row.d = cfg.d;
      row.s = cfg.s;
      row.n = n;
      row.q = cfg.q;
      row.sigma = sigma;
      row.seed = cfg.seed;
      row.key = "l" + std::to_string(li + 1) + "h" + std::to_string(hi + 1);
      row.metric = "delta_risk";
      row.value = imp.raw_deltas[li][hi];
      out.rows.push_back(row);
      row.metric = "weight";
      row.value = imp.normalized[li][hi];
      out.rows.push_back(row);
      if (li == 0) {
        row.metric = "on_support";
        const bool on = std::find(task.support.begin(), task.support.end(), hi) !=
                        task.support.end();
        row.value = on ? 1.0 : 0.0;
        out.rows.push_back(row);
        if (on) row1_support_mass += imp.normalized[li][hi];
      } else {
        gd_row_dev = std::max(gd_row_dev, std::abs(imp.normalized[li][hi] - 1.0));
      }
      row_sum += imp.normalized[li][hi];
    }
    if (!imp.row_flagged[li]) {
      row_sum_dev = std::max(row_sum_dev, std::abs(row_sum - 1.0));
    }
    ResultRow flag_row;
    flag_row.experiment = cfg.experiment;
    flag_row.d = cfg.d;
    flag_row.s = cfg.s;
    flag_row.n = n;
    flag_row.q = cfg.q;
    flag_row.sigma = sigma;
    flag_row.seed = cfg.seed;
    flag_row.key = "l" + std::to_string(li + 1);
    flag_row.metric = "flagged";
    flag_row.value = imp.row_flagged[li] ? 1.0 : 0.0;
    out.rows.push_back(flag_row);
  }
  out.summary["row1_support_mass"] = row1_support_mass;
  out.summary["gd_row_max_dev_from_one"] = gd_row_dev;
  out.summary["unflagged_row_sum_max_dev"] = row_sum_dev;
  Json flags = Json::array();
  for (std::uint8_t f : imp.row_flagged) flags.push_back(static_cast<int>(f));
  out.summary["row_flags"] = flags;
  return out;
}

inline RunOutput run_concentration(const ExperimentConfig& cfg) {
  RunOutput out;
  const RandomSource root(cfg.seed);
  const double sigma = cfg.sigma_list.front();

  std::vector<std::vector<double>> gaps(cfg.n_list.size(),
                                        std::vector<double>(cfg.trials, 0.0));
  const std::size_t cells = cfg.n_list.size() * cfg.trials;
  detail::parallel_for(cells, [&](std::size_t idx) {
    const std::size_t ni = idx / cfg.trials;
    const std::size_t trial = idx % cfg.trials;
    RandomSource rng = root.split(detail::trial_label("conc", ni, 0, trial));
    const SparseLinearTask task =
        sample_task(cfg.d, cfg.s, DiagonalMatrix::identity(cfg.d), sigma, cfg.prior, rng);
    const SampledDataset sampled = sample_dataset(task, cfg.n_list[ni], 1, rng);
    const CorrelationEstimate est = estimate_correlations(sampled.data.examples);
    const PopulationReweighter pop = population_reweighter(task);
    double gap = 0.0;
    for (std::size_t j = 0; j < cfg.d; ++j) {
      gap = std::max(gap, std::abs(est.r_hat[j] - pop.r[j]));
    }
    gaps[ni][trial] = gap;
  });

  std::vector<double> log_n, log_mean, mean_log;
  for (std::size_t ni = 0; ni < cfg.n_list.size(); ++ni) {
    double mean = 0.0, mlog = 0.0;
    for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
      ResultRow row;
      row.experiment = cfg.experiment;
      row.d = cfg.d;
      row.s = cfg.s;
      row.n = cfg.n_list[ni];
      row.q = 1;
      row.sigma = sigma;
      row.key = "reweighter";
      row.metric = "gap";
      row.value = gaps[ni][trial];
      row.seed = cfg.seed;
      row.trial = trial;
      out.rows.push_back(row);
      mean += gaps[ni][trial];
      mlog += std::log(std::max(gaps[ni][trial], 1e-300));
    }
    mean /= static_cast<double>(cfg.trials);
    mlog /= static_cast<double>(cfg.trials);
    log_n.push_back(std::log(static_cast<double>(cfg.n_list[ni])));
    log_mean.push_back(std::log(std::max(mean, 1e-300)));
    mean_log.push_back(mlog);

    ResultRow mean_row;
    mean_row.experiment = cfg.experiment;
    mean_row.d = cfg.d;
    mean_row.s = cfg.s;
    mean_row.n = cfg.n_list[ni];
    mean_row.q = 1;
    mean_row.sigma = sigma;
    mean_row.key = "reweighter";
    mean_row.metric = "mean_gap";
    mean_row.value = mean;
    mean_row.seed = cfg.seed;
    out.rows.push_back(mean_row);
  }
  const double slope_log_mean = detail::fit_slope(log_n, log_mean);
  const double slope_mean_log = detail::fit_slope(log_n, mean_log);
  for (const auto& [metric, value] :
       {std::pair<const char*, double>{"slope_log_mean", slope_log_mean},
        std::pair<const char*, double>{"slope_mean_log", slope_mean_log}}) {
    ResultRow row;
    row.experiment = cfg.experiment;
    row.d = cfg.d;
    row.s = cfg.s;
    row.q = 1;
    row.sigma = sigma;
    row.key = "fit";
    row.metric = metric;
    row.value = value;
    row.seed = cfg.seed;
    out.rows.push_back(row);
  }
  out.summary["slope_log_mean"] = slope_log_mean;
  out.summary["slope_mean_log"] = slope_mean_log;
  return out;
}

inline RunOutput run_probe(const ExperimentConfig& cfg) {
  RunOutput out;
  const RandomSource root(cfg.seed);
  const std::size_t n = cfg.n_list.front();
  const double sigma = cfg.sigma_list.front();
  const std::size_t q = cfg.q;
  std::vector<std::size_t> steps = cfg.probe_steps;
  std::sort(steps.begin(), steps.end());
  const std::size_t max_steps = steps.back();
  const std::size_t n_eta = cfg.eta_grid.size();
  const std::size_t n_steps = steps.size();

  // risks[variant][eta][step][trial]
  const auto idx3 = [&](std::size_t e, std::size_t st, std::size_t tr) {
    return (e * n_steps + st) * cfg.trials + tr;
  };
  std::vector<double> risk_pre(n_eta * n_steps * cfg.trials,
                               std::numeric_limits<double>::infinity());
  std::vector<double> risk_raw(risk_pre);
  std::vector<double> extract_gaps(cfg.trials, 0.0);

  detail::parallel_for(cfg.trials, [&](std::size_t trial) {
    RandomSource rng = root.split("probe/trial=" + std::to_string(trial));
    const SparseLinearTask task =
        sample_task(cfg.d, cfg.s, DiagonalMatrix::identity(cfg.d), sigma, cfg.prior, rng);
    const SampledDataset sampled = sample_dataset(task, n, q, rng);
    const PromptMatrix prompt = build_prompt(sampled.data);
    const AttentionModel model = assemble_icl_model(cfg.d, n, cfg.eta, 0);
    const ForwardTrace trace = forward(model, prompt);
    const std::vector<DenseVector> extracted = extract_preprocessed(trace, cfg.d, n, q);

    const DiagonalReweighter rew = build_reweighter(estimate_correlations(sampled.data.examples));
    double gap = 0.0;
    for (std::size_t c = 0; c < q; ++c) {
      const DenseVector expected = diag_apply(rew.r_hat, sampled.data.queries[c].x);
      for (std::size_t r = 0; r < cfg.d; ++r) {
        gap = std::max(gap, std::abs(extracted[c][r] - expected[r]));
      }
    }
    extract_gaps[trial] = gap;

    // GD on the first q-1 queries, risk evaluated in closed form.
    std::vector<Example> pre_train, raw_train;
    for (std::size_t c = 0; c + 1 < q; ++c) {
      pre_train.push_back({extracted[c], sampled.data.queries[c].y_true});
      raw_train.push_back({sampled.data.queries[c].x, sampled.data.queries[c].y_true});
    }
    for (std::size_t ei = 0; ei < n_eta; ++ei) {
      const double eta = cfg.eta_grid[ei];
      try {
        const GdTrajectory traj = gd_solve(pre_train, eta, max_steps, DenseVector(cfg.d));
        for (std::size_t st = 0; st < n_steps; ++st) {
          risk_pre[idx3(ei, st, trial)] =
              excess_risk_pre(traj.iterates[steps[st]], rew.r_hat, task);
        }
      } catch (const DivergenceError&) {
      }
      try {
        const GdTrajectory traj = gd_solve(raw_train, eta, max_steps, DenseVector(cfg.d));
        for (std::size_t st = 0; st < n_steps; ++st) {
          risk_raw[idx3(ei, st, trial)] = excess_risk_raw(traj.iterates[steps[st]], task);
        }
      } catch (const DivergenceError&) {
      }
    }
  });

  auto emit_variant = [&](const char* key, const std::vector<double>& risks) {
    Json curve = Json::array();
    for (std::size_t st = 0; st < n_steps; ++st) {
      double best_median = std::numeric_limits<double>::infinity();
      double best_eta = cfg.eta_grid.front();
      std::size_t best_ei = 0;
      for (std::size_t ei = 0; ei < n_eta; ++ei) {
        std::vector<double> vals(cfg.trials);
        for (std::size_t tr = 0; tr < cfg.trials; ++tr) vals[tr] = risks[idx3(ei, st, tr)];
        const double med = detail::median(vals);
        if (med < best_median ||
            (med == best_median && cfg.eta_grid[ei] > best_eta)) {
          best_median = med;
          best_eta = cfg.eta_grid[ei];
          best_ei = ei;
        }
      }
      const std::string step_tag = "_step_" + std::to_string(steps[st]);
      ResultRow row;
      row.experiment = cfg.experiment;
      row.d = cfg.d;
      row.s = cfg.s;
      row.n = n;
      row.q = q;
      row.sigma = sigma;
      row.key = key;
      row.seed = cfg.seed;
      row.metric = "median_risk" + step_tag;
      row.value = best_median;
      row.diverged = !std::isfinite(best_median);
      out.rows.push_back(row);
      row.metric = "selected_eta" + step_tag;
      row.value = best_eta;
      row.diverged = false;
      out.rows.push_back(row);
      for (std::size_t tr = 0; tr < cfg.trials; ++tr) {
        ResultRow trow = row;
        trow.metric = "risk" + step_tag;
        trow.trial = tr;
        const double v = risks[idx3(best_ei, st, tr)];
        trow.diverged = !std::isfinite(v);
        trow.value = trow.diverged ? 0.0 : v;
        out.rows.push_back(trow);
      }
      curve.push_back(best_median);
    }
    return curve;
  };

  const Json pre_curve = emit_variant("pre_probe", risk_pre);
  const Json raw_curve = emit_variant("raw_probe", risk_raw);

  double max_gap = 0.0;
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    ResultRow row;
    row.experiment = cfg.experiment;
    row.d = cfg.d;
    row.s = cfg.s;
    row.n = n;
    row.q = q;
    row.sigma = sigma;
    row.key = "pre_probe";
    row.metric = "extract_gap";
    row.value = extract_gaps[trial];
    row.seed = cfg.seed;
    row.trial = trial;
    out.rows.push_back(row);
    max_gap = std::max(max_gap, extract_gaps[trial]);
  }

  bool pre_below_raw = true;
  for (std::size_t st = 0; st < n_steps; ++st) {
    if (!(pre_curve[st].get<double>() <= raw_curve[st].get<double>())) pre_below_raw = false;
  }
  out.summary["median_risk_pre"] = pre_curve;
  out.summary["median_risk_raw"] = raw_curve;
  out.summary["steps"] = steps;
  out.summary["pre_below_raw_at_all_steps"] = pre_below_raw;
  out.summary["max_extract_gap"] = max_gap;
  return out;
}

inline RunOutput run_decompose(const ExperimentConfig& cfg) {
  RunOutput out;
  const RandomSource root(cfg.seed);
  struct Cell {
    RiskDecomposition pre, raw;
    double dev_pre = 0.0, dev_raw = 0.0;
    double sigma = 0.0;
    std::size_t n = 0;
  };
  std::vector<Cell> cells(cfg.trials);
  detail::parallel_for(cfg.trials, [&](std::size_t trial) {
    RandomSource rng = root.split("decompose/trial=" + std::to_string(trial));
    Cell cell;
    cell.sigma = cfg.sigma_list[trial % cfg.sigma_list.size()];
    cell.n = cfg.n_list[trial % cfg.n_list.size()];
    const SparseLinearTask task = sample_task(cfg.d, cfg.s, DiagonalMatrix::identity(cfg.d),
                                              cell.sigma, cfg.prior, rng);
    const SampledDataset sampled = sample_dataset(task, cell.n, 1, rng);

    const GdTrajectory pre_traj = pre_gd_solve(sampled.data, cfg.eta, cfg.t);
    const double pre_risk =
        excess_risk_pre(pre_traj.final_iterate(), pre_traj.reweighter->r_hat, task);
    cell.pre = decompose_pre_gd(sampled.data, sampled.example_noise, task, cfg.eta, cfg.t);
    cell.dev_pre = std::abs(cell.pre.total - pre_risk) / (1.0 + pre_risk);

    const GdTrajectory raw_traj = gd_solve(sampled.data.examples, cfg.eta, cfg.t,
                                           DenseVector(cfg.d));
    const double raw_risk = excess_risk_raw(raw_traj.final_iterate(), task);
    cell.raw = decompose_raw_gd(sampled.data, sampled.example_noise, task, cfg.eta, cfg.t);
    cell.dev_raw = std::abs(cell.raw.total - raw_risk) / (1.0 + raw_risk);
    cells[trial] = cell;
  });

  double max_dev = 0.0, max_cross = 0.0;
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    const Cell& cell = cells[trial];
    const struct {
      const char* key;
      const RiskDecomposition* dec;
      double dev;
    } variants[2] = {{"pre_gd", &cell.pre, cell.dev_pre}, {"raw_gd", &cell.raw, cell.dev_raw}};
    for (const auto& v : variants) {
      ResultRow row;
      row.experiment = cfg.experiment;
      row.d = cfg.d;
      row.s = cfg.s;
      row.n = cell.n;
      row.q = 1;
      row.sigma = cell.sigma;
      row.key = v.key;
      row.seed = cfg.seed;
      row.trial = trial;
      for (const auto& [metric, value] :
           {std::pair<const char*, double>{"bias", v.dec->bias},
            std::pair<const char*, double>{"variance", v.dec->variance},
            std::pair<const char*, double>{"cross", v.dec->cross},
            std::pair<const char*, double>{"total", v.dec->total},
            std::pair<const char*, double>{"identity_dev", v.dev}}) {
        row.metric = metric;
        row.value = value;
        out.rows.push_back(row);
      }
      max_dev = std::max(max_dev, v.dev);
      if (cell.sigma > 0.0) max_cross = std::max(max_cross, std::abs(v.dec->cross));
    }
  }
  out.summary["max_identity_dev"] = max_dev;
  out.summary["max_cross_noisy"] = max_cross;
  return out;
}

inline RunOutput run_experiment(const ExperimentConfig& cfg) {
  if (cfg.experiment == "verify") return run_verify(cfg);
  if (cfg.experiment == "sweep") return run_sweep(cfg);
  if (cfg.experiment == "heads") return run_heads(cfg);
  if (cfg.experiment == "concentration") return run_concentration(cfg);
  if (cfg.experiment == "probe") return run_probe(cfg);
  if (cfg.experiment == "decompose") return run_decompose(cfg);
  throw ConfigError("unknown experiment '" + cfg.experiment + "'");
}

}  // namespace preopt
