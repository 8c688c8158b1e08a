// Acceptance battery. Each test prints one [CRITERION k] PASS/FAIL line with
// the measured quantity next to the bound it must meet.
//
//   1. construction/solver equivalence at every query column (1e-9 rel)
//   2. exact bias-variance decomposition identities (1e-8 rel)
//   3. masking identities (1e-9 rel, bit-identical mask/unmask)
//   4. reweighter concentration rate: log-log slope in [-0.6, -0.4]
//   5. qualitative ordering of tuned estimators (pre-GD best) at n=64,128
//   6. OLS risk calibration against sigma^2 d/(n-d-1), within 20%
//   7. head-importance structure on the constructed model
//   8. byte-identical reruns (CSV and JSON through the CLI)

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "preopt/experiments.hpp"

namespace preopt {
namespace {

void report(int criterion, bool pass, const std::string& detail) {
  std::cout << "[CRITERION " << criterion << "] " << (pass ? "PASS" : "FAIL") << " - " << detail
            << std::endl;
}

std::string tmp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Acceptance, Criterion1OracleEquivalence) {
  const CheckResult check = oracle_equivalence_check(2024, 120, false);
  report(1, check.pass,
         "forward pass vs preprocess-then-GD solver on 120 instances, max relative deviation " +
             format_significant(check.max_deviation) + " (bound 1e-9)");
  EXPECT_TRUE(check.pass);
  EXPECT_LE(check.max_deviation, 1e-9);
}

TEST(Acceptance, Criterion2DecompositionIdentities) {
  const DecompositionCheckSummary dec = decomposition_identity_check(2024, 500);
  const bool pass =
      dec.identity_pre.pass && dec.identity_raw.pass && dec.two_term_noiseless.pass;
  report(2, pass,
         "decomposition total vs solver risk on 500 instances, max relative deviation " +
             format_significant(
                 std::max(dec.identity_pre.max_deviation, dec.identity_raw.max_deviation)) +
             " (bound 1e-8); noiseless two-term deviation " +
             format_significant(dec.two_term_noiseless.max_deviation) +
             "; realized cross term reaches " + format_significant(dec.max_cross_noisy) +
             " on noisy instances");
  EXPECT_TRUE(dec.identity_pre.pass) << dec.identity_pre.max_deviation;
  EXPECT_TRUE(dec.identity_raw.pass) << dec.identity_raw.max_deviation;
  EXPECT_TRUE(dec.two_term_noiseless.pass) << dec.two_term_noiseless.max_deviation;
}

TEST(Acceptance, Criterion3MaskingIdentities) {
  const MaskingCheckSummary mask = masking_identity_check(2024, 60);
  const bool pass = mask.gd_layer.pass && mask.first_layer.pass && mask.involution.pass;
  report(3, pass,
         "GD-layer mask vs shallower model dev " + format_significant(mask.gd_layer.max_deviation) +
             ", first-layer mask vs zeroed-feature oracle dev " +
             format_significant(mask.first_layer.max_deviation) +
             " (bounds 1e-9), mask/unmask bit-identical: " +
             (mask.involution.pass ? "yes" : "no"));
  EXPECT_TRUE(mask.gd_layer.pass);
  EXPECT_TRUE(mask.first_layer.pass);
  EXPECT_TRUE(mask.involution.pass);
}

TEST(Acceptance, Criterion4ConcentrationRate) {
  const ExperimentConfig cfg = build_config(
      "concentration",
      {{"trials", "200"}, {"n", "64,128,256,512,1024,2048,4096,8192"}, {"seed", "2024"}});
  const RunOutput out = run_concentration(cfg);
  const double slope = out.summary.at("slope_log_mean").get<double>();
  const bool pass = slope >= -0.6 && slope <= -0.4;
  report(4, pass,
         "log-log slope of mean reweighter gap vs n is " + format_significant(slope) +
             " (bound [-0.6, -0.4]); mean-of-logs slope " +
             format_significant(out.summary.at("slope_mean_log").get<double>()));
  EXPECT_GE(slope, -0.6);
  EXPECT_LE(slope, -0.4);
}

TEST(Acceptance, Criterion5EstimatorOrdering) {
  const ExperimentConfig cfg = build_config(
      "sweep", {{"trials", "200"}, {"n", "64,128"}, {"sigma", "0.1"}, {"seed", "2024"}});
  const RunOutput out = run_sweep(cfg);
  bool pass = true;
  std::string detail = "median excess risk with tuned hyperparameters:";
  for (std::size_t n : {64, 128}) {
    const std::string key = "n=" + std::to_string(n) + ",sigma=0.1";
    const Json& medians = out.summary.at("median_excess_risk").at(key);
    const double pre = medians.at("pre_gd").get<double>();
    const double raw = medians.at("raw_gd").get<double>();
    const double ridge = medians.at("ridge").get<double>();
    const double ols = medians.at("ols").get<double>();
    if (!(pre < raw && pre < ridge && pre < ols)) pass = false;
    detail += " [n=" + std::to_string(n) + "] pre_gd=" + format_significant(pre) +
              " raw_gd=" + format_significant(raw) + " ridge=" + format_significant(ridge) +
              " ols=" + format_significant(ols) + ";";
    EXPECT_LT(pre, raw) << "n=" << n;
    EXPECT_LT(pre, ridge) << "n=" << n;
    EXPECT_LT(pre, ols) << "n=" << n;
  }
  report(5, pass, detail + " required: pre_gd smallest at both n");
}

TEST(Acceptance, Criterion6OlsRiskCalibration) {
  const std::size_t seeds = 2000, d = 16, n = 128;
  const RandomSource root(2024);
  std::vector<double> risks(seeds, 0.0);
  detail::parallel_for(seeds, [&](std::size_t i) {
    RandomSource rng = root.split("ols_cal/" + std::to_string(i));
    const SparseLinearTask task =
        sample_task(d, 4, DiagonalMatrix::identity(d), 1.0, WeightPrior::kRademacherOverSqrtS,
                    rng);
    const SampledDataset sampled = sample_dataset(task, n, 1, rng);
    risks[i] = excess_risk_raw(ols_solve(sampled.data.examples), task);
  });
  double mean = 0.0;
  for (double r : risks) mean += r;
  mean /= static_cast<double>(seeds);
  const double expected = 1.0 * d / static_cast<double>(n - d - 1);  // sigma^2 d/(n-d-1)
  const double rel = std::abs(mean - expected) / expected;
  const bool pass = rel <= 0.2;
  report(6, pass,
         "mean OLS excess risk over 2000 seeds is " + format_significant(mean) +
             " vs exact isotropic expectation " + format_significant(expected) +
             ", relative gap " + format_significant(rel) + " (bound 0.2)");
  EXPECT_LE(rel, 0.2);
}

TEST(Acceptance, Criterion7HeadImportanceStructure) {
  const ExperimentConfig cfg = build_config(
      "heads", {{"trials", "200"}, {"n", "128"}, {"seed", "2024"}, {"k", "4"}});
  const RunOutput out = run_heads(cfg);
  const double mass = out.summary.at("row1_support_mass").get<double>();
  const double gd_dev = out.summary.at("gd_row_max_dev_from_one").get<double>();
  const double sum_dev = out.summary.at("unflagged_row_sum_max_dev").get<double>();
  const bool pass = mass >= 0.9 && gd_dev <= 1e-12 && sum_dev <= 1e-12;
  report(7, pass,
         "first-layer support mass " + format_significant(mass) +
             " (bound 0.9); GD rows deviate from 1 by " + format_significant(gd_dev) +
             "; unflagged row sums deviate from 1 by " + format_significant(sum_dev) +
             " (bounds 1e-12)");
  EXPECT_GE(mass, 0.9);
  EXPECT_LE(gd_dev, 1e-12);
  EXPECT_LE(sum_dev, 1e-12);
}

TEST(Acceptance, Criterion8ByteDeterminism) {
  const char* cli = std::getenv("PREOPT_CLI");
  ASSERT_NE(cli, nullptr) << "PREOPT_CLI not set";
  bool pass = true;
  std::string detail;
  const struct {
    const char* experiment;
    const char* overrides;
  } runs[] = {
      {"sweep", "--override trials=6 --override n=24,48 --override sigma=0,0.1"},
      {"heads", "--override trials=5 --override n=32"},
  };
  for (const auto& run : runs) {
    // identical invocation twice, same output path; bytes captured between runs
    const std::string out = tmp(std::string("preopt_det_") + run.experiment + ".csv");
    const std::string summary = out.substr(0, out.size() - 4) + ".summary.json";
    const std::string cmd = std::string(cli) + " " + run.experiment + " --seed 77 " +
                            run.overrides + " --out " + out + " >/dev/null";
    ASSERT_EQ(WEXITSTATUS(std::system(cmd.c_str())), 0);
    const std::string csv_first = slurp(out);
    const std::string json_first = slurp(summary);
    ASSERT_EQ(WEXITSTATUS(std::system(cmd.c_str())), 0);
    const bool csv_same = csv_first == slurp(out) && !csv_first.empty();
    const bool json_same = json_first == slurp(summary) && !json_first.empty();
    if (!csv_same || !json_same) pass = false;
    detail += std::string(run.experiment) + ": csv " + (csv_same ? "identical" : "DIFFERS") +
              ", json " + (json_same ? "identical" : "DIFFERS") + "; ";
    EXPECT_TRUE(csv_same) << run.experiment;
    EXPECT_TRUE(json_same) << run.experiment;
  }
  report(8, pass, detail + "same config and seed rerun through the CLI");
}

}  // namespace
}  // namespace preopt
