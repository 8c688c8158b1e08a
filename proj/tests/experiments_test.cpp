#include "preopt/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace preopt {
namespace {

TEST(RunVerify, DefaultChecksPass) {
  const ExperimentConfig cfg = build_config("verify", {{"seed", "11"}});
  const RunOutput out = run_verify(cfg);
  ASSERT_FALSE(out.checks.empty());
  for (const CheckResult& check : out.checks) {
    EXPECT_TRUE(check.pass) << check.name << " deviated by " << check.max_deviation;
  }
  EXPECT_EQ(out.summary.at("fail_count").get<std::size_t>(), 0u);
  // two metric rows per check
  EXPECT_EQ(out.rows.size(), 2 * out.checks.size());
}

TEST(RunVerify, CorruptedSignFailsEquivalence) {
  const ExperimentConfig cfg = build_config("verify", {{"seed", "11"}, {"corrupt_sign", "true"}});
  const RunOutput out = run_verify(cfg);
  bool found = false;
  for (const CheckResult& check : out.checks) {
    if (check.name.find("corrupted_sign") != std::string::npos) {
      found = true;
      EXPECT_FALSE(check.pass);
      EXPECT_GT(check.max_deviation, 1e-3);
    }
  }
  EXPECT_TRUE(found);
  EXPECT_GT(out.summary.at("fail_count").get<std::size_t>(), 0u);
}

TEST(RunSweep, NoiselessOlsIsExact) {
  const ExperimentConfig cfg = build_config(
      "sweep", {{"trials", "5"}, {"n", "40"}, {"sigma", "0"}, {"seed", "3"}, {"d", "16"}});
  const RunOutput out = run_sweep(cfg);
  std::size_t ols_rows = 0;
  for (const ResultRow& row : out.rows) {
    if (row.key == "ols" && row.metric == "excess_risk") {
      ++ols_rows;
      ASSERT_FALSE(row.diverged);
      EXPECT_LE(row.value, 1e-8);
    }
  }
  EXPECT_EQ(ols_rows, 5u);
}

TEST(RunSweep, EmitsAllEstimatorsAndHyperparameters) {
  const ExperimentConfig cfg = build_config(
      "sweep", {{"trials", "3"}, {"n", "32"}, {"sigma", "0.1"}, {"seed", "5"}});
  const RunOutput out = run_sweep(cfg);
  std::map<std::string, int> metric_counts;
  for (const ResultRow& row : out.rows) metric_counts[row.key + "/" + row.metric]++;
  EXPECT_EQ(metric_counts["pre_gd/excess_risk"], 3);
  EXPECT_EQ(metric_counts["raw_gd/excess_risk"], 3);
  EXPECT_EQ(metric_counts["ridge/excess_risk"], 3);
  EXPECT_EQ(metric_counts["ols/excess_risk"], 3);
  EXPECT_EQ(metric_counts["lasso/excess_risk"], 3);
  EXPECT_EQ(metric_counts["pre_gd/selected_eta"], 3);
  EXPECT_EQ(metric_counts["ridge/selected_lambda"], 3);
  EXPECT_EQ(metric_counts["lasso/selected_alpha"], 3);
  EXPECT_TRUE(out.summary.contains("median_excess_risk"));
}

TEST(RunHeads, GdRowsAreUnitAndUnflagged) {
  const ExperimentConfig cfg = build_config(
      "heads", {{"trials", "20"}, {"n", "48"}, {"seed", "9"}, {"k", "3"}});
  const RunOutput out = run_heads(cfg);
  EXPECT_LE(out.summary.at("gd_row_max_dev_from_one").get<double>(), 1e-12);
  EXPECT_LE(out.summary.at("unflagged_row_sum_max_dev").get<double>(), 1e-12);
  for (const ResultRow& row : out.rows) {
    if (row.metric == "flagged") {
      EXPECT_EQ(row.value, 0.0);
    }
  }
}

TEST(RunConcentration, SlopeNearMinusHalf) {
  const ExperimentConfig cfg = build_config(
      "concentration",
      {{"trials", "60"}, {"n", "64,128,256,512,1024"}, {"seed", "13"}});
  const RunOutput out = run_concentration(cfg);
  const double slope = out.summary.at("slope_log_mean").get<double>();
  EXPECT_GT(slope, -0.75);
  EXPECT_LT(slope, -0.25);
}

TEST(RunConcentration, NoiselessGapStillShrinksWithN) {
  // sigma=0 leaves only cross-feature sampling noise in r_hat
  const ExperimentConfig cfg = build_config(
      "concentration",
      {{"trials", "40"}, {"n", "32,64,128,256,512"}, {"sigma", "0"}, {"seed", "15"}});
  const RunOutput out = run_concentration(cfg);
  double mean_small = -1.0, mean_large = -1.0;
  for (const ResultRow& row : out.rows) {
    if (row.metric != "mean_gap") continue;
    if (row.n == 32) mean_small = row.value;
    if (row.n == 512) mean_large = row.value;
  }
  ASSERT_GT(mean_small, 0.0);
  ASSERT_GT(mean_large, 0.0);
  EXPECT_LT(mean_large, mean_small / 2.0);
}

// The residual-based standard error of the fitted slope shrinks when the
// per-n means average over more trials.
TEST(RunConcentration, MoreTrialsTightenTheSlopeEstimate) {
  auto slope_se = [](std::size_t trials) {
    const ExperimentConfig cfg = build_config(
        "concentration", {{"trials", std::to_string(trials)},
                          {"n", "32,64,128,256,512"},
                          {"seed", "21"}});
    const RunOutput out = run_concentration(cfg);
    std::vector<double> log_n, log_mean;
    for (const ResultRow& row : out.rows) {
      if (row.metric != "mean_gap") continue;
      log_n.push_back(std::log(static_cast<double>(row.n)));
      log_mean.push_back(std::log(row.value));
    }
    const double slope = out.summary.at("slope_log_mean").get<double>();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < log_n.size(); ++i) {
      mx += log_n[i];
      my += log_mean[i];
    }
    mx /= log_n.size();
    my /= log_n.size();
    const double intercept = my - slope * mx;
    double rss = 0, sxx = 0;
    for (std::size_t i = 0; i < log_n.size(); ++i) {
      const double resid = log_mean[i] - (intercept + slope * log_n[i]);
      rss += resid * resid;
      sxx += (log_n[i] - mx) * (log_n[i] - mx);
    }
    return std::sqrt(rss / (static_cast<double>(log_n.size()) - 2.0) / sxx);
  };
  EXPECT_LT(slope_se(80), slope_se(20));
}

TEST(RunProbe, DegenerateTwoQueriesStillRuns) {
  const ExperimentConfig cfg = build_config(
      "probe", {{"trials", "5"}, {"n", "32"}, {"q", "2"}, {"seed", "17"},
                {"probe_steps", "1,4,16"}});
  const RunOutput out = run_probe(cfg);
  bool saw_median = false;
  for (const ResultRow& row : out.rows) {
    if (row.key == "pre_probe" && row.metric.rfind("median_risk", 0) == 0) {
      saw_median = true;
      EXPECT_FALSE(row.diverged);
      EXPECT_TRUE(std::isfinite(row.value));
    }
  }
  EXPECT_TRUE(saw_median);
  EXPECT_LE(out.summary.at("max_extract_gap").get<double>(), 1e-12);
}

TEST(RunDecompose, IdentityHoldsOnEveryInstance) {
  const ExperimentConfig cfg = build_config("decompose", {{"trials", "60"}, {"seed", "19"}});
  const RunOutput out = run_decompose(cfg);
  EXPECT_LE(out.summary.at("max_identity_dev").get<double>(), 1e-8);
  // noisy instances carry a genuinely nonzero cross term
  EXPECT_GT(out.summary.at("max_cross_noisy").get<double>(), 0.0);
}

TEST(RunExperiment, DispatchesAndRejectsUnknown) {
  ExperimentConfig cfg = build_config("decompose", {{"trials", "4"}});
  EXPECT_NO_THROW(run_experiment(cfg));
  cfg.experiment = "bogus";
  EXPECT_THROW(run_experiment(cfg), ConfigError);
}

// Byte determinism at the library level: identical (config, seed) produce
// identical rows and summaries.
TEST(Determinism, RepeatedRunsMatch) {
  const ExperimentConfig cfg = build_config(
      "sweep", {{"trials", "4"}, {"n", "24,48"}, {"sigma", "0,0.1"}, {"seed", "23"}});
  const RunOutput a = run_sweep(cfg);
  const RunOutput b = run_sweep(cfg);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  std::vector<ResultRow> ra = a.rows, rb = b.rows;
  sort_rows(ra);
  sort_rows(rb);
  for (std::size_t i = 0; i < ra.size(); ++i) {
    EXPECT_EQ(ra[i].key, rb[i].key);
    EXPECT_EQ(ra[i].metric, rb[i].metric);
    EXPECT_EQ(ra[i].value, rb[i].value);
    EXPECT_EQ(ra[i].trial, rb[i].trial);
  }
  EXPECT_EQ(a.summary.dump(), b.summary.dump());
}

}  // namespace
}  // namespace preopt
