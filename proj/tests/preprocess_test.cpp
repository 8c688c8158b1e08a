#include "preopt/preprocess.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "preopt/random.hpp"
#include "preopt/task.hpp"

namespace preopt {
namespace {

TEST(EstimateCorrelations, HandComputedSum) {
  std::vector<Example> examples;
  examples.push_back({DenseVector{1.0, 0.0}, 2.0});
  examples.push_back({DenseVector{0.0, 1.0}, 3.0});
  const CorrelationEstimate est = estimate_correlations(examples);
  EXPECT_DOUBLE_EQ(est.r_hat[0], 1.0);
  EXPECT_DOUBLE_EQ(est.r_hat[1], 1.5);
  EXPECT_EQ(est.n_used, 2u);
}

TEST(EstimateCorrelations, ZeroLabelsAndSingleExample) {
  std::vector<Example> zero;
  zero.push_back({DenseVector{1.0, 2.0}, 0.0});
  zero.push_back({DenseVector{-3.0, 4.0}, 0.0});
  const CorrelationEstimate est = estimate_correlations(zero);
  EXPECT_EQ(est.r_hat[0], 0.0);
  EXPECT_EQ(est.r_hat[1], 0.0);

  std::vector<Example> single;
  single.push_back({DenseVector{2.0, -1.0}, 3.0});
  const CorrelationEstimate one = estimate_correlations(single);
  EXPECT_DOUBLE_EQ(one.r_hat[0], 6.0);
  EXPECT_DOUBLE_EQ(one.r_hat[1], -3.0);

  EXPECT_THROW(estimate_correlations({}), EmptySampleError);
}

TEST(BuildReweighter, DiagonalReadBack) {
  const CorrelationEstimate est{DenseVector{1.0, 1.5}, 2};
  const DiagonalReweighter rew = build_reweighter(est);
  EXPECT_EQ(rew.r_hat.diagonal().entries(), est.r_hat.entries());
  const DiagonalReweighter zero = build_reweighter({DenseVector(3), 1});
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(zero.r_hat[j], 0.0);
}

TEST(PopulationReweighter, ElementwiseProduct) {
  SparseLinearTask task;
  task.dim = 2;
  task.sparsity = 2;
  task.support = {0, 1};
  task.weights = DenseVector{1.0, -1.0};
  task.covariance = DiagonalMatrix{2.0, 3.0};
  const PopulationReweighter pop = population_reweighter(task);
  EXPECT_DOUBLE_EQ(pop.r[0], 2.0);
  EXPECT_DOUBLE_EQ(pop.r[1], -3.0);

  task.covariance = DiagonalMatrix::identity(2);
  EXPECT_EQ(population_reweighter(task).r.diagonal().entries(), task.weights.entries());

  task.weights = DenseVector(2);
  const PopulationReweighter zero = population_reweighter(task);
  EXPECT_EQ(zero.r[0], 0.0);
  EXPECT_EQ(zero.r[1], 0.0);
}

TEST(ApplyPreprocess, IdentityZeroAndLabels) {
  RandomSource rng(21);
  const SparseLinearTask task =
      sample_task(4, 2, DiagonalMatrix::identity(4), 0.2, WeightPrior::kGaussianThenSparsify, rng);
  const SampledDataset sampled = sample_dataset(task, 6, 2, rng);

  const InContextDataset same =
      apply_preprocess(sampled.data, {DiagonalMatrix::identity(4)});
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(same.examples[i].x.entries(), sampled.data.examples[i].x.entries());
    EXPECT_EQ(same.examples[i].y, sampled.data.examples[i].y);
  }

  const InContextDataset zeroed = apply_preprocess(sampled.data, {DiagonalMatrix(4)});
  for (const Example& e : zeroed.examples) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(e.x[j], 0.0);
  }
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(zeroed.examples[i].y, sampled.data.examples[i].y);
  }
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(zeroed.queries[i].y_true, sampled.data.queries[i].y_true);
  }
}

TEST(ApplyPreprocess, ComposesLikeDiagonalProduct) {
  RandomSource rng(22);
  const SparseLinearTask task =
      sample_task(5, 2, DiagonalMatrix::identity(5), 0.1, WeightPrior::kGaussianThenSparsify, rng);
  const SampledDataset sampled = sample_dataset(task, 4, 1, rng);
  DiagonalMatrix r1(5), r2(5), prod(5);
  for (std::size_t j = 0; j < 5; ++j) {
    r1[j] = rng.normal();
    r2[j] = rng.normal();
    prod[j] = r1[j] * r2[j];
  }
  const InContextDataset chained =
      apply_preprocess(apply_preprocess(sampled.data, {r1}), {r2});
  const InContextDataset direct = apply_preprocess(sampled.data, {prod});
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_NEAR(chained.examples[i].x[j], direct.examples[i].x[j],
                  1e-15 * (1.0 + std::abs(direct.examples[i].x[j])));
    }
  }
}

// Sign recovery on the support: with sigma=0 and n=1024 the estimated
// correlation almost always has the population sign.
TEST(Correlations, SupportSignRecovery) {
  RandomSource root(23);
  const std::size_t trials = 200, n = 1024, d = 16, s = 4;
  std::size_t checked = 0, matched = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    RandomSource rng = root.split("sign/" + std::to_string(t));
    const SparseLinearTask task =
        sample_task(d, s, DiagonalMatrix::identity(d), 0.0, WeightPrior::kRademacherOverSqrtS, rng);
    const SampledDataset sampled = sample_dataset(task, n, 1, rng);
    const CorrelationEstimate est = estimate_correlations(sampled.data.examples);
    const PopulationReweighter pop = population_reweighter(task);
    for (std::size_t j : task.support) {
      ++checked;
      if ((est.r_hat[j] > 0.0) == (pop.r[j] > 0.0)) ++matched;
    }
  }
  EXPECT_GE(static_cast<double>(matched) / checked, 0.99);
}

// Error against the population reweighter shrinks with n (full rate fit is
// in the acceptance suite).
TEST(Correlations, GapShrinksWithSampleSize) {
  RandomSource root(24);
  auto mean_gap = [&](std::size_t n) {
    double total = 0.0;
    const std::size_t trials = 50;
    for (std::size_t t = 0; t < trials; ++t) {
      RandomSource rng = root.split("gap/" + std::to_string(n) + "/" + std::to_string(t));
      const SparseLinearTask task = sample_task(16, 4, DiagonalMatrix::identity(16), 0.1,
                                                WeightPrior::kRademacherOverSqrtS, rng);
      const SampledDataset sampled = sample_dataset(task, n, 1, rng);
      const CorrelationEstimate est = estimate_correlations(sampled.data.examples);
      const PopulationReweighter pop = population_reweighter(task);
      double gap = 0.0;
      for (std::size_t j = 0; j < 16; ++j) {
        gap = std::max(gap, std::abs(est.r_hat[j] - pop.r[j]));
      }
      total += gap;
    }
    return total / trials;
  };
  const double coarse = mean_gap(64);
  const double fine = mean_gap(4096);
  EXPECT_LT(fine, coarse / 3.0);
}

}  // namespace
}  // namespace preopt
