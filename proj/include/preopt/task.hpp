// Sparse linear regression tasks, in-context example/query sets, and the
// prompt matrix consumed by the attention engine.
//
// A task is the population object: ground truth w*, diagonal covariance and
// noise level. A dataset is one sample from it. Labels for queries are kept
// only for evaluation; estimator entry points accept the example list alone,
// so query labels cannot leak into fitting by construction.

#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "preopt/linalg.hpp"
#include "preopt/random.hpp"

namespace preopt {

enum class WeightPrior {
  kGaussianThenSparsify,  // support weights ~ N(0,1)
  kRademacherOverSqrtS,   // support weights = +-1/sqrt(s), so ||w*||_2 == 1
};

struct SparseLinearTask {
  std::size_t dim = 0;
  std::size_t sparsity = 0;
  std::vector<std::size_t> support;  // sorted, size == sparsity
  DenseVector weights;               // zero off support
  DiagonalMatrix covariance;         // nonnegative diagonal
  double noise_std = 0.0;
};

struct Example {
  DenseVector x;
  double y = 0.0;
};

struct Query {
  DenseVector x;
  double y_true = 0.0;  // evaluation only
};

struct InContextDataset {
  std::vector<Example> examples;  // n >= 1
  std::vector<Query> queries;     // q >= 1
};

// The (d+1) x (n+q) embedding matrix: column i <= n is (x_i; y_i), query
// columns carry 0 in the label row.
struct PromptMatrix {
  DenseMatrix entries;
  std::size_t n = 0;
  std::size_t q = 0;
};

inline SparseLinearTask sample_task(std::size_t d, std::size_t s, DiagonalMatrix covariance,
                                    double noise_std, WeightPrior prior, RandomSource& rng) {
  if (s < 1 || s > d) {
    throw ContractError("sample_task: sparsity " + std::to_string(s) + " out of range for d=" +
                        std::to_string(d));
  }
  if (covariance.dim() != d) {
    throw ContractError("sample_task: covariance dim " + std::to_string(covariance.dim()) +
                        " != d " + std::to_string(d));
  }
  for (std::size_t j = 0; j < d; ++j) {
    if (covariance[j] < 0.0) {
      throw ContractError("sample_task: negative covariance entry at " + std::to_string(j));
    }
  }
  if (noise_std < 0.0) throw ContractError("sample_task: negative noise level");

  // Support drawn uniformly without replacement via a seeded partial shuffle.
  std::vector<std::size_t> indices(d);
  for (std::size_t j = 0; j < d; ++j) indices[j] = j;
  for (std::size_t j = 0; j < s; ++j) {
    const std::size_t k = j + rng.pick_index(d - j);
    std::swap(indices[j], indices[k]);
  }
  std::vector<std::size_t> support(indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(s));
  std::sort(support.begin(), support.end());

  DenseVector weights(d);
  for (std::size_t j : support) {
    if (prior == WeightPrior::kGaussianThenSparsify) {
      weights[j] = rng.normal();
    } else {
      const double mag = 1.0 / std::sqrt(static_cast<double>(s));
      weights[j] = (rng.next_u64() & 1ull) ? mag : -mag;
    }
  }

  SparseLinearTask task;
  task.dim = d;
  task.sparsity = s;
  task.support = std::move(support);
  task.weights = std::move(weights);
  task.covariance = std::move(covariance);
  task.noise_std = noise_std;
  return task;
}

struct SampledDataset {
  InContextDataset data;
  DenseVector example_noise;  // realized label noise of the n examples
};

// x[j] = sqrt(Sigma_jj) * z_j with z standard normal; y = <w*, x> + eps.
// The realized example noise is returned for the exact risk decompositions.
inline SampledDataset sample_dataset(const SparseLinearTask& task, std::size_t n, std::size_t q,
                                     RandomSource& rng) {
  if (n < 1 || q < 1) throw ContractError("sample_dataset: need n >= 1 and q >= 1");
  const std::size_t d = task.dim;
  std::vector<double> scale(d);
  for (std::size_t j = 0; j < d; ++j) scale[j] = std::sqrt(task.covariance[j]);

  auto draw_x = [&] {
    DenseVector x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = scale[j] * rng.normal();
    return x;
  };

  SampledDataset out;
  out.data.examples.reserve(n);
  out.example_noise = DenseVector(n);
  for (std::size_t i = 0; i < n; ++i) {
    DenseVector x = draw_x();
    const double eps = task.noise_std * rng.normal();
    const double y = dot(task.weights, x) + eps;
    out.example_noise[i] = eps;
    out.data.examples.push_back({std::move(x), y});
  }
  out.data.queries.reserve(q);
  for (std::size_t i = 0; i < q; ++i) {
    DenseVector x = draw_x();
    const double y = dot(task.weights, x) + task.noise_std * rng.normal();
    out.data.queries.push_back({std::move(x), y});
  }
  return out;
}

inline PromptMatrix build_prompt(const InContextDataset& data) {
  const std::size_t n = data.examples.size();
  const std::size_t q = data.queries.size();
  if (n == 0 || q == 0) throw ContractError("build_prompt: dataset has no examples or queries");
  const std::size_t d = data.examples.front().x.dim();

  PromptMatrix prompt;
  prompt.n = n;
  prompt.q = q;
  prompt.entries = DenseMatrix(d + 1, n + q);
  for (std::size_t c = 0; c < n; ++c) {
    const Example& e = data.examples[c];
    if (e.x.dim() != d) throw ContractError("build_prompt: inconsistent example dims");
    for (std::size_t r = 0; r < d; ++r) prompt.entries(r, c) = e.x[r];
    prompt.entries(d, c) = e.y;
  }
  for (std::size_t c = 0; c < q; ++c) {
    const Query& query = data.queries[c];
    if (query.x.dim() != d) throw ContractError("build_prompt: inconsistent query dims");
    for (std::size_t r = 0; r < d; ++r) prompt.entries(r, n + c) = query.x[r];
    // label slot of query columns stays 0
  }
  return prompt;
}

// Population excess risk of the plain predictor x -> <w, x>: (w-w*)^T Sigma (w-w*).
inline double excess_risk_raw(const DenseVector& w, const SparseLinearTask& task) {
  if (w.dim() != task.dim) {
    throw ContractError("excess_risk_raw: w dim " + std::to_string(w.dim()) + " != task dim " +
                        std::to_string(task.dim));
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < task.dim; ++j) {
    const double diff = w[j] - task.weights[j];
    acc += diff * task.covariance[j] * diff;
  }
  return acc;
}

// Population excess risk of the reweighted predictor x -> <R_hat x, w>:
// (R_hat w - w*)^T Sigma (R_hat w - w*).
inline double excess_risk_pre(const DenseVector& w, const DiagonalMatrix& reweighter,
                              const SparseLinearTask& task) {
  if (w.dim() != task.dim || reweighter.dim() != task.dim) {
    throw ContractError("excess_risk_pre: dims (w=" + std::to_string(w.dim()) + ", R=" +
                        std::to_string(reweighter.dim()) + ") != task dim " +
                        std::to_string(task.dim));
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < task.dim; ++j) {
    const double diff = reweighter[j] * w[j] - task.weights[j];
    acc += diff * task.covariance[j] * diff;
  }
  return acc;
}

}  // namespace preopt
