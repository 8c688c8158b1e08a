// Feature reweighting from estimated feature-label correlations: estimate
// r_j = (1/n) sum_i x_ij y_i from the examples, form the diagonal R_hat, and
// replace every feature vector x by R_hat x. Labels are never touched.
//
// Correlations come from examples only; queries carry no usable labels and
// are excluded even though their features are present.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "preopt/linalg.hpp"
#include "preopt/task.hpp"

namespace preopt {

struct CorrelationEstimate {
  DenseVector r_hat;
  std::size_t n_used = 0;
};

struct DiagonalReweighter {
  DiagonalMatrix r_hat;
};

// Population counterpart: r_j = w*_j Sigma_jj for diagonal covariance.
struct PopulationReweighter {
  DiagonalMatrix r;
};

inline CorrelationEstimate estimate_correlations(const std::vector<Example>& examples) {
  if (examples.empty()) throw EmptySampleError("estimate_correlations: no examples");
  const std::size_t d = examples.front().x.dim();
  DenseVector r(d);
  for (const Example& e : examples) {
    if (e.x.dim() != d) {
      throw ContractError("estimate_correlations: example dim " + std::to_string(e.x.dim()) +
                          " != " + std::to_string(d));
    }
    for (std::size_t j = 0; j < d; ++j) r[j] += e.x[j] * e.y;
  }
  const double inv_n = 1.0 / static_cast<double>(examples.size());
  for (std::size_t j = 0; j < d; ++j) r[j] *= inv_n;
  return {std::move(r), examples.size()};
}

inline DiagonalReweighter build_reweighter(const CorrelationEstimate& c) {
  return {DiagonalMatrix(c.r_hat)};
}

inline PopulationReweighter population_reweighter(const SparseLinearTask& task) {
  DenseVector r(task.dim);
  for (std::size_t j = 0; j < task.dim; ++j) r[j] = task.weights[j] * task.covariance[j];
  return {DiagonalMatrix(std::move(r))};
}

// Reweights every example and query feature vector; labels pass through.
inline InContextDataset apply_preprocess(const InContextDataset& data,
                                         const DiagonalReweighter& rew) {
  InContextDataset out;
  out.examples.reserve(data.examples.size());
  for (const Example& e : data.examples) {
    out.examples.push_back({diag_apply(rew.r_hat, e.x), e.y});
  }
  out.queries.reserve(data.queries.size());
  for (const Query& query : data.queries) {
    out.queries.push_back({diag_apply(rew.r_hat, query.x), query.y_true});
  }
  return out;
}

}  // namespace preopt
