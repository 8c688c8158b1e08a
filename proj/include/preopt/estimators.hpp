// Regression procedures compared by the lab: plain gradient descent,
// preprocess-then-GD, ridge, minimum-norm OLS and Lasso, plus the exact
// bias/variance decompositions of the GD estimators and the theoretical
// step-size schedule.
//
// All solvers are closed-form or deterministic iterations over the example
// list; none of them can see query labels.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "preopt/linalg.hpp"
#include "preopt/preprocess.hpp"
#include "preopt/task.hpp"

namespace preopt {

namespace detail {

inline DenseMatrix design_matrix(const std::vector<Example>& examples) {
  if (examples.empty()) throw EmptySampleError("design_matrix: no examples");
  const std::size_t n = examples.size();
  const std::size_t d = examples.front().x.dim();
  DenseMatrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (examples[i].x.dim() != d) throw ContractError("design_matrix: inconsistent dims");
    for (std::size_t j = 0; j < d; ++j) x(i, j) = examples[i].x[j];
  }
  return x;
}

inline DenseVector label_vector(const std::vector<Example>& examples) {
  DenseVector y(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) y[i] = examples[i].y;
  return y;
}

// In-place Cholesky solve of the SPD system a x = b. Returns nullopt when a
// pivot falls at or below the scale-aware threshold.
inline std::optional<DenseVector> cholesky_solve(DenseMatrix a, DenseVector b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.dim() != n) throw ContractError("cholesky_solve: shape mismatch");
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i)));
  const double tol = 1e-14 * max_diag;

  for (std::size_t j = 0; j < n; ++j) {
    double pivot = a(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= a(j, k) * a(j, k);
    if (!(pivot > tol)) return std::nullopt;
    const double l_jj = std::sqrt(pivot);
    a(j, j) = l_jj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = a(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= a(i, k) * a(j, k);
      a(i, j) = v / l_jj;
    }
  }
  // forward then backward substitution
  for (std::size_t i = 0; i < n; ++i) {
    double v = b[i];
    for (std::size_t k = 0; k < i; ++k) v -= a(i, k) * b[k];
    b[i] = v / a(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double v = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) v -= a(k, ii) * b[k];
    b[ii] = v / a(ii, ii);
  }
  return b;
}

// One-sided Jacobi SVD of a tall matrix (rows >= cols). Columns of u carry
// the left singular vectors scaled by the singular values; v accumulates the
// right rotations.
struct JacobiSvd {
  DenseMatrix u;  // m x k, column j has norm sigma_j
  DenseMatrix v;  // k x k
};

inline JacobiSvd jacobi_svd(DenseMatrix a) {
  const std::size_t m = a.rows();
  const std::size_t k = a.cols();
  JacobiSvd out{std::move(a), DenseMatrix::identity(k)};
  DenseMatrix& u = out.u;
  DenseMatrix& v = out.v;

  const double eps = 1e-15;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
          app += u(r, p) * u(r, p);
          aqq += u(r, q) * u(r, q);
          apq += u(r, p) * u(r, q);
        }
        if (std::abs(apq) <= eps * std::sqrt(app * aqq) || apq == 0.0) continue;
        rotated = true;
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t r = 0; r < m; ++r) {
          const double up = u(r, p), uq = u(r, q);
          u(r, p) = c * up - s * uq;
          u(r, q) = s * up + c * uq;
        }
        for (std::size_t r = 0; r < k; ++r) {
          const double vp = v(r, p), vq = v(r, q);
          v(r, p) = c * vp - s * vq;
          v(r, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) break;
  }
  return out;
}

// Minimum-norm least-squares solution of X w ~= y via the pseudo-inverse.
inline DenseVector min_norm_lstsq(const DenseMatrix& x, const DenseVector& y) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const bool tall = n >= d;

  DenseMatrix a = tall ? x : DenseMatrix(d, n);
  if (!tall) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) a(j, i) = x(i, j);
  }
  JacobiSvd svd = jacobi_svd(std::move(a));
  const std::size_t k = svd.u.cols();

  std::vector<double> sigma(k, 0.0);
  double sigma_max = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    double s2 = 0.0;
    for (std::size_t r = 0; r < svd.u.rows(); ++r) s2 += svd.u(r, j) * svd.u(r, j);
    sigma[j] = std::sqrt(s2);
    sigma_max = std::max(sigma_max, sigma[j]);
  }
  const double cutoff =
      sigma_max * static_cast<double>(std::max(n, d)) * std::numeric_limits<double>::epsilon();

  DenseVector w(d);
  for (std::size_t j = 0; j < k; ++j) {
    if (sigma[j] <= cutoff || sigma[j] == 0.0) continue;
    // tall: w += (u_j . y / sigma_j) v_j, with u_j = U col j / sigma_j
    // wide: roles of u and v swap because we factored X^T.
    double coeff = 0.0;
    if (tall) {
      for (std::size_t r = 0; r < n; ++r) coeff += svd.u(r, j) * y[r];
      coeff /= sigma[j] * sigma[j];
      for (std::size_t r = 0; r < d; ++r) w[r] += coeff * svd.v(r, j);
    } else {
      for (std::size_t r = 0; r < n; ++r) coeff += svd.v(r, j) * y[r];
      coeff /= sigma[j];
      for (std::size_t r = 0; r < d; ++r) w[r] += coeff * svd.u(r, j) / sigma[j];
    }
  }
  return w;
}

}  // namespace detail

struct GdTrajectory {
  std::vector<DenseVector> iterates;  // w^0 ... w^t
  double step_size = 0.0;
  std::size_t steps = 0;
  bool preprocessed = false;
  std::optional<DiagonalReweighter> reweighter;  // present iff preprocessed

  const DenseVector& final_iterate() const { return iterates.back(); }
};

// Full-batch GD on the squared loss (1/2n) sum (y_i - <w, x_i>)^2:
//   w^{k+1} = w^k - (eta/n) sum_i x_i (<w^k, x_i> - y_i).
inline GdTrajectory gd_solve(const std::vector<Example>& examples, double eta, std::size_t steps,
                             const DenseVector& w0) {
  if (examples.empty()) throw EmptySampleError("gd_solve: no examples");
  if (!(eta > 0.0)) throw ContractError("gd_solve: step size must be positive");
  const std::size_t d = examples.front().x.dim();
  if (w0.dim() != d) {
    throw ContractError("gd_solve: w0 dim " + std::to_string(w0.dim()) + " != feature dim " +
                        std::to_string(d));
  }
  const double inv_n = 1.0 / static_cast<double>(examples.size());

  GdTrajectory out;
  out.step_size = eta;
  out.steps = steps;
  out.iterates.reserve(steps + 1);
  out.iterates.push_back(w0);

  DenseVector w = w0;
  for (std::size_t k = 0; k < steps; ++k) {
    DenseVector grad(d);
    for (const Example& e : examples) {
      const double resid = dot(w, e.x) - e.y;
      for (std::size_t j = 0; j < d; ++j) grad[j] += resid * e.x[j];
    }
    for (std::size_t j = 0; j < d; ++j) w[j] -= eta * inv_n * grad[j];
    if (!w.all_finite()) {
      throw DivergenceError("gd_solve: non-finite iterate at step " + std::to_string(k + 1));
    }
    out.iterates.push_back(w);
  }
  return out;
}

// Estimate R_hat from the examples, reweight them, and run GD from zero.
inline GdTrajectory pre_gd_solve(const InContextDataset& data, double eta, std::size_t steps) {
  DiagonalReweighter rew = build_reweighter(estimate_correlations(data.examples));
  InContextDataset reweighted = apply_preprocess(data, rew);
  GdTrajectory traj =
      gd_solve(reweighted.examples, eta, steps, DenseVector(data.examples.front().x.dim()));
  traj.preprocessed = true;
  traj.reweighter = std::move(rew);
  return traj;
}

// Closed-form ridge: (Sigma_hat + lambda I)^{-1} (1/n) X^T y.
inline DenseVector ridge_solve(const std::vector<Example>& examples, double lambda) {
  if (lambda < 0.0) throw ContractError("ridge_solve: negative regularization");
  const DenseMatrix x = detail::design_matrix(examples);
  const DenseVector y = detail::label_vector(examples);
  const std::size_t d = x.cols();

  DenseMatrix a = empirical_second_moment(x);
  for (std::size_t j = 0; j < d; ++j) a(j, j) += lambda;
  DenseVector rhs = mat_tvec(x, y);
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  for (std::size_t j = 0; j < d; ++j) rhs[j] *= inv_n;

  auto solved = detail::cholesky_solve(std::move(a), std::move(rhs));
  if (!solved) {
    throw SingularSystemError(
        "ridge_solve: regularized system is singular at lambda=" + std::to_string(lambda) +
        "; use ols_solve for the minimum-norm solution");
  }
  return *solved;
}

struct OlsInfo {
  bool used_pseudo_inverse = false;
};

// Unique least-squares solution when the Gram matrix has full rank; the
// minimum-norm interpolant X^T (X X^T)^{-1} y in the overparameterized
// regime. Rank-deficient systems fall back to the pseudo-inverse and report
// it through the optional info argument.
inline DenseVector ols_solve(const std::vector<Example>& examples, OlsInfo* info = nullptr) {
  const DenseMatrix x = detail::design_matrix(examples);
  const DenseVector y = detail::label_vector(examples);
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (info) info->used_pseudo_inverse = false;

  if (n >= d) {
    DenseMatrix gram(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) acc += x(r, i) * x(r, j);
        gram(i, j) = acc;
        gram(j, i) = acc;
      }
    auto solved = detail::cholesky_solve(std::move(gram), mat_tvec(x, y));
    if (solved) return *solved;
  } else {
    DenseMatrix gram(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < d; ++c) acc += x(i, c) * x(j, c);
        gram(i, j) = acc;
        gram(j, i) = acc;
      }
    auto solved = detail::cholesky_solve(std::move(gram), y);
    if (solved) return mat_tvec(x, *solved);
  }
  if (info) info->used_pseudo_inverse = true;
  return detail::min_norm_lstsq(x, y);
}

struct LassoResult {
  DenseVector w;
  bool converged = false;
  std::size_t sweeps_used = 0;
  std::vector<double> objective_trace;  // objective after each sweep
};

// Cyclic coordinate descent on (1/2n) ||y - X w||^2 + alpha ||w||_1 with the
// soft-threshold update, from w = 0. Coordinate order is fixed for
// determinism.
inline LassoResult lasso_cd(const std::vector<Example>& examples, double alpha,
                            std::size_t max_sweeps, double tol) {
  if (!(alpha > 0.0)) throw ContractError("lasso_cd: alpha must be positive");
  const DenseMatrix x = detail::design_matrix(examples);
  const DenseVector y = detail::label_vector(examples);
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<double> col_scale(d, 0.0);  // (1/n) sum_i x_ij^2
  for (std::size_t j = 0; j < d; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x(i, j) * x(i, j);
    col_scale[j] = acc * inv_n;
  }

  LassoResult out;
  out.w = DenseVector(d);
  DenseVector resid = y;  // y - X w

  auto objective = [&] {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) f += resid[i] * resid[i];
    f *= 0.5 * inv_n;
    for (std::size_t j = 0; j < d; ++j) f += alpha * std::abs(out.w[j]);
    return f;
  };

  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (col_scale[j] <= 0.0) continue;  // all-zero column stays at 0
      double rho = 0.0;
      for (std::size_t i = 0; i < n; ++i) rho += x(i, j) * resid[i];
      rho = rho * inv_n + col_scale[j] * out.w[j];
      double w_new = 0.0;
      if (rho > alpha) {
        w_new = (rho - alpha) / col_scale[j];
      } else if (rho < -alpha) {
        w_new = (rho + alpha) / col_scale[j];
      }
      const double delta = w_new - out.w[j];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) resid[i] -= x(i, j) * delta;
        out.w[j] = w_new;
      }
      max_change = std::max(max_change, std::abs(delta));
    }
    out.sweeps_used = sweep + 1;
    out.objective_trace.push_back(objective());
    if (max_change < tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

// Exact decomposition of the realized excess risk of the GD iterate.
//
// With P = I - eta * Sigma_hat_tilde and the iterate identity
//   w^t - Rbar w* = -P^t Rbar w* + (eta/n) sum_{i=1..t} P^{i-1} Xtilde^T eps,
// the risk splits into
//   bias  = || Sigma^{1/2} R_hat P^t Rbar w* ||^2
//   variance = eta^2 || Sigma^{1/2} R_hat (1/n) sum P^{i-1} Xtilde^T eps ||^2
//   cross = -2 <bias vector, variance vector>
// and bias + variance + cross equals the realized risk exactly. The cross
// term is zero when the realized noise is zero; dropping it is only valid in
// expectation over the noise.
struct RiskDecomposition {
  double bias = 0.0;
  double variance = 0.0;
  double cross = 0.0;
  double total = 0.0;
  bool degenerate_support = false;  // some |r_hat_j| < 1e-12 on the support
};

namespace detail {

inline RiskDecomposition decompose_gd_risk(const DenseMatrix& x_rows, const DenseVector& noise,
                                           const SparseLinearTask& task,
                                           const DenseVector& reweight_diag, double eta,
                                           std::size_t steps) {
  const std::size_t n = x_rows.rows();
  const std::size_t d = x_rows.cols();
  if (noise.dim() != n) {
    throw ContractError("decompose: noise dim " + std::to_string(noise.dim()) +
                        " != sample count " + std::to_string(n));
  }
  if (d != task.dim) throw ContractError("decompose: feature dim != task dim");

  RiskDecomposition out;

  // Xtilde = X * R_hat (columnwise scaling).
  DenseMatrix xt = x_rows;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) xt(i, j) *= reweight_diag[j];
  const DenseMatrix second_moment = empirical_second_moment(xt);

  // Rbar: pseudo-inverse of R_hat on the support, zero elsewhere.
  DenseVector rbar_w(d);
  for (std::size_t j : task.support) {
    if (std::abs(reweight_diag[j]) < 1e-12) {
      out.degenerate_support = true;
      if (reweight_diag[j] == 0.0) continue;  // leave at 0; identity degrades anyway
    }
    rbar_w[j] = task.weights[j] / reweight_diag[j];
  }

  auto apply_p = [&](const DenseVector& v) {
    DenseVector pv = mat_vec(second_moment, v);
    DenseVector outv(d);
    for (std::size_t j = 0; j < d; ++j) outv[j] = v[j] - eta * pv[j];
    return outv;
  };

  // bias vector: Sigma^{1/2} R_hat P^t Rbar w*
  DenseVector bias_core = rbar_w;
  for (std::size_t k = 0; k < steps; ++k) bias_core = apply_p(bias_core);

  // variance vector: eta * Sigma^{1/2} R_hat sum_{i=1..t} P^{i-1} z, z = (1/n) Xtilde^T eps
  DenseVector z = mat_tvec(xt, noise);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < d; ++j) z[j] *= inv_n;
  DenseVector var_core(d);
  DenseVector cur = z;
  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t j = 0; j < d; ++j) var_core[j] += cur[j];
    if (k + 1 < steps) cur = apply_p(cur);
  }

  double bias = 0.0, variance = 0.0, cross = 0.0, total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double scale = std::sqrt(task.covariance[j]) * reweight_diag[j];
    const double a = scale * bias_core[j];
    const double b = eta * scale * var_core[j];
    bias += a * a;
    variance += b * b;
    cross += -2.0 * a * b;
    total += (b - a) * (b - a);
  }
  out.bias = bias;
  out.variance = variance;
  out.cross = cross;
  out.total = total;
  return out;
}

}  // namespace detail

inline RiskDecomposition decompose_pre_gd(const InContextDataset& data, const DenseVector& noise,
                                          const SparseLinearTask& task, double eta,
                                          std::size_t steps) {
  const DiagonalReweighter rew = build_reweighter(estimate_correlations(data.examples));
  return detail::decompose_gd_risk(detail::design_matrix(data.examples), noise, task,
                                   rew.r_hat.diagonal(), eta, steps);
}

inline RiskDecomposition decompose_raw_gd(const InContextDataset& data, const DenseVector& noise,
                                          const SparseLinearTask& task, double eta,
                                          std::size_t steps) {
  DenseVector ones(task.dim);
  for (std::size_t j = 0; j < task.dim; ++j) ones[j] = 1.0;
  return detail::decompose_gd_risk(detail::design_matrix(data.examples), noise, task, ones, eta,
                                   steps);
}

// Step-size schedule from the population quantities, all hidden constants
// set to 1:
//   beta  = min over the support of |w*_j Sigma_jj|
//   eta   = 1 / (2 max(||R Sigma R||_2, 1e-6))
//   eta*t = (1/beta) (sigma^2 Tr(R Sigma R) log(d/delta)/n
//                     + sigma^2 s Tr(Sigma) log^2(d/delta)/n^2)^{-1/2}
// The step count is capped at 2^16 (flagged) when the target diverges, which
// happens at sigma = 0.
struct ScheduleSuggestion {
  double eta = 0.0;
  std::size_t steps = 0;
  double beta = 0.0;
  bool capped = false;
};

inline ScheduleSuggestion theoretical_schedule(const SparseLinearTask& task, std::size_t n,
                                               double delta) {
  if (task.support.empty()) throw ContractError("theoretical_schedule: empty support");
  if (n < 2) throw ContractError("theoretical_schedule: need n >= 2");
  if (!(delta > 0.0 && delta < 1.0)) throw ContractError("theoretical_schedule: delta not in (0,1)");
  constexpr std::size_t kStepCap = 1u << 16;

  ScheduleSuggestion out;
  double beta = std::numeric_limits<double>::infinity();
  double op_norm = 0.0;    // ||R Sigma R||_2 = max_j r_j^2 Sigma_jj
  double tr_rsr = 0.0;     // Tr(R Sigma R)
  double tr_sigma = 0.0;   // Tr(Sigma)
  for (std::size_t j = 0; j < task.dim; ++j) {
    const double r_j = task.weights[j] * task.covariance[j];
    op_norm = std::max(op_norm, r_j * r_j * task.covariance[j]);
    tr_rsr += r_j * r_j * task.covariance[j];
    tr_sigma += task.covariance[j];
  }
  for (std::size_t j : task.support) {
    beta = std::min(beta, std::abs(task.weights[j] * task.covariance[j]));
  }
  out.beta = beta;
  out.eta = 1.0 / (2.0 * std::max(op_norm, 1e-6));

  const double sigma2 = task.noise_std * task.noise_std;
  const double log_term = std::log(static_cast<double>(task.dim) / delta);
  const double inner = sigma2 * tr_rsr * log_term / static_cast<double>(n) +
                       sigma2 * static_cast<double>(task.sparsity) * tr_sigma * log_term *
                           log_term / (static_cast<double>(n) * static_cast<double>(n));
  if (!(inner > 0.0) || !(beta > 0.0)) {
    out.steps = kStepCap;
    out.capped = true;
    return out;
  }
  const double target = (1.0 / beta) / std::sqrt(inner);
  const double steps_real = std::ceil(target / out.eta);
  if (!(steps_real < static_cast<double>(kStepCap))) {
    out.steps = kStepCap;
    out.capped = true;
  } else {
    out.steps = std::max<std::size_t>(1, static_cast<std::size_t>(steps_real));
  }
  return out;
}

// Target eta*t of the schedule above, exposed for rate checks.
inline double schedule_target(const SparseLinearTask& task, std::size_t n, double delta) {
  double beta = std::numeric_limits<double>::infinity();
  double tr_rsr = 0.0, tr_sigma = 0.0;
  for (std::size_t j = 0; j < task.dim; ++j) {
    const double r_j = task.weights[j] * task.covariance[j];
    tr_rsr += r_j * r_j * task.covariance[j];
    tr_sigma += task.covariance[j];
  }
  for (std::size_t j : task.support) {
    beta = std::min(beta, std::abs(task.weights[j] * task.covariance[j]));
  }
  const double sigma2 = task.noise_std * task.noise_std;
  const double log_term = std::log(static_cast<double>(task.dim) / delta);
  const double inner = sigma2 * tr_rsr * log_term / static_cast<double>(n) +
                       sigma2 * static_cast<double>(task.sparsity) * tr_sigma * log_term *
                           log_term / (static_cast<double>(n) * static_cast<double>(n));
  if (!(inner > 0.0) || !(beta > 0.0)) return std::numeric_limits<double>::infinity();
  return (1.0 / beta) / std::sqrt(inner);
}

enum class SolverKind { kRawGd, kPreGd };

struct TunedRate {
  double eta = 0.0;
  double risk = std::numeric_limits<double>::infinity();
};

// Exhaustive grid search on the closed-form excess risk at step t. Divergent
// step sizes count as infinite risk; ties go to the larger eta.
inline TunedRate tune_learning_rate(SolverKind kind, const InContextDataset& data,
                                    const SparseLinearTask& task, std::size_t steps,
                                    const std::vector<double>& grid) {
  if (grid.empty()) throw ContractError("tune_learning_rate: empty grid");
  TunedRate best;
  best.eta = grid.front();
  for (double eta : grid) {
    double risk = std::numeric_limits<double>::infinity();
    try {
      if (kind == SolverKind::kRawGd) {
        GdTrajectory traj =
            gd_solve(data.examples, eta, steps, DenseVector(data.examples.front().x.dim()));
        risk = excess_risk_raw(traj.final_iterate(), task);
      } else {
        GdTrajectory traj = pre_gd_solve(data, eta, steps);
        risk = excess_risk_pre(traj.final_iterate(), traj.reweighter->r_hat, task);
      }
    } catch (const DivergenceError&) {
      risk = std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(risk)) continue;
    if (risk < best.risk || (risk == best.risk && eta > best.eta)) {
      best.risk = risk;
      best.eta = eta;
    }
  }
  return best;
}

}  // namespace preopt
