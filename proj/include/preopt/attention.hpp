// Multi-head linear-attention-only transformer with a masked attention
// window, plus the exact weight constructions that make it execute the
// correlation-reweighting preprocessor and multi-step gradient descent.
//
// Layer update on hidden state H (d_hid x m):
//   H' = W_proj (H + Concat[{ V_i M K_i^T Q_i }_{i=1..h}])
// with V_i = W_v_i H, K_i = W_k_i H, Q_i = W_q_i H and M the diagonal 0/1
// mask that keeps only the first n (example) columns as attention sources.
// Head i owns rows [i*d_hid/h, (i+1)*d_hid/h) of the concatenation; masking
// a head zeroes exactly that slice and leaves the residual stream alone, so
// it is losslessly reversible.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "preopt/linalg.hpp"
#include "preopt/task.hpp"

namespace preopt {

struct AttentionHead {
  DenseMatrix w_v;  // (d_hid/h) x d_hid
  DenseMatrix w_k;
  DenseMatrix w_q;
};

struct AttentionLayer {
  std::vector<AttentionHead> heads;
  DenseMatrix w_proj;                   // d_hid x d_hid
  std::vector<std::uint8_t> head_mask;  // 1 = contribute a zero slice
};

struct AttentionModel {
  DenseMatrix w_embed;  // d_hid x (d+1)
  std::vector<AttentionLayer> layers;
  DenseMatrix w_out;  // 1 x d_hid
  std::size_t d = 0;
  std::size_t d_hid = 0;
  std::size_t mask_width = 0;  // n: columns the attention may read
};

struct ForwardTrace {
  std::vector<DenseMatrix> hidden;  // H^0 .. H^L, each d_hid x (n+q)
  DenseVector y_hat;                // length n+q
};

namespace detail {

inline void check_layer_shapes(const AttentionModel& model, const AttentionLayer& layer,
                               std::size_t layer_index) {
  const std::size_t h = layer.heads.size();
  if (h == 0 || model.d_hid % h != 0) {
    throw ContractError("forward: layer " + std::to_string(layer_index) + " has " +
                        std::to_string(h) + " heads, incompatible with d_hid " +
                        std::to_string(model.d_hid));
  }
  const std::size_t hd = model.d_hid / h;
  for (const AttentionHead& head : layer.heads) {
    if (head.w_v.rows() != hd || head.w_v.cols() != model.d_hid || head.w_k.rows() != hd ||
        head.w_k.cols() != model.d_hid || head.w_q.rows() != hd ||
        head.w_q.cols() != model.d_hid) {
      throw ContractError("forward: head weight shape mismatch in layer " +
                          std::to_string(layer_index));
    }
  }
  if (layer.w_proj.rows() != model.d_hid || layer.w_proj.cols() != model.d_hid) {
    throw ContractError("forward: projection shape mismatch in layer " +
                        std::to_string(layer_index));
  }
  if (layer.head_mask.size() != h) {
    throw ContractError("forward: head mask size mismatch in layer " +
                        std::to_string(layer_index));
  }
}

}  // namespace detail

inline ForwardTrace forward(const AttentionModel& model, const PromptMatrix& prompt) {
  if (prompt.entries.rows() != model.d + 1) {
    throw ContractError("forward: prompt has " + std::to_string(prompt.entries.rows()) +
                        " rows but model expects " + std::to_string(model.d + 1));
  }
  if (prompt.n != model.mask_width) {
    throw ContractError("forward: prompt n " + std::to_string(prompt.n) +
                        " != model mask width " + std::to_string(model.mask_width));
  }
  if (model.w_embed.rows() != model.d_hid || model.w_embed.cols() != model.d + 1) {
    throw ContractError("forward: embedding shape mismatch");
  }
  if (model.w_out.rows() != 1 || model.w_out.cols() != model.d_hid) {
    throw ContractError("forward: output projection shape mismatch");
  }

  const std::size_t m = prompt.entries.cols();
  ForwardTrace trace;
  trace.hidden.reserve(model.layers.size() + 1);
  trace.hidden.push_back(matmul(model.w_embed, prompt.entries));

  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const AttentionLayer& layer = model.layers[li];
    detail::check_layer_shapes(model, layer, li);
    const DenseMatrix& h_in = trace.hidden.back();
    const std::size_t hd = model.d_hid / layer.heads.size();

    DenseMatrix pre_proj = h_in;  // residual plus concatenated head outputs
    for (std::size_t hi = 0; hi < layer.heads.size(); ++hi) {
      if (layer.head_mask[hi]) continue;
      const AttentionHead& head = layer.heads[hi];
      const DenseMatrix values = matmul(head.w_v, h_in);
      const DenseMatrix keys = matmul(head.w_k, h_in);
      const DenseMatrix queries = matmul(head.w_q, h_in);

      // scores = V M K^T restricted to the first mask_width columns
      DenseMatrix scores(hd, hd);
      for (std::size_t a = 0; a < hd; ++a) {
        for (std::size_t b = 0; b < hd; ++b) {
          double acc = 0.0;
          for (std::size_t c = 0; c < model.mask_width; ++c) acc += values(a, c) * keys(b, c);
          scores(a, b) = acc;
        }
      }
      const DenseMatrix slice = matmul(scores, queries);
      const std::size_t row0 = hi * hd;
      for (std::size_t a = 0; a < hd; ++a) {
        for (std::size_t c = 0; c < m; ++c) pre_proj(row0 + a, c) += slice(a, c);
      }
    }
    trace.hidden.push_back(matmul(layer.w_proj, pre_proj));
  }

  const DenseMatrix& h_last = trace.hidden.back();
  trace.y_hat = DenseVector(m);
  for (std::size_t c = 0; c < m; ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < model.d_hid; ++r) acc += model.w_out(0, r) * h_last(r, c);
    trace.y_hat[c] = acc;
  }
  return trace;
}

// Embedding for the constructed models: feature j and the label are copied
// into the triple of rows (3j, 3j+1, 3j+2), the third row left at zero as
// workspace for the head outputs.
inline DenseMatrix construct_embedding(std::size_t d) {
  if (d < 1) throw ContractError("construct_embedding: d must be positive");
  DenseMatrix w(3 * d, d + 1);
  for (std::size_t j = 0; j < d; ++j) {
    w(3 * j, j) = 1.0;
    w(3 * j + 1, d) = 1.0;
  }
  return w;
}

// One layer with d heads over the tripled embedding. Head j reads its
// feature row and the label row; its value-key product over the masked
// window is exactly the correlation estimate r_hat_j = (1/n) sum x_ij y_i,
// so the head output row carries r_hat_j * x_j for every column. The
// projection collects those rows into rows 0..d-1, moves the label row to
// row d, and zeroes the remaining workspace rows.
inline AttentionLayer construct_preprocess_layer(std::size_t d, std::size_t n) {
  if (d < 1 || n < 1) throw ContractError("construct_preprocess_layer: need d >= 1 and n >= 1");
  const std::size_t d_hid = 3 * d;
  AttentionLayer layer;
  layer.heads.reserve(d);
  for (std::size_t j = 0; j < d; ++j) {
    AttentionHead head;
    head.w_v = DenseMatrix(3, d_hid);
    head.w_k = DenseMatrix(3, d_hid);
    head.w_q = DenseMatrix(3, d_hid);
    head.w_k(2, 3 * j + 1) = 1.0 / static_cast<double>(n);
    head.w_v(2, 3 * j) = 1.0;
    head.w_q(2, 3 * j) = 1.0;
    layer.heads.push_back(std::move(head));
  }
  layer.w_proj = DenseMatrix(d_hid, d_hid);
  for (std::size_t j = 0; j < d; ++j) layer.w_proj(j, 3 * j + 2) = 1.0;
  layer.w_proj(d, 1) = 1.0;  // label row survives in row d
  layer.head_mask.assign(d, 0);
  return layer;
}

// Single-head layer implementing one GD step on the reweighted examples.
// Reading rows 0..d-1 as features and row d as the running residual, the
// attention increment subtracts (eta/n) sum_c residual_c <x_c, x_c'> from
// row d, which is one gradient step on the prediction row.
inline AttentionLayer construct_gd_layer(std::size_t d, std::size_t n, double eta) {
  if (d < 1 || n < 1) throw ContractError("construct_gd_layer: need d >= 1 and n >= 1");
  if (eta < 0.0) throw ContractError("construct_gd_layer: negative step size");
  const std::size_t d_hid = 3 * d;
  AttentionLayer layer;
  AttentionHead head;
  head.w_v = DenseMatrix(d_hid, d_hid);
  head.w_v(d, d) = -eta / static_cast<double>(n);
  head.w_k = DenseMatrix(d_hid, d_hid);
  head.w_q = DenseMatrix(d_hid, d_hid);
  for (std::size_t j = 0; j < d; ++j) {
    head.w_k(j, j) = 1.0;
    head.w_q(j, j) = 1.0;
  }
  layer.heads.push_back(std::move(head));
  layer.w_proj = DenseMatrix::identity(d_hid);
  layer.head_mask.assign(1, 0);
  return layer;
}

// Preprocess layer followed by k GD layers. Row d of the query columns
// accumulates -<w_gd^k, x_tilde>, so the output projection reads row d with
// sign -1 and the prediction at query column n+j is +<w_gd^k, x_tilde_{n+j}>.
inline AttentionModel assemble_icl_model(std::size_t d, std::size_t n, double eta,
                                         std::size_t gd_layers) {
  AttentionModel model;
  model.d = d;
  model.d_hid = 3 * d;
  model.mask_width = n;
  model.w_embed = construct_embedding(d);
  model.layers.reserve(gd_layers + 1);
  model.layers.push_back(construct_preprocess_layer(d, n));
  for (std::size_t k = 0; k < gd_layers; ++k) {
    model.layers.push_back(construct_gd_layer(d, n, eta));
  }
  model.w_out = DenseMatrix(1, model.d_hid);
  model.w_out(0, d) = -1.0;
  return model;
}

inline AttentionModel mask_head(const AttentionModel& model, std::size_t layer_index,
                                std::size_t head_index) {
  if (layer_index >= model.layers.size() ||
      head_index >= model.layers[layer_index].heads.size()) {
    throw ContractError("mask_head: index (" + std::to_string(layer_index) + ", " +
                        std::to_string(head_index) + ") out of range");
  }
  AttentionModel out = model;
  out.layers[layer_index].head_mask[head_index] = 1;
  return out;
}

inline AttentionModel unmask_head(const AttentionModel& model, std::size_t layer_index,
                                  std::size_t head_index) {
  if (layer_index >= model.layers.size() ||
      head_index >= model.layers[layer_index].heads.size()) {
    throw ContractError("unmask_head: index (" + std::to_string(layer_index) + ", " +
                        std::to_string(head_index) + ") out of range");
  }
  AttentionModel out = model;
  out.layers[layer_index].head_mask[head_index] = 0;
  return out;
}

struct HeadImportance {
  std::vector<std::vector<double>> raw_deltas;  // mean risk change per (layer, head)
  std::vector<std::vector<double>> normalized;  // rows sum to 1 unless flagged
  std::vector<std::uint8_t> row_flagged;        // 1 when a row total is zero or negative
};

enum class ImportanceMode { kIclRisk };

struct EvalInstance {
  SparseLinearTask task;
  InContextDataset data;
};

// Risk change from masking each head, averaged over the evaluation
// instances, then normalized within each layer. The error of an instance is
// the squared prediction error at its first query column.
inline HeadImportance head_importance(const AttentionModel& model,
                                      const std::vector<EvalInstance>& instances,
                                      ImportanceMode mode) {
  (void)mode;  // single mode today
  if (instances.empty()) throw EmptySampleError("head_importance: no evaluation instances");
  if (model.layers.empty()) throw ContractError("head_importance: model has no layers");

  HeadImportance out;
  out.raw_deltas.resize(model.layers.size());
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    out.raw_deltas[li].assign(model.layers[li].heads.size(), 0.0);
  }

  AttentionModel work = model;
  for (const EvalInstance& inst : instances) {
    const PromptMatrix prompt = build_prompt(inst.data);
    const double y_true = inst.data.queries.front().y_true;
    const ForwardTrace base = forward(work, prompt);
    const double base_err = (base.y_hat[prompt.n] - y_true) * (base.y_hat[prompt.n] - y_true);

    for (std::size_t li = 0; li < work.layers.size(); ++li) {
      for (std::size_t hi = 0; hi < work.layers[li].heads.size(); ++hi) {
        work.layers[li].head_mask[hi] = 1;
        const ForwardTrace masked = forward(work, prompt);
        work.layers[li].head_mask[hi] = 0;
        const double masked_err =
            (masked.y_hat[prompt.n] - y_true) * (masked.y_hat[prompt.n] - y_true);
        out.raw_deltas[li][hi] += masked_err - base_err;
      }
    }
  }
  const double inv_count = 1.0 / static_cast<double>(instances.size());
  for (auto& row : out.raw_deltas) {
    for (double& v : row) v *= inv_count;
  }

  out.normalized.resize(out.raw_deltas.size());
  out.row_flagged.assign(out.raw_deltas.size(), 0);
  for (std::size_t li = 0; li < out.raw_deltas.size(); ++li) {
    double total = 0.0;
    for (double v : out.raw_deltas[li]) total += v;
    if (total > 0.0) {
      out.normalized[li].reserve(out.raw_deltas[li].size());
      for (double v : out.raw_deltas[li]) out.normalized[li].push_back(v / total);
    } else {
      out.normalized[li] = out.raw_deltas[li];
      out.row_flagged[li] = 1;
    }
  }
  return out;
}

// Rows 0..d-1 of the query columns of H^1: the reweighted query features.
inline std::vector<DenseVector> extract_preprocessed(const ForwardTrace& trace, std::size_t d,
                                                     std::size_t n, std::size_t q) {
  if (trace.hidden.size() < 2) {
    throw ContractError("extract_preprocessed: trace has no first-layer state");
  }
  const DenseMatrix& h1 = trace.hidden[1];
  if (h1.rows() < d || h1.cols() != n + q) {
    throw ContractError("extract_preprocessed: hidden state is " + std::to_string(h1.rows()) +
                        "x" + std::to_string(h1.cols()) + ", expected at least " +
                        std::to_string(d) + " rows and exactly " + std::to_string(n + q) +
                        " columns");
  }
  std::vector<DenseVector> out;
  out.reserve(q);
  for (std::size_t c = 0; c < q; ++c) {
    DenseVector v(d);
    for (std::size_t r = 0; r < d; ++r) v[r] = h1(r, n + c);
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace preopt
