#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hetmp/tensor.hpp"

namespace hetmp {

struct TapeNode {
  Tensor value;
  Tensor grad;
  std::function<void()> backward;  // empty for leaves
};

using Var = TapeNode*;

/// Reverse-mode tape. Nodes are appended in evaluation order, which is a
/// topological order by construction; backward() runs the adjoint rules in
/// reverse. A tape is single-writer and owns its nodes; build one per
/// forward pass.
class Tape {
 public:
  Var constant(Tensor t);
  Var param(const std::string& name, const Tensor& t);

  // -- elementwise and linear algebra ----------------------------------
  Var add(Var a, Var b);          // same shape
  Var add_rowvec(Var a, Var b);   // a: [m,n], b: [1,n] broadcast over rows
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);          // Hadamard, same shape
  Var scale(Var a, double c);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var exp_(Var a);
  Var log_(Var a);
  Var tanh_(Var a);
  Var relu(Var a);
  Var leaky_relu(Var a, double slope);
  Var softmax_rows(Var a);

  // -- reductions and reshaping ----------------------------------------
  Var sum_all(Var a);                     // -> [1]
  Var mean_all(Var a);                    // -> [1]
  Var sum_axis(Var a, int axis);          // 2-d only
  Var mean_axis(Var a, int axis);         // 2-d only
  Var concat_cols(const std::vector<Var>& xs);
  Var slice_rows(Var a, int r0, int r1);  // rows [r0, r1)
  Var slice_cols(Var a, int c0, int c1);
  Var hadamard_mask(Var a, const Tensor& mask);  // mask is constant
  Var add_n(const std::vector<Var>& xs);

  // -- stochastic / normalization --------------------------------------
  Var dropout(Var a, double p, Rng& rng, bool train);
  /// Batch normalization over rows (per-column statistics). In train mode
  /// the batch statistics are used and running stats, when given, are
  /// updated in place; in eval mode running stats are required.
  Var batch_norm(Var x, Var gamma, Var beta, bool train,
                 Tensor* running_mean = nullptr, Tensor* running_var = nullptr,
                 double momentum = 0.1, double eps = 1e-5);

  // -- graph aggregation primitives ------------------------------------
  Var gather_rows(Var h, const std::vector<int>& idx);
  Var scatter_add_rows(Var m, const std::vector<int>& idx, int num_rows);
  Var mul_col(Var a, Var s);  // a: [m,n], s: [m,1]; scales row i by s_i
  /// Softmax over entries sharing a segment id (logits: [m,1]).
  Var segment_softmax(Var logits, const std::vector<int>& seg, int num_segments);
  /// Per-edge cosine similarity of endpoint embeddings: [E,1].
  /// Zero-norm embeddings (norm < eps_norm) yield similarity 0.
  Var edge_cosine(Var h, const std::vector<int>& src,
                  const std::vector<int>& dst, bool detach = false);
  /// All-pairs cosine similarity matrix of the rows of h: [n,n].
  Var cosine_matrix(Var h, bool detach = false);

  // -- losses ------------------------------------------------------------
  /// Mean cross-entropy of logits rows selected by mask against labels.
  Var masked_cross_entropy(Var logits, const std::vector<int>& labels,
                           const std::vector<bool>& mask);

  // -- convolution (bond-flow coupling) ---------------------------------
  /// 2-d convolution, input [H,W,Cin], weight [kh,kw,Cin,Cout], stride 1,
  /// zero padding to "same" output size. Odd kernel sizes only.
  Var conv2d(Var x, Var w, Var bias);
  /// Channel range [c0, c1) of a [H,W,C] tensor.
  Var slice_channels(Var x, int c0, int c1);

  /// Reverse sweep from a scalar loss; returns gradients for every
  /// registered parameter (zeros for parameters the loss does not reach).
  std::map<std::string, Tensor> grad(Var loss);

  static constexpr double kEpsNorm = 1e-12;

 private:
  Var make(Tensor value);
  std::vector<std::unique_ptr<TapeNode>> nodes_;
  std::map<std::string, Var> params_;
};

/// Named parameter tensors; the single source of truth between steps.
struct ParamStore {
  std::map<std::string, Tensor> values;
  bool has(const std::string& k) const { return values.count(k) > 0; }
  Tensor& operator[](const std::string& k) { return values[k]; }
};

struct AdamWState {
  std::map<std::string, Tensor> m, v;
  int64_t t = 0;
};

struct AdamWConfig {
  double lr = 0.001;
  double beta1 = 0.9, beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// One AdamW step with decoupled weight decay (applied multiplicatively
/// before the adaptive update) and bias-corrected moments.
void adamw_step(ParamStore& params, const std::map<std::string, Tensor>& grads,
                AdamWState& state, const AdamWConfig& cfg);

}  // namespace hetmp
