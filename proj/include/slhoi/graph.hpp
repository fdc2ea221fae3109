#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "slhoi/mat.hpp"
#include "slhoi/params.hpp"

namespace slhoi {

// Reverse-mode tape over Mat. Nodes form a DAG held together by shared
// ownership; backward() topologically sorts from the root, so no global tape
// object is needed. Nodes whose ancestors are all constants skip gradient
// bookkeeping entirely, which is how the frozen backbone and vision head stay
// differentiable *through* while never accumulating parameter gradients.
struct Node {
  Mat value;
  Mat grad;  // allocated on demand during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->value / this->grad, adds into parents' grads.
  std::function<void(Node&)> backprop;
};

using Var = std::shared_ptr<Node>;

Var constant(Mat v);
Var constant_scalar(double v);

// Runs reverse-mode accumulation from a 1x1 root (seeded with 1).
void backward(const Var& root);

// Elementwise / broadcast arithmetic -------------------------------------
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // hadamard
Var divide(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var add_rowvec(Var a, Var r);     // r: 1 x C broadcast down rows
Var mul_colvec(Var a, Var c);     // c: R x 1 broadcast across columns
Var mul_scalar_var(Var a, Var s); // s: 1 x 1
Var minimum(Var a, Var b);        // ties route gradient to a
Var maximum(Var a, Var b);
Var clamp_max(Var a, double cap);

// Nonlinearities ----------------------------------------------------------
Var relu(Var a);
Var gelu(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var exp_v(Var a);
Var log_v(Var a);
Var abs_v(Var a);
Var rsqrt(Var a);  // a must stay positive

// Structure ---------------------------------------------------------------
Var matmul(Var a, Var b);
Var transpose(Var a);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(Var a, int begin, int end);
Var slice_cols(Var a, int begin, int end);

// Reductions --------------------------------------------------------------
Var sum_all(Var a);     // 1 x 1
Var mean_all(Var a);    // 1 x 1
Var row_sum(Var a);     // R x 1
Var col_mean(Var a);    // 1 x C

// Row-wise softmax family. An optional additive mask (same shape, may hold
// -inf) is applied before normalization.
Var softmax_rows(Var a);
Var softmax_rows_masked(Var a, const Mat& additive_mask);
Var logsumexp_rows(Var a);  // R x 1

// Row-wise layer norm with learnable gain/bias (1 x C each).
Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-6);

// x / max(||x||_2, derived from eps) per row; eps guards the zero-norm row.
Var l2_normalize_rows(Var x, double eps = 1e-8);

// Parameter binding -------------------------------------------------------
// Leaf creation for parameters plus the post-backward flush of leaf grads
// into Parameter::grad. Frozen parameters become plain constants.
class Graph {
 public:
  Var param(Parameter& p);
  Var input(Mat v) { return constant(std::move(v)); }
  void backward_and_flush(const Var& root);

 private:
  std::vector<std::pair<Parameter*, Var>> bindings_;
};

}  // namespace slhoi
