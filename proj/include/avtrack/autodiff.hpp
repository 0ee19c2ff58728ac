#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "avtrack/tensor.hpp"

namespace avtrack::nn {

// Reverse-mode autodiff over a dynamically built tape of Tensor-valued nodes.
// Graphs are per-forward-pass and freed when the root Var goes out of scope;
// leaf parameters persist and accumulate gradients until zero_grad().
struct Node {
    Tensor val;
    Tensor grad;  // allocated lazily by ensure_grad()
    bool requires_grad = false;
    bool has_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> back;  // scatters this->grad into parents

    void ensure_grad() {
        if (!has_grad) {
            grad = Tensor::zeros(val.rows, val.cols);
            has_grad = true;
        }
    }
    void add_grad_into(const Tensor& g);
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor t);
Var leaf(Tensor t, bool requires_grad = true);

// Backpropagate from a scalar (1x1) root. Accumulates into leaf grads.
void backward(const Var& root);
void zero_grad(const std::vector<Var>& params);

// --- elementwise / broadcast ---
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_rowvec(const Var& a, const Var& rowvec);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var scale_by(const Var& a, const Var& s);  // s is 1x1
Var neg(const Var& a);
Var exp_op(const Var& a);
Var log_clamped(const Var& a, double floor);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var silu(const Var& a);
Var abs_op(const Var& a);
Var clamp_op(const Var& a, double lo, double hi);

// --- reductions ---
Var sum_all(const Var& a);
Var mean_all(const Var& a);

// --- structural ---
Var matmul(const Var& a, const Var& b);
Var transpose_op(const Var& a);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& a, int r0, int len);
Var row(const Var& a, int r);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& a, int c0, int len);
Var flip_rows(const Var& a);
Var detach(const Var& a);

// --- fused layers ---
Var softmax_rows(const Var& a);
Var rmsnorm_rows(const Var& x, const Var& gain, double eps = 1e-6);
// Depthwise 1-D convolution along the row (sequence) axis, causal zero padding.
Var dwconv_causal(const Var& x, const Var& w, const Var& b);

// Diagonal selective state-space scan over rows of u.
//   u, delta : T x P   (per-position input and positive time step)
//   A        : P x S   (continuous-time diagonal state matrix, must be finite)
//   B, C     : T x S   (per-position input/output mixing)
// zoh=true uses the zero-order-hold discretization
//   Abar = exp(delta*A), Bbar = (delta*A)^-1 (exp(delta*A) - 1) * delta*B;
// zoh=false uses the Euler simplification Bbar = delta*B.
// Throws NumericError on non-positive delta or non-finite state.
Var selective_scan(const Var& u, const Var& delta, const Var& A, const Var& B, const Var& C,
                   bool zoh = true);

}  // namespace avtrack::nn
