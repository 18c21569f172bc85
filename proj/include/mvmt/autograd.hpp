#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "mvmt/tensor.hpp"

namespace mvmt::ag {

/// One node of the dynamic computation graph built during a forward pass.
/// `backward` reads this node's accumulated gradient and adds the chain-rule
/// contributions into its parents' gradients.
struct Node {
    Tensor value;
    Tensor grad; // allocated lazily, same shape as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void accumulate(const Tensor& g);
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor value);
Var leaf(Tensor value); // requires_grad = true

/// Reverse-mode sweep from a scalar root. Seeds d(root)/d(root) = 1 and runs
/// each reachable node's backward in reverse topological order.
void backward(const Var& root);

enum class Activation { Relu, Tanh, Sigmoid };

// --- primitives -----------------------------------------------------------

/// weight (m x n) * input (n) + bias (m)
Var affine(const Var& input, const Var& weight, const Var& bias);
/// weight (m x n) * input (n), no bias
Var matvec(const Var& weight, const Var& input);
/// Row-wise affine map: rows (R x n) -> (R x m) via rows * weight^T + bias.
Var linear_rows(const Var& rows, const Var& weight, const Var& bias);

Var activation(const Var& input, Activation kind);
Var relu(const Var& v);
Var tanh_op(const Var& v);
Var sigmoid(const Var& v);

/// Max-stabilized softmax over a non-empty vector.
Var softmax(const Var& scores);

/// Zero same-padded 1-D convolution of a length-T sequence with
/// kernels (filters x width, width odd); output is (filters x T).
Var conv1d_single_channel(const Var& sequence, const Var& kernels, const Var& bias);

/// Per-row max over (filters x T); gradient goes to the first argmax per row.
Var maxpool_over_time(const Var& feature_map);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b); // elementwise
Var scale(const Var& v, double factor);
Var concat(const std::vector<Var>& parts); // vectors -> vector
Var dot(const Var& a, const Var& b);       // -> scalar
Var sum(const Var& v);                     // -> scalar
Var mean(const Var& v);                    // -> scalar
Var log_op(const Var& v);
Var clamp(const Var& v, double lo, double hi); // zero gradient outside [lo, hi]

/// weights (R) ^T * rows (R x c) -> (c); the attention-pooling core.
Var weighted_sum_rows(const Var& weights, const Var& rows);

Var stack_rows(const std::vector<Var>& rows); // R vectors of length c -> (R x c)
Var row(const Var& matrix, std::size_t index);
Var flatten(const Var& v); // reshape to vector, identity gradient

/// Rows of `matrix` (d x n) selected as columns: output (k x d) with
/// output row i = matrix[:, indices[i]].
Var gather_columns(const Var& matrix, const std::vector<std::size_t>& indices);

/// Block `index` of a rank-3 tensor (A x B x C) -> (B x C).
Var slice_block(const Var& tensor3, std::size_t index);

/// Per-code Conv1d + max-over-time in one node: visit_matrix is the constant
/// (T x |C|) binary input, kernels is (|C| x F x K), bias is (|C| x F); the
/// result is (|C| x F) with row i = MaxPool(Conv1d_i(column i)). Equivalent to
/// composing slice_block / conv1d_single_channel / maxpool_over_time per code.
Var feature_view_fused(const Tensor& visit_matrix, const Var& kernels, const Var& bias);

/// Add a length-c vector to every row of an (R x c) matrix.
Var add_row_broadcast(const Var& matrix, const Var& vec);

/// v / ||v||2; raises degenerate-vector-error when the norm is below floor.
Var normalize_to_unit_sphere(const Var& v, double norm_floor = 1e-12);

struct GruParams {
    Var w_update, u_update, b_update;
    Var w_reset, u_reset, b_reset;
    Var w_cand, u_cand, b_cand;
};

/// Standard GRU cell: update/reset gates, candidate state, convex mix.
/// Fused into one node; gradients verified against finite differences.
Var gru_cell(const Var& input, const Var& hidden_prev, const GruParams& params);

/// Mean binary cross-entropy over scalar predictions, clamped to
/// [1e-7, 1 - 1e-7] before the logs.
Var bce_loss(const std::vector<Var>& predictions, const std::vector<int>& labels);

/// Cross-view contrastive loss over a batch of paired unit-norm projections.
/// For each anchor the positive is its paired view; all other 2B-1 vectors
/// form the denominator. Temperature divides the dot products (default 1
/// leaves the formula untouched).
Var contrastive_loss(const std::vector<std::pair<Var, Var>>& projections,
                     double temperature = 1.0);

/// Plain-double reference for the contrastive loss used by tests; enumerates
/// every anchor and denominator term directly.
double contrastive_loss_reference(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& projections,
    double temperature = 1.0);

} // namespace mvmt::ag
