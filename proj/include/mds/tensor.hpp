#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "mds/kernels.hpp"

namespace mds {

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // empty until first accumulation
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
};

}  // namespace detail

/// Dense matrix handle taking part in reverse-mode differentiation. Copies
/// share the underlying node; intermediates record their parents only when
/// some input requires a gradient.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor zeros(Eigen::Index rows, Eigen::Index cols, bool requires_grad = false);
  static Tensor scalar(Scalar v);

  bool defined() const { return node_ != nullptr; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_->requires_grad; }

  const Matrix& value() const { return node_->value; }
  /// Direct write access for optimizers and tests; bypasses the graph.
  Matrix& mutable_value() { return node_->value; }
  Scalar item() const;

  bool has_grad() const { return node_->grad.size() > 0; }
  /// Gradient, or a zero matrix of the value's shape if none accumulated.
  Matrix grad() const;
  void zero_grad() { node_->grad.resize(0, 0); }

  /// Internal: builds an intermediate node.
  static Tensor from_op(Matrix value, std::vector<Tensor> inputs, std::function<void(detail::Node&)> backward);
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// While alive, new intermediates on this thread record no parents, so
/// inference builds no graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Populates gradients of every requires_grad leaf reachable from `loss`
/// (which must be 1x1). Leaf gradients accumulate across calls until
/// zero_grad(); intermediate gradients are recomputed each call.
void backward(const Tensor& loss);

// Primitives. All throw ShapeError on nonconforming shapes.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Scalar s);
/// x + row, with `row` 1 x cols broadcast down the rows.
Tensor add_row(const Tensor& x, const Tensor& row);
/// Multiplies row i of x by weights(i, 0).
Tensor scale_rows(const Tensor& weights, const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor softmax_rows(const Tensor& x, bool causal = false);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, Eigen::Index begin, Eigen::Index count);
Tensor slice_cols(const Tensor& x, Eigen::Index begin, Eigen::Index count);
Tensor mean_rows(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor sum_squares(const Tensor& x);
/// Rows of `table` selected by `indices`, in order.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);
Tensor frobenius_distance_sq(const Tensor& a, const Tensor& b);
/// Mean over rows of -log(probs(i, targets[i])), probabilities clamped at
/// 1e-12 (with a warning). `probs` is N x V.
Tensor cross_entropy_loss(const Tensor& probs, std::span<const std::size_t> targets);

// Composites.

struct LinearWeights {
  Tensor weight;  // d_in x d_out
  Tensor bias;    // 1 x d_out
};

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
inline Tensor linear(const Tensor& x, const LinearWeights& w) { return linear(x, w.weight, w.bias); }

struct AttentionWeights {
  Tensor query;
  Tensor key;
  Tensor value;
};

struct AttentionOptions {
  bool causal = false;
  /// Divide logits by sqrt(D). Off by default.
  bool scaled = false;
};

struct AttentionResult {
  Tensor output;
  Tensor weights;  // a x b, rows sum to 1
};

/// softmax((q_src Wq)(kv_src Wk)^T) (kv_src Wv)
AttentionResult cross_attention(const Tensor& q_src, const Tensor& kv_src, const AttentionWeights& w,
                                AttentionOptions opts = {});

struct MlpWeights {
  LinearWeights in;   // D x hidden
  LinearWeights out;  // hidden x D
};

/// linear -> tanh -> linear
Tensor mlp(const Tensor& x, const MlpWeights& w);

struct LayerNormWeights {
  Tensor gain;
  Tensor bias;
};

inline Tensor layer_norm(const Tensor& x, const LayerNormWeights& w) { return layer_norm(x, w.gain, w.bias); }

}  // namespace mds
