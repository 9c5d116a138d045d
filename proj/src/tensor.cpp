#include "mds/tensor.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

#include "mds/error.hpp"
#include "mds/log.hpp"

namespace mds {

namespace detail {

void Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

}  // namespace detail

namespace {

std::string shape_of(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void require(bool ok, const char* op, const Tensor& a, const Tensor& b) {
  if (!ok) throw ShapeError(std::string(op) + ": incompatible shapes " + shape_of(a) + " and " + shape_of(b));
}

detail::Node& parent(detail::Node& self, std::size_t i) { return *self.parents[i]; }

thread_local bool grad_enabled = true;

}  // namespace

NoGradGuard::NoGradGuard() : previous_(grad_enabled) { grad_enabled = false; }
NoGradGuard::~NoGradGuard() { grad_enabled = previous_; }

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Eigen::Index rows, Eigen::Index cols, bool requires_grad) {
  return Tensor(Matrix::Zero(rows, cols), requires_grad);
}

Tensor Tensor::scalar(Scalar v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return Tensor(std::move(m));
}

Scalar Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("item() on a " + shape_of(*this) + " tensor");
  return node_->value(0, 0);
}

Matrix Tensor::grad() const {
  if (has_grad()) return node_->grad;
  return Matrix::Zero(rows(), cols());
}

Tensor Tensor::from_op(Matrix value, std::vector<Tensor> inputs, std::function<void(detail::Node&)> backward) {
  Tensor out(std::move(value));
  out.node_->leaf = false;
  bool needs = false;
  if (grad_enabled)
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (needs) {
    out.node_->requires_grad = true;
    out.node_->parents.reserve(inputs.size());
    for (auto& in : inputs) out.node_->parents.push_back(in.node_);
    out.node_->backward = std::move(backward);
  }
  return out;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1) {
    throw ShapeError("backward() requires a 1x1 loss");
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* node : order) {
    if (!node->leaf) node->grad.resize(0, 0);
  }
  loss.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->leaf || node->grad.size() == 0 || !node->backward) continue;
    node->backward(*node);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul", a, b);
  return Tensor::from_op(a.value() * b.value(), {a, b}, [](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) pa.accumulate(self.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate(pa.value.transpose() * self.grad);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.cols(), "matmul_nt", a, b);
  return Tensor::from_op(a.value() * b.value().transpose(), {a, b}, [](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) pa.accumulate(self.grad * pb.value);
    if (pb.requires_grad) pb.accumulate(self.grad.transpose() * pa.value);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add", a, b);
  return Tensor::from_op(a.value() + b.value(), {a, b}, [](detail::Node& self) {
    parent(self, 0).accumulate(self.grad);
    parent(self, 1).accumulate(self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub", a, b);
  return Tensor::from_op(a.value() - b.value(), {a, b}, [](detail::Node& self) {
    parent(self, 0).accumulate(self.grad);
    parent(self, 1).accumulate(-self.grad);
  });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard", a, b);
  return Tensor::from_op(a.value().cwiseProduct(b.value()), {a, b}, [](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) pa.accumulate(self.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) pb.accumulate(self.grad.cwiseProduct(pa.value));
  });
}

Tensor scale(const Tensor& a, Scalar s) {
  return Tensor::from_op(a.value() * s, {a}, [s](detail::Node& self) { parent(self, 0).accumulate(self.grad * s); });
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  require(row.rows() == 1 && row.cols() == x.cols(), "add_row", x, row);
  Matrix out = x.value();
  out.rowwise() += row.value().row(0);
  return Tensor::from_op(std::move(out), {x, row}, [](detail::Node& self) {
    parent(self, 0).accumulate(self.grad);
    auto& pr = parent(self, 1);
    if (pr.requires_grad) pr.accumulate(self.grad.colwise().sum());
  });
}

Tensor scale_rows(const Tensor& weights, const Tensor& x) {
  require(weights.cols() == 1 && weights.rows() == x.rows(), "scale_rows", weights, x);
  Matrix out = x.value().array().colwise() * weights.value().col(0).array();
  return Tensor::from_op(std::move(out), {weights, x}, [](detail::Node& self) {
    auto& pw = parent(self, 0);
    auto& px = parent(self, 1);
    if (pw.requires_grad) pw.accumulate(self.grad.cwiseProduct(px.value).rowwise().sum());
    if (px.requires_grad) {
      Matrix g = self.grad.array().colwise() * pw.value.col(0).array();
      px.accumulate(g);
    }
  });
}

Tensor tanh(const Tensor& x) {
  Matrix out = x.value().array().tanh();
  return Tensor::from_op(std::move(out), {x}, [](detail::Node& self) {
    Matrix g = self.grad.array() * (1.0 - self.value.array().square());
    parent(self, 0).accumulate(g);
  });
}

Tensor softmax_rows(const Tensor& x, bool causal) {
  return Tensor::from_op(softmax_rows_kernel(x.value(), causal), {x}, [](detail::Node& self) {
    const Matrix& y = self.value;
    const Eigen::VectorXd dots = self.grad.cwiseProduct(y).rowwise().sum();
    Matrix g = y.array() * (self.grad.colwise() - dots).array();
    parent(self, 0).accumulate(g);
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  require(gain.rows() == 1 && gain.cols() == x.cols(), "layer_norm", x, gain);
  require(bias.rows() == 1 && bias.cols() == x.cols(), "layer_norm", x, bias);
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Matrix normalized(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar mean = x.value().row(i).mean();
    const auto centered = (x.value().row(i).array() - mean).eval();
    inv_std(i) = 1.0 / std::sqrt(centered.square().mean() + kLayerNormEps);
    normalized.row(i) = centered * inv_std(i);
  }
  Matrix out = normalized.array().rowwise() * gain.value().row(0).array();
  out.rowwise() += bias.value().row(0);
  return Tensor::from_op(std::move(out), {x, gain, bias},
                         [normalized = std::move(normalized), inv_std = std::move(inv_std)](detail::Node& self) {
                           auto& px = parent(self, 0);
                           auto& pg = parent(self, 1);
                           auto& pb = parent(self, 2);
                           if (pg.requires_grad) pg.accumulate(self.grad.cwiseProduct(normalized).colwise().sum());
                           if (pb.requires_grad) pb.accumulate(self.grad.colwise().sum());
                           if (px.requires_grad) {
                             const Matrix dxhat = self.grad.array().rowwise() * pg.value.row(0).array();
                             const Scalar d = static_cast<Scalar>(dxhat.cols());
                             Matrix g(dxhat.rows(), dxhat.cols());
                             for (Eigen::Index i = 0; i < dxhat.rows(); ++i) {
                               const Scalar m1 = dxhat.row(i).sum() / d;
                               const Scalar m2 = dxhat.row(i).dot(normalized.row(i)) / d;
                               g.row(i) = inv_std(i) * (dxhat.row(i).array() - m1 - normalized.row(i).array() * m2);
                             }
                             px.accumulate(g);
                           }
                         });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.empty() ? 0 : parts.front().cols();
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows", parts.front(), p);
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return Tensor::from_op(std::move(out), {parts.begin(), parts.end()}, [](detail::Node& self) {
    Eigen::Index r = 0;
    for (auto& p : self.parents) {
      const Eigen::Index n = p->value.rows();
      if (p->requires_grad) p->accumulate(self.grad.middleRows(r, n));
      r += n;
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts.empty() ? 0 : parts.front().rows();
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols", parts.front(), p);
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return Tensor::from_op(std::move(out), {parts.begin(), parts.end()}, [](detail::Node& self) {
    Eigen::Index c = 0;
    for (auto& p : self.parents) {
      const Eigen::Index n = p->value.cols();
      if (p->requires_grad) p->accumulate(self.grad.middleCols(c, n));
      c += n;
    }
  });
}

Tensor slice_rows(const Tensor& x, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > x.rows()) {
    throw ShapeError("slice_rows out of range on " + shape_of(x));
  }
  return Tensor::from_op(x.value().middleRows(begin, count), {x}, [begin, count](detail::Node& self) {
    auto& px = parent(self, 0);
    Matrix g = Matrix::Zero(px.value.rows(), px.value.cols());
    g.middleRows(begin, count) = self.grad;
    px.accumulate(g);
  });
}

Tensor slice_cols(const Tensor& x, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > x.cols()) {
    throw ShapeError("slice_cols out of range on " + shape_of(x));
  }
  return Tensor::from_op(x.value().middleCols(begin, count), {x}, [begin, count](detail::Node& self) {
    auto& px = parent(self, 0);
    Matrix g = Matrix::Zero(px.value.rows(), px.value.cols());
    g.middleCols(begin, count) = self.grad;
    px.accumulate(g);
  });
}

Tensor mean_rows(const Tensor& x) {
  if (x.rows() == 0) throw ShapeError("mean_rows of an empty tensor");
  return Tensor::from_op(x.value().colwise().mean(), {x}, [](detail::Node& self) {
    auto& px = parent(self, 0);
    const Scalar n = static_cast<Scalar>(px.value.rows());
    Matrix g = (self.grad / n).replicate(px.value.rows(), 1);
    px.accumulate(g);
  });
}

Tensor sum(const Tensor& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return Tensor::from_op(std::move(out), {x}, [](detail::Node& self) {
    auto& px = parent(self, 0);
    px.accumulate(Matrix::Constant(px.value.rows(), px.value.cols(), self.grad(0, 0)));
  });
}

Tensor sum_squares(const Tensor& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().squaredNorm();
  return Tensor::from_op(std::move(out), {x}, [](detail::Node& self) {
    auto& px = parent(self, 0);
    px.accumulate(2.0 * self.grad(0, 0) * px.value);
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  Matrix out(static_cast<Eigen::Index>(indices.size()), table.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= static_cast<std::size_t>(table.rows())) {
      throw ShapeError("gather_rows index " + std::to_string(indices[i]) + " out of range for " + shape_of(table));
    }
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(static_cast<Eigen::Index>(indices[i]));
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return Tensor::from_op(std::move(out), {table}, [idx = std::move(idx)](detail::Node& self) {
    auto& pt = parent(self, 0);
    Matrix g = Matrix::Zero(pt.value.rows(), pt.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      g.row(static_cast<Eigen::Index>(idx[i])) += self.grad.row(static_cast<Eigen::Index>(i));
    }
    pt.accumulate(g);
  });
}

Tensor frobenius_distance_sq(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "frobenius_distance_sq", a, b);
  Matrix out(1, 1);
  out(0, 0) = (a.value() - b.value()).squaredNorm();
  return Tensor::from_op(std::move(out), {a, b}, [](detail::Node& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    const Matrix diff = 2.0 * self.grad(0, 0) * (pa.value - pb.value);
    pa.accumulate(diff);
    pb.accumulate(-diff);
  });
}

Tensor cross_entropy_loss(const Tensor& probs, std::span<const std::size_t> targets) {
  constexpr Scalar kFloor = 1e-12;
  const Eigen::Index n = probs.rows();
  if (n == 0 || static_cast<std::size_t>(n) != targets.size()) {
    throw ShapeError("cross_entropy_loss: " + std::to_string(targets.size()) + " targets for " + shape_of(probs));
  }
  Scalar total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto t = targets[static_cast<std::size_t>(i)];
    if (t >= static_cast<std::size_t>(probs.cols())) {
      throw std::out_of_range("cross_entropy_loss: target index " + std::to_string(t) + " out of range");
    }
    Scalar p = probs.value()(i, static_cast<Eigen::Index>(t));
    if (p < kFloor) {
      warn("cross_entropy_loss: target probability below 1e-12 clamped");
      p = kFloor;
    }
    total -= std::log(p);
  }
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<Scalar>(n);
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return Tensor::from_op(std::move(out), {probs}, [tgt = std::move(tgt)](detail::Node& self) {
    auto& pp = parent(self, 0);
    const Scalar n = static_cast<Scalar>(tgt.size());
    Matrix g = Matrix::Zero(pp.value.rows(), pp.value.cols());
    for (std::size_t i = 0; i < tgt.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const auto c = static_cast<Eigen::Index>(tgt[i]);
      const Scalar p = pp.value(r, c);
      if (p >= kFloor) g(r, c) = -self.grad(0, 0) / (n * p);
    }
    pp.accumulate(g);
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add_row(matmul(x, weight), bias);
}

AttentionResult cross_attention(const Tensor& q_src, const Tensor& kv_src, const AttentionWeights& w,
                                AttentionOptions opts) {
  if (kv_src.rows() == 0) throw ShapeError("cross_attention: no keys");
  const Tensor q = matmul(q_src, w.query);
  const Tensor k = matmul(kv_src, w.key);
  const Tensor v = matmul(kv_src, w.value);
  Tensor logits = matmul_nt(q, k);
  if (opts.scaled) logits = scale(logits, 1.0 / std::sqrt(static_cast<Scalar>(k.cols())));
  Tensor weights = softmax_rows(logits, opts.causal);
  return {matmul(weights, v), weights};
}

Tensor mlp(const Tensor& x, const MlpWeights& w) { return linear(tanh(linear(x, w.in)), w.out); }

}  // namespace mds
