#pragma once

// Shared test helpers: seeded random tensors, a central finite-difference
// gradient checker and naive reference implementations used as oracles.
// Nothing here calls into the code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mds/params.hpp"
#include "mds/tensor.hpp"

namespace mds::testing {

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-scale, scale);
  return m;
}

inline Tensor random_leaf(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  return Tensor(random_matrix(rng, rows, cols, scale), true);
}

/// Max over leaves of ||analytic - numeric||_inf / max(||analytic||_inf,
/// ||numeric||_inf), numeric from central differences with step h.
inline double gradient_error(const std::function<Tensor()>& f, std::vector<Tensor> leaves, double h = 1e-5) {
  for (auto& l : leaves) l.zero_grad();
  backward(f());
  double worst = 0.0;
  for (auto& leaf : leaves) {
    const Matrix analytic = leaf.grad();
    Matrix numeric(leaf.rows(), leaf.cols());
    for (Eigen::Index i = 0; i < leaf.rows(); ++i) {
      for (Eigen::Index j = 0; j < leaf.cols(); ++j) {
        const double saved = leaf.value()(i, j);
        leaf.mutable_value()(i, j) = saved + h;
        const double up = f().item();
        leaf.mutable_value()(i, j) = saved - h;
        const double down = f().item();
        leaf.mutable_value()(i, j) = saved;
        numeric(i, j) = (up - down) / (2 * h);
      }
    }
    const double scale = std::max({analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff(), 1e-12});
    worst = std::max(worst, (analytic - numeric).cwiseAbs().maxCoeff() / scale);
    leaf.zero_grad();
  }
  return worst;
}

/// Contracts a matrix-valued output with fixed random weights so every entry
/// influences the scalar being differentiated.
inline Tensor contract(const Tensor& out, const Matrix& weights) {
  return sum(hadamard(out, Tensor(weights)));
}

namespace naive {

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      for (Eigen::Index k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

inline Matrix add_bias(Matrix x, const Matrix& b) {
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) += b(0, j);
  return x;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// Direct exp / sum without max subtraction; fine for moderate inputs.
inline Matrix softmax(const Matrix& x, bool causal = false) {
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double total = 0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (causal && j > i) continue;
      total += std::exp(x(i, j));
    }
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (causal && j > i) continue;
      out(i, j) = std::exp(x(i, j)) / total;
    }
  }
  return out;
}

inline Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias) {
  Matrix out(x.rows(), x.cols());
  const double d = static_cast<double>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mean = 0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) mean += x(i, j) / d;
    double var = 0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) var += (x(i, j) - mean) * (x(i, j) - mean) / d;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      out(i, j) = (x(i, j) - mean) / std::sqrt(var + 1e-5) * gain(0, j) + bias(0, j);
  }
  return out;
}

inline Matrix tanh(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) out.data()[i] = std::tanh(x.data()[i]);
  return out;
}

inline Matrix attention(const Matrix& q_src, const Matrix& kv_src, const Matrix& wq, const Matrix& wk,
                        const Matrix& wv, bool causal = false) {
  const Matrix q = matmul(q_src, wq);
  const Matrix k = matmul(kv_src, wk);
  const Matrix v = matmul(kv_src, wv);
  return matmul(softmax(matmul(q, transpose(k)), causal), v);
}

inline Matrix mlp(const Matrix& x, const Matrix& w1, const Matrix& b1, const Matrix& w2, const Matrix& b2) {
  return add_bias(matmul(tanh(add_bias(matmul(x, w1), b1)), w2), b2);
}

inline Matrix add(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  return out;
}

}  // namespace naive

}  // namespace mds::testing
