#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace mds {

using Scalar = double;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

inline constexpr Scalar kLayerNormEps = 1e-5;

/// Row-wise softmax with max subtraction. When `causal` is set, entry (i, j)
/// with j > i is excluded (probability exactly 0).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
softmax_rows_kernel(const Eigen::MatrixBase<Derived>& x, bool causal = false) {
  using S = typename Derived::Scalar;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::Index width = causal ? std::min<Eigen::Index>(i + 1, x.cols()) : x.cols();
    const S peak = x.row(i).head(width).maxCoeff();
    S total = 0;
    for (Eigen::Index j = 0; j < width; ++j) {
      out(i, j) = std::exp(x(i, j) - peak);
      total += out(i, j);
    }
    for (Eigen::Index j = 0; j < width; ++j) out(i, j) /= total;
    for (Eigen::Index j = width; j < x.cols(); ++j) out(i, j) = 0;
  }
  return out;
}

/// Per-row standardization (population variance + eps), then gain and bias.
template <typename Derived, typename GainDerived, typename BiasDerived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
layer_norm_kernel(const Eigen::MatrixBase<Derived>& x, const Eigen::MatrixBase<GainDerived>& gain,
                  const Eigen::MatrixBase<BiasDerived>& bias, typename Derived::Scalar eps = kLayerNormEps) {
  using S = typename Derived::Scalar;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const S mean = x.row(i).mean();
    const auto centered = (x.row(i).array() - mean).eval();
    const S var = centered.square().mean();
    out.row(i) = (centered / std::sqrt(var + eps)).matrix().cwiseProduct(gain.row(0)) + bias.row(0);
  }
  return out;
}

}  // namespace mds
