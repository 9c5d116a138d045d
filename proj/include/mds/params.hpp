#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mds/tensor.hpp"

namespace mds {

/// splitmix64-seeded xoshiro256** generator. Output is identical on every
/// platform, unlike the std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller).
  double normal();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

 private:
  std::uint64_t s_[4];
};

/// Named trainable tensors in registration order.
class ParameterStore {
 public:
  /// Uniform(-range, range) initialized parameter.
  Tensor create(const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng& rng, double range);
  Tensor create_constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value);

  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  /// Sum of squared entries of every parameter, as a graph node.
  Tensor squared_norm() const;

  /// {name: {"shape": [r, c], "data": [...]}}, shortest round-trip decimals.
  void save(std::ostream& out) const;
  /// Overwrites values of existing parameters; throws InputError on a
  /// missing name or a shape mismatch.
  void load(std::istream& in);

  /// True when every parameter has bitwise-identical values in `other`.
  bool identical_to(const ParameterStore& other) const;

 private:
  std::vector<std::string> names_;
  std::map<std::string, Tensor> index_;
};

// Layer builders: register parameters under `prefix.*` and return handles.
// Weights draw from Uniform(-range, range); biases start at zero and layer
// norm gains at one.
LinearWeights make_linear(ParameterStore& store, const std::string& prefix, Eigen::Index in, Eigen::Index out,
                          Rng& rng, double range);
AttentionWeights make_attention(ParameterStore& store, const std::string& prefix, Eigen::Index dim, Rng& rng,
                                double range);
MlpWeights make_mlp(ParameterStore& store, const std::string& prefix, Eigen::Index dim, Eigen::Index hidden,
                    Rng& rng, double range);
LayerNormWeights make_layer_norm(ParameterStore& store, const std::string& prefix, Eigen::Index dim);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Rescale the joint gradient to this L2 norm when larger; 0 disables.
  double max_grad_norm = 0.0;
};

class Adam {
 public:
  Adam(const ParameterStore& params, AdamConfig cfg);
  /// Applies one update from the accumulated gradients, then clears them.
  void step(ParameterStore& params);
  long steps() const { return t_; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

 private:
  AdamConfig cfg_;
  std::map<std::string, Matrix> m_;
  std::map<std::string, Matrix> v_;
  long t_ = 0;
};

}  // namespace mds
