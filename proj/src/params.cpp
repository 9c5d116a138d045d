#include "mds/params.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>

#include <json.hpp>

#include "mds/error.hpp"

namespace mds {

using json = nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  for (auto& s : s_) s = splitmix64(seed);
}

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) return 0;
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

Tensor ParameterStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng& rng,
                              double range) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-range, range);
  }
  if (index_.count(name)) throw std::logic_error("parameter '" + name + "' registered twice");
  Tensor t(std::move(m), true);
  names_.push_back(name);
  index_.emplace(name, t);
  return t;
}

Tensor ParameterStore::create_constant(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                                       double value) {
  if (index_.count(name)) throw std::logic_error("parameter '" + name + "' registered twice");
  Tensor t(Matrix::Constant(rows, cols, value), true);
  names_.push_back(name);
  index_.emplace(name, t);
  return t;
}

const Tensor& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : index_) n += static_cast<std::size_t>(t.value().size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, t] : index_) t.zero_grad();
}

Tensor ParameterStore::squared_norm() const {
  std::vector<Tensor> terms;
  terms.reserve(names_.size());
  for (const auto& name : names_) terms.push_back(sum_squares(index_.at(name)));
  return sum(concat_rows(terms));
}

void ParameterStore::save(std::ostream& out) const {
  json doc = json::object();
  for (const auto& name : names_) {
    const Matrix& m = index_.at(name).value();
    doc[name] = {{"shape", {m.rows(), m.cols()}},
                 {"data", std::vector<double>(m.data(), m.data() + m.size())}};
  }
  out << doc.dump() << '\n';
}

void ParameterStore::load(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& err) {
    throw InputError(std::string("malformed checkpoint: ") + err.what());
  }
  for (const auto& name : names_) {
    if (!doc.contains(name)) throw InputError("checkpoint lacks parameter '" + name + "'");
    const auto& entry = doc[name];
    const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
    const auto data = entry.at("data").get<std::vector<double>>();
    Tensor& t = index_.at(name);
    if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols() ||
        data.size() != static_cast<std::size_t>(t.value().size())) {
      throw InputError("checkpoint parameter '" + name + "' has the wrong shape");
    }
    std::memcpy(t.mutable_value().data(), data.data(), data.size() * sizeof(double));
  }
}

bool ParameterStore::identical_to(const ParameterStore& other) const {
  if (names_ != other.names_) return false;
  for (const auto& name : names_) {
    const Matrix& a = index_.at(name).value();
    const Matrix& b = other.index_.at(name).value();
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    if (std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) != 0) return false;
  }
  return true;
}

LinearWeights make_linear(ParameterStore& store, const std::string& prefix, Eigen::Index in, Eigen::Index out,
                          Rng& rng, double range) {
  return {store.create(prefix + ".weight", in, out, rng, range), store.create_constant(prefix + ".bias", 1, out, 0.0)};
}

AttentionWeights make_attention(ParameterStore& store, const std::string& prefix, Eigen::Index dim, Rng& rng,
                                double range) {
  return {store.create(prefix + ".query", dim, dim, rng, range), store.create(prefix + ".key", dim, dim, rng, range),
          store.create(prefix + ".value", dim, dim, rng, range)};
}

MlpWeights make_mlp(ParameterStore& store, const std::string& prefix, Eigen::Index dim, Eigen::Index hidden,
                    Rng& rng, double range) {
  return {make_linear(store, prefix + ".in", dim, hidden, rng, range),
          make_linear(store, prefix + ".out", hidden, dim, rng, range)};
}

LayerNormWeights make_layer_norm(ParameterStore& store, const std::string& prefix, Eigen::Index dim) {
  return {store.create_constant(prefix + ".gain", 1, dim, 1.0), store.create_constant(prefix + ".bias", 1, dim, 0.0)};
}

Adam::Adam(const ParameterStore& params, AdamConfig cfg) : cfg_(cfg) {
  for (const auto& name : params.names()) {
    const auto& t = params.at(name);
    m_.emplace(name, Matrix::Zero(t.rows(), t.cols()));
    v_.emplace(name, Matrix::Zero(t.rows(), t.cols()));
  }
}

void Adam::step(ParameterStore& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  double clip = 1.0;
  if (cfg_.max_grad_norm > 0.0) {
    double sq = 0.0;
    for (const auto& name : params.names()) {
      const Tensor& t = params.at(name);
      if (t.has_grad()) sq += t.grad().squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg_.max_grad_norm) clip = cfg_.max_grad_norm / norm;
  }
  for (const auto& name : params.names()) {
    Tensor t = params.at(name);
    if (!t.has_grad()) continue;
    const Matrix g = clip * t.grad();
    Matrix& m = m_.at(name);
    Matrix& v = v_.at(name);
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    t.mutable_value().array() -=
        cfg_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.epsilon);
  }
  params.zero_grad();
}

}  // namespace mds
