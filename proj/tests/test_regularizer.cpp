#include <doctest.h>

#include "mds/error.hpp"
#include "mds/regularizer.hpp"
#include "support.hpp"

using namespace mds;
using namespace mds::testing;

namespace {

ModelConfig tiny(int enc_layers = 1) {
  ModelConfig cfg;
  cfg.d_model = 5;
  cfg.mlp_hidden = 6;
  cfg.latent_queries = 3;
  cfg.encoder_layers = enc_layers;
  cfg.max_positions = 16;
  cfg.init_range = 0.5;
  return cfg;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("project_semantic examples and oracle") {
  Rng rng(1);
  ParameterStore store;
  auto reg = SemanticRegularizer::make(store, tiny(), rng);
  const auto& p = reg.composed;
  const Matrix latent = reg.latent.value();

  const Matrix rep = random_matrix(rng, 4, 5);
  const Matrix read = naive::attention(latent, rep, p.attention.query.value(), p.attention.key.value(),
                                       p.attention.value.value());
  const Matrix oracle = naive::add(read, naive::mlp(read, p.mlp.in.weight.value(), p.mlp.in.bias.value(),
                                                    p.mlp.out.weight.value(), p.mlp.out.bias.value()));
  CHECK(max_abs_diff(reg.project_composed(Tensor(rep)).value(), oracle) < 1e-12);

  const Matrix one = random_matrix(rng, 1, 5);
  const Matrix value_row = naive::matmul(one, p.attention.value.value());
  auto single = cross_attention(reg.latent, Tensor(one), p.attention).output.value();
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(max_abs_diff(single.row(i), value_row) < 1e-15);

  Tensor(store.at("semantic.composed.mlp.out.weight")).mutable_value().setZero();
  CHECK(max_abs_diff(reg.project_composed(Tensor(rep)).value(), read) < 1e-12);

  CHECK_THROWS_AS(reg.project_composed(Tensor(Matrix(0, 5))), ShapeError);
}

TEST_CASE("semantic projections equalize shapes") {
  Rng rng(2);
  ParameterStore store;
  auto reg = SemanticRegularizer::make(store, tiny(), rng);
  for (Eigen::Index n : {1, 4, 17}) {
    auto c = reg.project_composed(Tensor(random_matrix(rng, n, 5)));
    auto t = reg.project_truth(Tensor(random_matrix(rng, n + 3, 5)));
    CHECK(c.rows() == 3);
    CHECK(t.rows() == 3);
    CHECK(c.cols() == 5);
    CHECK(t.cols() == 5);
  }
  // The two sides use separate weights but the same latent queries.
  CHECK(reg.composed.attention.query.node() != reg.truth.attention.query.node());
}

TEST_CASE("encode_ground_truth") {
  Rng rng(3);
  {
    ParameterStore store;
    auto table = EmbeddingTable::make(store, 10, tiny(0), rng);
    auto enc = Encoder::make(store, tiny(0), rng);
    std::vector<std::size_t> ids{4, 5, 6};
    CHECK(encode_ground_truth(ids, table, enc).value() == embed_ids(ids, table).value());
  }
  ParameterStore store;
  auto table = EmbeddingTable::make(store, 10, tiny(2), rng);
  auto enc = Encoder::make(store, tiny(2), rng);
  std::vector<std::size_t> one{7};
  std::vector<std::size_t> nine{4, 5, 6, 7, 8, 9, 4, 5, 6};
  CHECK(encode_ground_truth(one, table, enc).rows() == 1);
  CHECK(encode_ground_truth(nine, table, enc).rows() == 9);
  CHECK(encode_ground_truth(nine, table, enc).value() == enc.encode(embed_ids(nine, table)).value());
  CHECK_THROWS_AS(encode_ground_truth(std::vector<std::size_t>{}, table, enc), InputError);
}

TEST_CASE("regularization loss") {
  Rng rng(4);
  const Matrix a = random_matrix(rng, 2, 3);
  CHECK(regularization_loss(Tensor(a), Tensor(a)).item() == 0.0);
  CHECK(regularization_loss(Tensor(Matrix(a.array() + 1.0)), Tensor(a)).item() == doctest::Approx(6.0).epsilon(1e-14));
  CHECK_THROWS_AS(regularization_loss(Tensor(a), Tensor(Matrix::Zero(3, 2))), ShapeError);

  for (int i = 0; i < 20; ++i) {
    const Matrix x = random_matrix(rng, 3, 4), y = random_matrix(rng, 3, 4);
    CHECK(regularization_loss(Tensor(x), Tensor(y)).item() > 0.0);
  }

  Tensor tr(random_matrix(rng, 3, 4), true), tc(random_matrix(rng, 3, 4), true);
  backward(regularization_loss(tr, tc));
  CHECK(max_abs_diff(tc.grad(), 2 * (tc.value() - tr.value())) < 1e-14);
  CHECK(max_abs_diff(tr.grad(), 2 * (tr.value() - tc.value())) < 1e-14);
  CHECK(gradient_error([&] { return regularization_loss(tr, tc); }, {tr, tc}) < 1e-4);
}

TEST_CASE("regularization gradient reaches the latent queries") {
  Rng rng(5);
  ParameterStore store;
  auto reg = SemanticRegularizer::make(store, tiny(), rng);
  Tensor composed(random_matrix(rng, 6, 5), true), truth(random_matrix(rng, 4, 5), true);
  backward(regularization_loss(reg.project_truth(truth), reg.project_composed(composed)));
  CHECK(reg.latent.grad().norm() > 0.0);
  CHECK(composed.grad().norm() > 0.0);
  CHECK(truth.grad().norm() > 0.0);
  CHECK(reg.truth.mlp.in.weight.grad().norm() > 0.0);
}
