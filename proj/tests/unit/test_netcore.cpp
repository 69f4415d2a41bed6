#include <doctest.h>

#include <cmath>
#include <numeric>

#include "test_support.hpp"

using namespace tsr;
using namespace tsr::testing;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

bool gradient_matches(const BlockVector& g, const BlockVector& fd) {
  const Vector a = g.flatten();
  const Vector b = fd.flatten();
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    if (std::abs(a[k] - b[k]) > std::max(1e-6 * std::abs(b[k]), 1e-9)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("block vector flatten is layer-major, row-major") {
  BlockVector v({Matrix{{1, 2, 3}, {4, 5, 6}}, Matrix{{7, 8, 9}}});
  const Vector f = v.flatten();
  for (Eigen::Index i = 0; i < 9; ++i) CHECK(f[i] == static_cast<double>(i + 1));
  const BlockVector back = BlockVector::unflatten(v, f);
  CHECK(back.block(0) == v.block(0));
  CHECK(back.block(1) == v.block(1));
  CHECK_THROWS_AS(v.dot(BlockVector({Matrix::Zero(2, 3)})), ContractError);
}

TEST_CASE("block vector arithmetic agrees with its flat form") {
  const NetParams p = random_net(chain({4, 3, 2}), 1);
  const BlockVector a = random_like(p.weights(), 2);
  const BlockVector b = random_like(p.weights(), 3);
  CHECK(a.dot(b) == doctest::Approx(a.flatten().dot(b.flatten())).epsilon(1e-14));
  CHECK((a + 2.0 * b).flatten().isApprox(a.flatten() + 2.0 * b.flatten(), 1e-15));
  CHECK(a.norm() == doctest::Approx(a.flatten().norm()).epsilon(1e-14));
}

TEST_CASE("layer chain validation") {
  CHECK_THROWS_AS(validate_layer_chain(std::vector<LayerSpec>{{3, 4}, {5, 2}}), ConfigError);
  CHECK_THROWS_AS(validate_layer_chain(std::vector<LayerSpec>{{0, 4}}), ConfigError);
  CHECK_NOTHROW(validate_layer_chain(chain({3, 4, 2})));
  CHECK_THROWS_AS(NetParams::zeros(std::vector<LayerSpec>{{3, 4}, {5, 2}}), ConfigError);
  CHECK_THROWS_AS(NetParams(BlockVector({Matrix::Zero(2, 4)})), ConfigError);
}

TEST_CASE("zero weights give uniform softmax and loss ln C") {
  for (int classes : {2, 3, 10}) {
    const NetParams p = NetParams::zeros(chain({5, 4, static_cast<std::size_t>(classes)}));
    const Batch b = random_batch(7, 5, classes, 11);
    const ForwardTrace tr = forward(p, b, LossConfig{1e-4, false});
    CHECK(tr.reg_loss == 0.0);
    CHECK(std::abs(tr.loss - std::log(static_cast<double>(classes))) <= 4e-16 * tr.loss);
    CHECK(tr.softmax.isConstant(1.0 / classes, 1e-15));
    CHECK(loss_only(p, b, LossConfig{}) == tr.loss);
  }
}

TEST_CASE("logit margin of 30 drives the data loss to zero") {
  NetParams p = NetParams::zeros(chain({2, 2, 3}));
  p.weights().block(1)(1, 2) = 30.0;  // bias of class 1
  Batch b;
  b.inputs = Matrix{{0.3, -0.2}};
  b.targets = {1};
  const double loss = forward(p, b, LossConfig{0.0, false}).loss;
  CHECK(loss >= 0.0);
  CHECK(loss <= 1e-9);
}

TEST_CASE("forward matches the straight-line reimplementation") {
  const NetParams p = random_net(chain({4, 3, 2}), 5);
  const Batch b = random_batch(5, 4, 2, 6);
  for (bool reg_bias : {false, true}) {
    const LossConfig cfg{1e-4, reg_bias};
    CHECK(rel_err(forward(p, b, cfg).loss, reference_loss(p, b, 1e-4, reg_bias)) <= 1e-12);
  }
  const NetParams deep = random_net(chain({6, 5, 4, 4, 3}), 8);
  const Batch bd = random_batch(9, 6, 3, 9);
  CHECK(rel_err(forward(deep, bd, LossConfig{}).loss, reference_loss(deep, bd, 1e-4, false)) <= 1e-12);
}

TEST_CASE("softmax rows of the trace sum to one") {
  const NetParams p = random_net(chain({6, 8, 5}), 12, 2.0);
  const Batch b = random_batch(20, 6, 5, 13);
  const ForwardTrace tr = forward(p, b, LossConfig{});
  for (Eigen::Index j = 0; j < tr.softmax.cols(); ++j) {
    CHECK(std::abs(tr.softmax.col(j).sum() - 1.0) <= 1e-12);
  }
  CHECK(tr.pre.size() == 2);
  CHECK(tr.post.size() == 1);
}

TEST_CASE("loss decomposes into data and regularizer terms") {
  const NetParams p = random_net(chain({5, 4, 3}), 21);
  const Batch b = random_batch(6, 5, 3, 22);
  for (bool reg_bias : {false, true}) {
    const double c = 3e-3;
    const double with = forward(p, b, LossConfig{c, reg_bias}).loss;
    const double without = forward(p, b, LossConfig{0.0, reg_bias}).loss;
    const double expected = c * regularized_squared_norm(p, LossConfig{c, reg_bias});
    CHECK(std::abs((with - without) - expected) <= 1e-15 * std::abs(with));
  }
}

TEST_CASE("backward matches central finite differences") {
  const NetParams p = random_net(chain({5, 4, 3}), 31);
  const Batch b = random_batch(8, 5, 3, 32);
  const LossConfig cfg{1e-4, false};
  const BlockVector g = backward(p, forward(p, b, cfg), b, cfg);
  CHECK(gradient_matches(g, fd_gradient(p, b, 1e-4, false)));
}

TEST_CASE("gradient check on random nets up to four layers") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    std::uniform_int_distribution<std::size_t> layers(2, 4);
    std::uniform_int_distribution<std::size_t> width(1, 20);
    std::uniform_int_distribution<int> classes(2, 6);
    const std::size_t num_layers = layers(rng);
    std::vector<LayerSpec> specs;
    std::size_t in = width(rng);
    const int c = classes(rng);
    for (std::size_t l = 0; l < num_layers; ++l) {
      const std::size_t out = (l + 1 == num_layers) ? static_cast<std::size_t>(c) : width(rng);
      specs.push_back({in, out});
      in = out;
    }
    const NetParams p = random_net(specs, rng());
    const Batch b = random_batch(1 + rng() % 10, specs[0].in_dim, c, rng());
    const bool reg_bias = trial % 2 == 1;
    const LossConfig cfg{1e-4, reg_bias};
    const BlockVector g = loss_and_gradient(p, b, cfg).gradient;
    INFO("trial " << trial);
    CHECK(gradient_matches(g, fd_gradient(p, b, 1e-4, reg_bias)));
  }
}

TEST_CASE("regularizer adds exactly 2 c w on regularized coordinates") {
  const NetParams p = random_net(chain({4, 3, 2}), 41);
  const Batch b = random_batch(5, 4, 2, 42);
  const BlockVector g0 = loss_and_gradient(p, b, LossConfig{0.0, false}).gradient;
  const BlockVector g1 = loss_and_gradient(p, b, LossConfig{1e-4, false}).gradient;
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    const Matrix diff = g1.block(l) - g0.block(l);
    const Matrix& w = p.layer(l);
    const Eigen::Index in = w.cols() - 1;
    CHECK((diff.leftCols(in) - 2e-4 * w.leftCols(in)).cwiseAbs().maxCoeff() <= 1e-16);
    CHECK(diff.col(in).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("saturated correct softmax gives an exactly zero output delta") {
  NetParams p = NetParams::zeros(chain({3, 2, 3}));
  p.weights().block(1)(2, 2) = 800.0;
  Batch b = random_batch(4, 3, 1, 51);
  for (int& t : b.targets) t = 2;
  const ForwardTrace tr = forward(p, b, LossConfig{0.0, false});
  const BackwardTrace bt = backpropagate(p, tr, b);
  CHECK(bt.delta_pre.back().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("loss_only is bit-identical to forward and Taylor-consistent with backward") {
  const NetParams p = random_net(chain({5, 6, 4, 3}), 61);
  const Batch b = random_batch(9, 5, 3, 62);
  const LossConfig cfg{1e-4, true};
  CHECK(loss_only(p, b, cfg) == forward(p, b, cfg).loss);

  const BlockVector g = loss_and_gradient(p, b, cfg).gradient;
  const Vector w0 = p.weights().flatten();
  const Vector gf = g.flatten();
  const double eps = 1e-5;
  for (Eigen::Index i = 0; i < w0.size(); i += 3) {
    Vector wp = w0;
    wp[i] += eps;
    const double df = loss_only(NetParams(BlockVector::unflatten(p.weights(), wp)), b, cfg) -
                      loss_only(p, b, cfg);
    if (std::abs(gf[i]) < 1e-4) continue;  // first-order term too small to resolve
    CHECK(std::abs(df / eps - gf[i]) <= 1e-4 * std::abs(gf[i]) + 1e-6);
  }
}

TEST_CASE("numeric overflow reports the layer") {
  NetParams p = random_net(chain({3, 3, 2}), 71);
  p.weights().block(0)(0, 0) = 1e308;
  Batch b = random_batch(2, 3, 2, 72);
  b.inputs.setConstant(10.0);
  try {
    (void)forward(p, b, LossConfig{});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    REQUIRE(e.layer().has_value());
    CHECK(*e.layer() == 0);
  }
}

TEST_CASE("shape contract errors") {
  const NetParams p = random_net(chain({3, 3, 2}), 81);
  Batch bad = random_batch(4, 5, 2, 82);
  CHECK_THROWS_AS(forward(p, bad, LossConfig{}), ContractError);
  Batch b = random_batch(4, 3, 2, 83);
  b.targets[0] = 7;
  CHECK_THROWS_AS(loss_only(p, b, LossConfig{}), ContractError);
  const Batch ok = random_batch(4, 3, 2, 84);
  const ForwardTrace tr = forward(p, ok, LossConfig{});
  CHECK_THROWS_AS(backward(p, tr, random_batch(5, 3, 2, 85), LossConfig{}), ContractError);
}

TEST_CASE("init_sparse counts, zero biases, determinism") {
  const auto specs = chain({2, 3, 2});
  const NetParams a = init_sparse(specs, 99, 1, 1.0);
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    const Matrix& w = a.layer(l);
    const Eigen::Index in = w.cols() - 1;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      CHECK((w.row(i).head(in).array() != 0.0).count() == 1);
    }
    CHECK(w.col(in).isZero(0.0));
  }
  const NetParams b = init_sparse(specs, 99, 1, 1.0);
  CHECK(a.weights().flatten() == b.weights().flatten());
  CHECK_THROWS_AS(init_sparse(specs, 1, 4, 1.0), ConfigError);

  // nnz larger than a layer's fan-in clamps to that fan-in
  const NetParams c = init_sparse(chain({6, 3, 2}), 5, 4, 1.0);
  const Matrix& out = c.layer(1);
  for (Eigen::Index i = 0; i < out.rows(); ++i) CHECK((out.row(i).head(3).array() != 0.0).count() == 3);
}

TEST_CASE("init_sparse on 784-50-10 has per-row count 15 and unit spread") {
  const auto specs = chain({784, 50, 10});
  double sum_sq = 0.0;
  std::size_t count = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const NetParams p = init_sparse(specs, seed, 15, 1.0);
    for (std::size_t l = 0; l < p.num_layers(); ++l) {
      const Matrix& w = p.layer(l);
      const Eigen::Index in = w.cols() - 1;
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        REQUIRE((w.row(i).head(in).array() != 0.0).count() == 15);
      }
      sum_sq += w.squaredNorm();
      count += static_cast<std::size_t>((w.array() != 0.0).count());
    }
  }
  const double sd = std::sqrt(sum_sq / static_cast<double>(count));
  CHECK(sd >= 0.9);
  CHECK(sd <= 1.1);
}

TEST_CASE("accuracy counts argmax hits") {
  NetParams p = NetParams::zeros(chain({2, 2, 2}));
  p.weights().block(1)(0, 2) = 5.0;  // always predicts class 0
  Batch b = random_batch(4, 2, 2, 3);
  CHECK(accuracy(p, b) == doctest::Approx(0.5));
}
