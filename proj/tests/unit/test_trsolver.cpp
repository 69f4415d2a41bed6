#include <doctest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"

using namespace tsr;
using namespace tsr::testing;

namespace {

EigenDecomp diag_model(std::initializer_list<double> values, std::initializer_list<double> r) {
  const Vector v = Eigen::Map<const Vector>(values.begin(), static_cast<Eigen::Index>(values.size()));
  const Vector rv = Eigen::Map<const Vector>(r.begin(), static_cast<Eigen::Index>(r.size()));
  return decompose(QuadModel(v.asDiagonal(), rv));
}

double q_of(const EigenDecomp& eig, const Vector& alpha) {
  const Matrix b = eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
  return -eig.r.dot(alpha) + 0.5 * alpha.dot(b * alpha);
}

}  // namespace

TEST_CASE("eigh_small on a 2x2 symmetric pair") {
  const SymmetricEigen e = eigh_small(Matrix{{2, 1}, {1, 2}});
  CHECK(e.values[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(e.values[1] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(std::abs(e.vectors(0, 0) + e.vectors(1, 0)) <= 1e-15);
  CHECK(std::abs(e.vectors(0, 1) - e.vectors(1, 1)) <= 1e-15);
  CHECK(std::abs(std::abs(e.vectors(0, 0)) - std::sqrt(0.5)) <= 1e-15);
}

TEST_CASE("eigh_small on a diagonal matrix permutes the identity") {
  Vector d(4);
  d << 3.0, -1.0, 7.0, 0.5;
  const SymmetricEigen e = eigh_small(d.asDiagonal());
  CHECK(e.values == Vector{{-1.0, 0.5, 3.0, 7.0}});
  const int expected[] = {1, 3, 0, 2};
  for (int k = 0; k < 4; ++k) {
    CHECK(e.vectors.col(k) == Matrix::Identity(4, 4).col(expected[k]));
  }
}

TEST_CASE("eigh_small reconstructs random symmetric matrices") {
  std::mt19937_64 rng(7);
  for (Eigen::Index n : {1, 3, 16, 40, 64}) {
    const Matrix b = random_symmetric(n, rng);
    const SymmetricEigen e = eigh_small(b);
    const Matrix rec = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    CHECK((rec - b).norm() <= 1e-10 * b.norm());
    CHECK((e.vectors.transpose() * e.vectors - Matrix::Identity(n, n)).norm() <= 1e-12 * n);
    for (Eigen::Index i = 1; i < n; ++i) CHECK(e.values[i - 1] <= e.values[i]);
  }
}

TEST_CASE("eigh_small contract errors") {
  CHECK_THROWS_AS(eigh_small(Matrix{{1, 2}, {0, 1}}), ContractError);
  CHECK_THROWS_AS(eigh_small(Matrix::Zero(2, 3)), ContractError);
  CHECK_THROWS_AS(eigh_small(Matrix::Identity(65, 65)), ContractError);
  CHECK(eigh_small(Matrix::Zero(3, 3)).values.isZero(0.0));
}

TEST_CASE("secular Newton matches bisection on the {1, 2} instance") {
  const EigenDecomp eig = diag_model({1.0, 2.0}, {1.0, 1.0});
  std::vector<double> it;
  const double lambda = newton_secular(eig, {0, 1}, 0.5, -1.0, 0.0, &it);
  const double oracle = bisect_secular({1.0, 2.0}, {1.0, 1.0}, 0.5, 0.0, 10.0);
  CHECK(std::abs(lambda - oracle) <= 1e-9);
  CHECK(std::abs(lambda - 1.452) <= 2e-3);
  for (std::size_t k = 1; k < it.size(); ++k) CHECK(it[k] > it[k - 1]);
  CHECK(it.size() <= 201);
}

TEST_CASE("single direction secular root is closed form") {
  const EigenDecomp eig = diag_model({1.0}, {1.0});
  CHECK(std::abs(newton_secular(eig, {0}, 0.5, -1.0) - 1.0) <= 1e-10);
}

TEST_CASE("secular root is invariant under r -> c r, eps -> c eps") {
  std::mt19937_64 rng(17);
  const EigenDecomp base = diag_model({0.5, 1.5, 4.0}, {0.3, -1.2, 2.0});
  const double l0 = newton_secular(base, {0, 1, 2}, 0.2, -0.5);
  for (double c : {0.01, 3.0, 250.0}) {
    const EigenDecomp scaled = base.with_gradient(c * base.r);
    const double l1 = newton_secular(scaled, {0, 1, 2}, 0.2 * c, -0.5);
    CHECK(std::abs(l1 - l0) <= 1e-9 * std::max(1.0, l0));
  }
}

TEST_CASE("secular Newton refuses an interior start") {
  const EigenDecomp eig = diag_model({1.0, 2.0}, {0.1, 0.1});
  CHECK_THROWS_AS(newton_secular(eig, {0, 1}, 10.0, -1.0), ContractError);
}

TEST_CASE("positive subspace ignores negative curvature") {
  const EigenDecomp eig = diag_model({-1.0, 2.0}, {5.0, 2.0});
  const TRSolution s = solve_positive_subspace(eig, 10.0);
  CHECK(s.interior);
  CHECK(s.lambda == 0.0);
  CHECK((s.alpha - Vector{{0.0, 1.0}}).norm() <= 1e-15);
  CHECK(positive_newton_norm(eig) == doctest::Approx(1.0));
}

TEST_CASE("positive subspace boundary solution") {
  const EigenDecomp eig = diag_model({1.0, 2.0}, {1.0, 1.0});
  const TRSolution s = solve_positive_subspace(eig, 0.5);
  CHECK_FALSE(s.interior);
  CHECK(std::abs(s.alpha.norm() - 0.5) <= 1e-9);
  CHECK(std::abs(s.lambda - bisect_secular({1.0, 2.0}, {1.0, 1.0}, 0.5, 0.0, 10.0)) <= 1e-9);
  CHECK(s.q_value == doctest::Approx(q_of(eig, s.alpha)).epsilon(1e-12));
}

TEST_CASE("positive subspace with a vanishing reduced gradient") {
  const EigenDecomp eig = diag_model({-3.0, 1.0, 2.0}, {4.0, 0.0, 0.0});
  const TRSolution s = solve_positive_subspace(eig, 1.0);
  CHECK(s.alpha.isZero(0.0));
  CHECK(s.q_value == 0.0);
  CHECK_THROWS_AS(solve_positive_subspace(diag_model({-1.0, -2.0}, {1.0, 1.0}), 1.0), ContractError);
}

TEST_CASE("full solve on the identity") {
  const EigenDecomp eig = diag_model({1.0, 1.0}, {2.0, 0.0});
  const TRSolution in = solve_full(eig, 10.0);
  CHECK(in.interior);
  CHECK(in.lambda == 0.0);
  CHECK((in.alpha - Vector{{2.0, 0.0}}).norm() <= 1e-15);
  const TRSolution bd = solve_full(eig, 1.0);
  CHECK_FALSE(bd.interior);
  CHECK(std::abs(bd.lambda - 1.0) <= 1e-9);
  CHECK((bd.alpha - Vector{{1.0, 0.0}}).norm() <= 1e-9);
}

TEST_CASE("hard case matches the grid oracle") {
  const Matrix b{{-1.0, 0.0}, {0.0, 2.0}};
  const Vector r{{0.0, 1.0}};
  const EigenDecomp eig = decompose(QuadModel(b, r));
  const TRSolution s = solve_full(eig, 1.0);
  CHECK(std::abs(s.alpha.norm() - 1.0) <= 1e-8);
  CHECK(std::abs(s.alpha[1] - 1.0 / 3.0) <= 1e-6);
  CHECK(std::abs(std::abs(s.alpha[0]) - std::sqrt(8.0) / 3.0) <= 1e-6);
  const double q = QuadModel(b, r).value(s.alpha);
  CHECK(std::abs(q - grid_min_2d(b, r, 1.0)) <= 1e-4);
  CHECK(std::abs(q - (-4.0 / 9.0 - 1.0 / 3.0 + 1.0 / 9.0)) <= 1e-6);
}

TEST_CASE("hard case with an explicit zero perturbation uses the closed form") {
  const EigenDecomp eig = diag_model({-1.0, 2.0}, {0.0, 1.0});
  const TRSolution s = solve_full(eig, 1.0, 0.0);
  CHECK(std::abs(s.alpha.norm() - 1.0) <= 1e-12);
  CHECK(s.lambda == 1.0);
  CHECK(std::abs(s.alpha[1] - 1.0 / 3.0) <= 1e-15);
}

TEST_CASE("saddle-free flips negative eigenvalues") {
  const EigenDecomp eig = diag_model({-2.0, 2.0}, {1.0, 1.0});
  const TRSolution s = solve_saddle_free(eig, 100.0);
  CHECK((s.alpha - Vector{{0.5, 0.5}}).norm() <= 1e-15);
  const TRSolution classic = solve_full(diag_model({2.0, 2.0}, {1.0, 1.0}), 0.3);
  CHECK((solve_saddle_free(eig, 0.3).alpha - classic.alpha).norm() <= 1e-12);
  CHECK(absolute_newton_norm(eig) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("saddle-free equals the full solve on positive definite models") {
  std::mt19937_64 rng(33);
  for (int t = 0; t < 20; ++t) {
    const Matrix a = random_symmetric(5, rng);
    const Matrix b = a * a.transpose() + 0.1 * Matrix::Identity(5, 5);
    const EigenDecomp eig = decompose(QuadModel(b, random_vector(5, rng)));
    for (double eps : {0.01, 0.5, 100.0}) {
      const TRSolution x = solve_saddle_free(eig, eps);
      const TRSolution y = solve_full(eig, eps);
      CHECK(x.alpha == y.alpha);
      CHECK(x.lambda == y.lambda);
    }
  }
}

TEST_CASE("saddle-free on diag(-1, 3) matches the grid oracle on |B|") {
  const EigenDecomp eig = diag_model({-1.0, 3.0}, {1.0, 1.0});
  const TRSolution s = solve_saddle_free(eig, 0.5);
  const Matrix abs_b{{1.0, 0.0}, {0.0, 3.0}};
  const double q = QuadModel(abs_b, Vector{{1.0, 1.0}}).value(s.alpha);
  CHECK(std::abs(q - grid_min_2d(abs_b, Vector{{1.0, 1.0}}, 0.5)) <= 1e-6);
  CHECK(s.q_value == doctest::Approx(q).epsilon(1e-12));
  CHECK_THROWS_AS(solve_saddle_free(diag_model({0.0, 0.0}, {1.0, 1.0}), 1.0), DegenerateError);
}

TEST_CASE("negative subspace walks along negative curvature") {
  const EigenDecomp eig = diag_model({-1.0, 2.0}, {0.5, 3.0});
  const TRSolution s = solve_negative_subspace(eig, 0.25);
  CHECK(std::abs(s.alpha.norm() - 0.25) <= 1e-12);
  CHECK(s.alpha[1] == 0.0);
  CHECK(s.alpha[0] > 0.0);
  CHECK_THROWS_AS(solve_negative_subspace(diag_model({1.0, 2.0}, {1.0, 1.0}), 1.0), ContractError);
}

TEST_CASE("random problems: solutions dominate feasible samples") {
  std::mt19937_64 rng(101);
  for (int t = 0; t < 60; ++t) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng() % 15);
    const Matrix b = random_symmetric(n, rng);
    const Vector r = random_vector(n, rng);
    const EigenDecomp eig = decompose(QuadModel(b, r));
    const double eps = std::exp(std::uniform_real_distribution<double>(-3.0, 2.0)(rng));
    const Matrix samples = ball_samples(n, 4000, eps, rng);
    const Vector q = q_values(b, r, samples);

    const TRSolution full = solve_full(eig, eps);
    INFO("trial " << t << " n " << n);
    CHECK(full.alpha.norm() <= eps * (1.0 + 1e-8));
    CHECK(full.q_value <= q.minCoeff() + 1e-6);
    CHECK(std::abs(full.q_value - QuadModel(b, r).value(full.alpha)) <= 1e-8 * std::max(1.0, std::abs(full.q_value)));
    if (!full.interior) CHECK(std::abs(full.alpha.norm() - eps) <= 1e-8 * eps);

    if (!eig.positive_indices().empty()) {
      const TRSolution pos = solve_positive_subspace(eig, eps);
      // Restrict the samples to the positive eigenspace.
      Matrix proj = Matrix::Zero(n, n);
      for (Eigen::Index i : eig.positive_indices()) proj += eig.vectors.col(i) * eig.vectors.col(i).transpose();
      const Vector qp = q_values(b, r, proj * samples);
      CHECK(pos.q_value <= qp.minCoeff() + 1e-6);
      CHECK(pos.alpha.norm() <= eps * (1.0 + 1e-8));
      if (!pos.interior) CHECK(std::abs(pos.alpha.norm() - eps) <= 1e-8 * eps);
      if (pos.alpha.norm() > 0.0) CHECK(r.dot(pos.alpha) > 0.0);
    }
  }
}

TEST_CASE("larger radius never gives a worse model value") {
  std::mt19937_64 rng(202);
  for (int t = 0; t < 30; ++t) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng() % 10);
    const EigenDecomp eig = decompose(QuadModel(random_symmetric(n, rng), random_vector(n, rng)));
    double prev = 0.0;
    for (double eps = 0.01; eps < 50.0; eps *= 1.7) {
      const double q = solve_full(eig, eps).q_value;
      CHECK(q <= prev + 1e-10 * std::max(1.0, std::abs(prev)));
      prev = q;
    }
  }
}
