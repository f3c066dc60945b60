#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "cpmmd/errors.hpp"
#include "cpmmd/features.hpp"
#include "helpers.hpp"

using namespace cpmmd;

namespace {

// brute-force count of multi-indices with 1 <= |alpha| <= p
long long count_indices(int d, int p) {
  long long count = 0;
  std::function<void(int, int)> rec = [&](int var, int left) {
    if (var == d) {
      if (left < p) ++count;
      return;
    }
    for (int e = 0; e <= left; ++e) rec(var + 1, left - e);
  };
  rec(0, p);
  return count;
}

long long binom(int n, int k) {
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

TEST_CASE("poly_features examples") {
  const PolynomialMap m = PolynomialMap::make(2, 2);
  Vector x(2);
  x << 1, 2;
  const Vector f = poly_features(m, x);
  REQUIRE(f.size() == 5);
  const double expected[] = {1, 2, 1, 2, 4};
  for (int i = 0; i < 5; ++i) CHECK(f(i) == expected[i]);

  const PolynomialMap u = PolynomialMap::make(1, 3);
  Vector y(1);
  y << 2;
  const Vector g = poly_features(u, y);
  REQUIRE(g.size() == 3);
  CHECK(g(0) == 2);
  CHECK(g(1) == 4);
  CHECK(g(2) == 8);

  CHECK(polynomial_output_dim(2, 2) == 5);
  Vector bad(3);
  bad << 1, 2, 3;
  CHECK_THROWS_AS(poly_features(m, bad), ContractViolation);
}

TEST_CASE("graded-lex ordering for d=2, p=2") {
  const auto idx = graded_lex_indices(2, 2);
  const std::vector<MultiIndex> expected = {{1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  CHECK(idx == expected);
}

TEST_CASE("property: polynomial dimension formula for d <= 5, p <= 4") {
  for (int d = 1; d <= 5; ++d)
    for (int p = 1; p <= 4; ++p) {
      CAPTURE(d);
      CAPTURE(p);
      const long long brute = count_indices(d, p);
      CHECK(brute == binom(d + p, p) - 1);
      CHECK(polynomial_output_dim(d, p) == brute);
      CHECK(static_cast<long long>(graded_lex_indices(d, p).size()) == brute);
      CHECK(PolynomialMap::make(d, p).output_dim() == brute);
    }
}

TEST_CASE("poly_jacobian matches finite differences and bounds the operator norm") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 10; ++t) {
    const int d = testing::uniform_int(rng, 1, 4), p = testing::uniform_int(rng, 1, 4);
    const PolynomialMap m = PolynomialMap::make(d, p);
    const Vector x = testing::random_matrix(d, 1, rng).col(0);
    const Matrix J = poly_jacobian(m, x);
    for (int i = 0; i < d; ++i) {
      Vector a = x, b = x;
      a(i) += 1e-6;
      b(i) -= 1e-6;
      const Vector fd = (poly_features(m, a) - poly_features(m, b)) / 2e-6;
      CHECK((fd - J.col(i)).cwiseAbs().maxCoeff() < 1e-6 * (1 + J.cwiseAbs().maxCoeff()));
    }
    Eigen::JacobiSVD<Matrix> svd(J);
    CHECK(svd.singularValues()(0) <= J.norm() + 1e-12);
  }
}

TEST_CASE("mlp_forward examples") {
  MlpMap zero = MlpMap::glorot({3, 4, 2}, 1);
  for (auto& l : zero.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  Matrix X(1, 3);
  X << 1, -2, 3;
  CHECK(mlp_forward(zero, X).cwiseAbs().maxCoeff() == 0.0);

  MlpMap id;
  id.layers.push_back({Matrix::Identity(2, 2), Vector::Zero(2)});
  Matrix ones = Matrix::Ones(1, 2);
  CHECK(mlp_forward(id, ones) == ones);

  MlpMap single;
  single.layers.push_back({Matrix::Constant(1, 1, 2.0), Vector::Zero(1)});
  Matrix neg = Matrix::Constant(1, 1, -1.0);
  CHECK(mlp_forward(single, neg)(0, 0) == -2.0);  // affine output layer

  MlpMap two = single;
  two.layers.push_back({Matrix::Identity(1, 1), Vector::Zero(1)});
  CHECK(mlp_forward(two, neg)(0, 0) == doctest::Approx(-0.02));  // hidden LeakyReLU

  CHECK_THROWS_AS(mlp_forward(id, Matrix::Ones(1, 3)), ContractViolation);
}

TEST_CASE("glorot initialization respects the fan limit with zero biases") {
  const MlpMap m = MlpMap::glorot({10, 30, 5}, 9);
  CHECK(m.widths() == std::vector<int>{10, 30, 5});
  CHECK(m.layers[0].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 40.0));
  CHECK(m.layers[1].weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 35.0));
  CHECK(m.layers[0].bias.isZero());
  CHECK(m.parameter_count() == 10 * 30 + 30 + 30 * 5 + 5);
  const MlpMap again = MlpMap::glorot({10, 30, 5}, 9);
  CHECK(again.layers[1].weight == m.layers[1].weight);
}

TEST_CASE("mlp_backward examples") {
  std::mt19937_64 rng(2);
  const MlpMap map = testing::random_mlp({3, 5, 2}, rng);
  const Matrix X = testing::random_matrix(4, 3, rng);
  const MlpGradient zero = mlp_backward(map, X, Matrix::Zero(4, 2));
  CHECK(zero.squared_norm() == 0.0);

  MlpMap lin;
  lin.layers.push_back({testing::random_matrix(2, 3, rng), Vector::Zero(2)});
  const Matrix x = testing::random_matrix(1, 3, rng);
  const MlpGradient g = mlp_backward(lin, x, Matrix::Ones(1, 2));
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) CHECK(g.layers[0].weight(r, c) == doctest::Approx(x(0, c)));
  CHECK(g.layers[0].bias(0) == 1.0);

  CHECK_THROWS_AS(mlp_backward(map, X, Matrix::Zero(3, 2)), ContractViolation);
}

TEST_CASE("property: mlp_backward matches finite differences of a random scalar") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 10; ++t) {
    const std::vector<int> widths = {testing::uniform_int(rng, 1, 5), testing::uniform_int(rng, 1, 8),
                                     testing::uniform_int(rng, 1, 8), testing::uniform_int(rng, 1, 4)};
    const MlpMap map = testing::random_mlp(widths, rng);
    const Matrix X = testing::random_matrix(testing::uniform_int(rng, 1, 6), widths[0], rng);
    const Matrix R = testing::random_matrix(static_cast<int>(X.rows()), widths.back(), rng);
    auto f = [&](const MlpMap& m) { return mlp_forward(m, X).cwiseProduct(R).sum(); };
    CHECK(testing::max_fd_error(map, mlp_backward(map, X, R), f) < 1e-4);
  }
}

TEST_CASE("spectral_norm examples") {
  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = 3;
  D(1, 1) = 1;
  CHECK(spectral_norm(D) == doctest::Approx(3.0));
  CHECK(spectral_norm(Matrix::Identity(5, 5)) == doctest::Approx(1.0));
  Matrix N = Matrix::Zero(2, 2);
  N(0, 1) = 2;
  CHECK(spectral_norm(N) == doctest::Approx(2.0));
  CHECK(spectral_norm(Matrix::Zero(3, 4)) == 0.0);
}

TEST_CASE("property: power iteration agrees with a Jacobi eigen oracle on 20x20 matrices") {
  // the 50-iteration cap meets 1e-6 only with a spectral gap, so each draw is
  // Gaussian noise plus a random rank-one spike
  std::mt19937_64 rng(17);
  for (int t = 0; t < 30; ++t) {
    const Vector u = testing::random_matrix(20, 1, rng).col(0).normalized();
    const Vector v = testing::random_matrix(20, 1, rng).col(0).normalized();
    const double spike = std::uniform_real_distribution<double>(12.0, 30.0)(rng);
    const Matrix W = testing::random_matrix(20, 20, rng) + spike * u * v.transpose();
    std::vector<double> ev = testing::jacobi_eigenvalues(W.transpose() * W);
    const double top = std::sqrt(*std::max_element(ev.begin(), ev.end()));
    CHECK(std::abs(spectral_norm(W) - top) / top < 1e-6);
    CHECK(std::abs(exact_top_singular_triplet(W).value - top) / top < 1e-10);
  }
}

TEST_CASE("Lipschitz constants") {
  CHECK(lipschitz_constant(LinearMap{2.0, 3}) == 0.5);
  MlpMap id;
  id.layers.push_back({Matrix::Identity(3, 3), Vector::Zero(3)});
  id.layers.push_back({Matrix::Identity(3, 3), Vector::Zero(3)});
  CHECK(lipschitz_constant(id) == doctest::Approx(1.0));
  MlpMap prod;
  prod.layers.push_back({3.0 * Matrix::Identity(2, 2), Vector::Zero(2)});
  prod.layers.push_back({2.0 * Matrix::Identity(2, 2), Vector::Zero(2)});
  CHECK(lipschitz_constant(prod) == doctest::Approx(6.0));
  PolynomialMap p = PolynomialMap::make(2, 2, 2.0);
  CHECK_THROWS_AS(lipschitz_constant(p), ContractViolation);
  p.jacobian_bound = 4.0;
  CHECK(lipschitz_constant(p) == 2.0);
}

TEST_CASE("property: MLP features are Pi-Lipschitz") {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 50; ++t) {
    const int d = testing::uniform_int(rng, 1, 6);
    const MlpMap map = testing::random_mlp({d, testing::uniform_int(rng, 1, 8), testing::uniform_int(rng, 1, 8), 3},
                                           rng, 2.0);
    const Matrix X = testing::random_matrix(2, d, rng, 3.0);
    const Matrix H = mlp_forward(map, X);
    CHECK((H.row(0) - H.row(1)).norm() <= spectral_product(map) * (X.row(0) - X.row(1)).norm() * (1 + 1e-9));
  }
}
