#include <cmath>

#include "doctest.h"
#include "fourierdg/error.hpp"
#include "fourierdg/tensor.hpp"

using namespace fourierdg;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
  return m;
}

// <w, y> for a fixed weight matrix: a scalar whose gradient w.r.t. y is w.
double weighted_sum(const Matrix& y, const Matrix& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.values()[i] * w.values()[i];
  return s;
}

}  // namespace

TEST_CASE("affine worked examples") {
  const Matrix x = Matrix::from_rows({{2, 3}});
  CHECK(affine(x, Matrix::identity(2), Vector{0, 0}) == x);

  const Matrix ones = Matrix::from_rows({{1, 1}});
  const Matrix w = Matrix::from_rows({{1, 2}, {3, 4}});
  CHECK(affine(ones, w, Vector{0, 0}) == Matrix::from_rows({{4, 6}}));

  const AffineGrads g = affine_backward(ones, Matrix::identity(2), ones);
  CHECK(g.dx == Matrix::from_rows({{1, 1}}));
  CHECK(g.dweight == Matrix::from_rows({{1, 1}, {1, 1}}));
  CHECK(g.dbias == Vector{1, 1});
}

TEST_CASE("affine rejects mismatched shapes") {
  CHECK_THROWS_AS(affine(Matrix(2, 3), Matrix(2, 2), Vector{0, 0}), DimensionError);
  CHECK_THROWS_AS(affine(Matrix(2, 2), Matrix(2, 2), Vector{0, 0, 0}), DimensionError);
}

TEST_CASE("affine backward matches finite differences") {
  Rng rng(11);
  const Matrix x = random_matrix(4, 5, rng);
  const Matrix w = random_matrix(5, 3, rng);
  Vector bias(3);
  for (double& b : bias) b = rng.uniform(-1, 1);
  const Matrix probe = random_matrix(4, 3, rng);
  const AffineGrads g = affine_backward(x, w, probe);

  CHECK(grad_check([&](std::span<const double> v) {
          return weighted_sum(affine(Matrix(4, 5, Vector(v.begin(), v.end())), w, bias), probe);
        }, x.values(), g.dx.values()) < 1e-4);
  CHECK(grad_check([&](std::span<const double> v) {
          return weighted_sum(affine(x, Matrix(5, 3, Vector(v.begin(), v.end())), bias), probe);
        }, w.values(), g.dweight.values()) < 1e-4);
  CHECK(grad_check([&](std::span<const double> v) { return weighted_sum(affine(x, w, v), probe); },
                   bias, g.dbias) < 1e-4);
}

TEST_CASE("relu forward and subgradient") {
  CHECK(relu(Matrix::from_rows({{-1, 2}})) == Matrix::from_rows({{0, 2}}));
  CHECK(relu(Matrix::from_rows({{0, 0}})) == Matrix::from_rows({{0, 0}}));
  CHECK(relu_backward(Matrix::from_rows({{-1, 2}}), Matrix::from_rows({{5, 5}})) ==
        Matrix::from_rows({{0, 5}}));
  CHECK(relu_backward(Matrix::from_rows({{0}}), Matrix::from_rows({{3}})) == Matrix::from_rows({{0}}));
}

TEST_CASE("relu(x) + relu(-x) = |x|") {
  Rng rng(3);
  const Matrix x = random_matrix(7, 9, rng);
  Matrix neg = x;
  for (double& v : neg.values()) v = -v;
  const Matrix a = relu(x), b = relu(neg);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(a.values()[i] + b.values()[i] == std::abs(x.values()[i]));
}

TEST_CASE("relu backward matches finite differences away from the kink") {
  Rng rng(5);
  Matrix x = random_matrix(3, 4, rng);
  for (double& v : x.values())
    if (std::abs(v) < 1e-3) v = 0.5;
  const Matrix probe = random_matrix(3, 4, rng);
  const Matrix dx = relu_backward(x, probe);
  CHECK(grad_check([&](std::span<const double> v) {
          return weighted_sum(relu(Matrix(3, 4, Vector(v.begin(), v.end()))), probe);
        }, x.values(), dx.values()) < 1e-4);
}

TEST_CASE("batchnorm worked examples") {
  BatchNormState state{{0.0}, {1.0}};
  const Matrix y = batchnorm(Matrix::from_rows({{1}, {3}}), Vector{1}, Vector{0}, state, Mode::train);
  // mean 2, population variance 1: outputs are -1/sqrt(1+eps), +1/sqrt(1+eps).
  CHECK(std::abs(y(0, 0) + 1.0) < 1e-5);
  CHECK(std::abs(y(1, 0) - 1.0) < 1e-5);
  CHECK(y(0, 0) > -1.0);
  // running stats moved 10% towards the batch statistics
  CHECK(state.running_mean[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(state.running_var[0] == doctest::Approx(1.0).epsilon(1e-12));

  BatchNormState identity{{0.0, 0.0}, {1.0, 1.0}};
  const Matrix x = Matrix::from_rows({{0.3, -2.0}, {1.5, 4.0}});
  const Matrix e = batchnorm(x, Vector{1, 1}, Vector{0, 0}, identity, Mode::eval);
  CHECK(max_abs_diff(e, x) < 1e-4);
  CHECK(identity.running_mean == Vector{0.0, 0.0});

  BatchNormState s2{{0.0}, {1.0}};
  const Matrix c = batchnorm(Matrix::from_rows({{5}, {5}}), Vector{1}, Vector{0}, s2, Mode::train);
  CHECK(c == Matrix::from_rows({{0}, {0}}));
}

TEST_CASE("batchnorm train mode needs two samples") {
  BatchNormState state{{0.0}, {1.0}};
  CHECK_THROWS_AS(batchnorm(Matrix::from_rows({{1}}), Vector{1}, Vector{0}, state, Mode::train),
                  BatchSizeError);
  CHECK_NOTHROW(batchnorm(Matrix::from_rows({{1}}), Vector{1}, Vector{0}, state, Mode::eval));
}

TEST_CASE("batchnorm backward matches finite differences") {
  Rng rng(21);
  const std::size_t b = 5, m = 4;
  const Matrix x = random_matrix(b, m, rng);
  Vector gamma(m), beta(m);
  for (double& g : gamma) g = rng.uniform(0.5, 1.5);
  for (double& v : beta) v = rng.uniform(-1, 1);
  const Matrix probe = random_matrix(b, m, rng);

  auto forward = [&](const Matrix& in, std::span<const double> gm, std::span<const double> bt) {
    BatchNormState s{Vector(m, 0.0), Vector(m, 1.0)};
    return weighted_sum(batchnorm(in, gm, bt, s, Mode::train), probe);
  };
  BatchNormState s{Vector(m, 0.0), Vector(m, 1.0)};
  BatchNormCache cache;
  batchnorm(x, gamma, beta, s, Mode::train, &cache);
  const BatchNormGrads g = batchnorm_backward(cache, gamma, probe);

  CHECK(grad_check([&](std::span<const double> v) {
          return forward(Matrix(b, m, Vector(v.begin(), v.end())), gamma, beta);
        }, x.values(), g.dx.values()) < 1e-4);
  CHECK(grad_check([&](std::span<const double> v) { return forward(x, v, beta); }, gamma, g.dgamma) < 1e-4);
  CHECK(grad_check([&](std::span<const double> v) { return forward(x, gamma, v); }, beta, g.dbeta) < 1e-4);
}

TEST_CASE("dropout modes") {
  Rng rng(1);
  const Matrix x = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(dropout(x, 0.0, rng, Mode::train) == x);
  CHECK(dropout(x, 0.1, rng, Mode::eval) == x);
  CHECK_THROWS_AS(dropout(x, 1.0, rng, Mode::train), ParameterError);
  CHECK_THROWS_AS(dropout(x, -0.1, rng, Mode::train), ParameterError);
}

TEST_CASE("dropout keep rate at p=0.5") {
  Rng rng(2024);
  const Matrix x(1000, 100, 1.0);
  const Matrix y = dropout(x, 0.5, rng, Mode::train);
  std::size_t kept = 0;
  for (double v : y.values()) {
    if (v != 0.0) {
      ++kept;
      CHECK(v == 2.0);
    }
  }
  const double rate = static_cast<double>(kept) / static_cast<double>(y.size());
  CHECK(rate >= 0.495);
  CHECK(rate <= 0.505);
}

TEST_CASE("inverted dropout preserves expectation") {
  const Matrix x = Matrix::from_rows({{0.5, -1.0, 2.0}, {3.0, -0.25, 1.0}});
  Matrix mean(2, 3);
  const Rng root(99);
  const int trials = 100000;
  for (int t = 0; t < trials; ++t) {
    Rng rng = root.fork(static_cast<std::uint64_t>(t));
    add_inplace(mean, dropout(x, 0.1, rng, Mode::train));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = mean.values()[i] / trials;
    CHECK(std::abs(m - x.values()[i]) <= 0.01 * std::abs(x.values()[i]));
  }
}

TEST_CASE("dropout backward reuses the forward mask") {
  Rng rng(8);
  const Matrix x(4, 4, 1.0);
  Matrix mask;
  const Matrix y = dropout(x, 0.3, rng, Mode::train, &mask);
  const Matrix dx = dropout_backward(mask, Matrix(4, 4, 1.0));
  CHECK(dx == y);
}

TEST_CASE("rng streams are reproducible") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 10; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    CHECK(va != c.next_u64());
  }
  // The n-th draw depends only on (seed, n).
  Rng replay(42, 5);
  Rng fresh(42);
  for (int i = 0; i < 5; ++i) fresh.next_u64();
  CHECK(replay.next_u64() == fresh.next_u64());
  // Forks do not advance the parent.
  Rng parent(7);
  const auto before = parent.counter();
  Rng f1 = parent.fork(1), f2 = parent.fork(1), f3 = parent.fork(2);
  CHECK(parent.counter() == before);
  CHECK(f1.next_u64() == f2.next_u64());
  CHECK(f1.next_u64() != f3.next_u64());

  Rng p(5);
  auto perm = permutation(50, p);
  std::sort(perm.begin(), perm.end());
  for (std::size_t i = 0; i < perm.size(); ++i) CHECK(perm[i] == i);
}

TEST_CASE("grad_check on simple functions") {
  const Vector x0{3.0};
  CHECK(grad_check([](std::span<const double> x) { return x[0] * x[0]; }, x0, Vector{6.0}, 1e-5) < 1e-8);
  CHECK(grad_check([](std::span<const double>) { return 4.0; }, Vector{1.0, 2.0}, Vector{0.0, 0.0}) == 0.0);
  CHECK_THROWS_AS(grad_check([](std::span<const double>) { return std::nan(""); }, x0, Vector{0.0}),
                  EvaluationError);
  // A wrong analytic gradient is caught.
  CHECK(grad_check([](std::span<const double> x) { return x[0] * x[0]; }, x0, Vector{5.0}) > 0.1);
}

TEST_CASE("grad tape replays in reverse, once") {
  GradTape tape;
  std::vector<int> order;
  for (int i = 0; i < 4; ++i) tape.record([&order, i] { order.push_back(i); });
  tape.backward();
  CHECK(order == std::vector<int>{3, 2, 1, 0});
  CHECK_THROWS(tape.backward());
}

TEST_CASE("matmul variants agree with the naive product") {
  Rng rng(4);
  const Matrix a = random_matrix(3, 5, rng);
  const Matrix b = random_matrix(5, 2, rng);
  Matrix naive(3, 2);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 5; ++k) naive(i, j) += a(i, k) * b(k, j);
  CHECK(max_abs_diff(matmul(a, b), naive) < 1e-14);
  CHECK(max_abs_diff(matmul_bt(a, transpose(b)), naive) < 1e-14);
  CHECK(max_abs_diff(matmul_at(transpose(a), b), naive) < 1e-14);
  CHECK_THROWS_AS(matmul(a, a), DimensionError);
}
