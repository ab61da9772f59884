#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fourierdg/error.hpp"
#include "fourierdg/losses.hpp"

using namespace fourierdg;

namespace {

double cos_rows(const Matrix& z, std::size_t a, std::size_t b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t c = 0; c < z.cols(); ++c) {
    ab += z(a, c) * z(b, c);
    aa += z(a, c) * z(a, c);
    bb += z(b, c) * z(b, c);
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

// Direct transcription of the per-anchor formula, averaged over positives.
double asymmetric_oracle(const Matrix& z, const std::vector<int>& y) {
  double total = 0.0;
  int anchors = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 1) continue;
    ++anchors;
    double pos = 0.0, neg = 0.0;
    int np = 0, nn = 0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (j == i) continue;
      if (y[j] == 1) {
        pos += cos_rows(z, i, j);
        ++np;
      } else {
        neg += cos_rows(z, i, j);
        ++nn;
      }
    }
    total += (np ? -pos / np : 0.0) + (nn ? neg / nn : 0.0);
  }
  return anchors ? total / anchors : 0.0;
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
  return m;
}

std::vector<int> random_labels(std::size_t n, Rng& rng) {
  std::vector<int> y(n);
  for (int& v : y) v = static_cast<int>(rng.below(2));
  return y;
}

}  // namespace

TEST_CASE("asymmetric loss worked examples") {
  const double s = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(asymmetric_loss(Matrix::from_rows({{1, 0}, {1, 0}, {0, 1}}), std::vector{1, 1, 0}).value + 1.0) < 1e-9);
  CHECK(std::abs(asymmetric_loss(Matrix::from_rows({{1, 0}, {1, 0}, {1, 0}}), std::vector{1, 1, 0}).value) < 1e-9);
  CHECK(std::abs(asymmetric_loss(Matrix::from_rows({{1, 0}, {s, s}}), std::vector{1, 0}).value - s) < 1e-9);
}

TEST_CASE("asymmetric loss degenerate batches") {
  const Matrix z = Matrix::from_rows({{1, 0}, {0, 1}});
  const MatrixLoss none = asymmetric_loss(z, std::vector{0, 0});
  CHECK(none.value == 0.0);
  CHECK(none.degenerate);
  CHECK(none.grad == Matrix(2, 2));
  // Positives only: the negative term is empty and contributes zero.
  const MatrixLoss only_pos = asymmetric_loss(Matrix::from_rows({{1, 0}, {1, 0}}), std::vector{1, 1});
  CHECK(std::abs(only_pos.value + 1.0) < 1e-12);
  CHECK_FALSE(only_pos.degenerate);
  CHECK(asymmetric_loss(Matrix::from_rows({{1, 2}}), std::vector{1}).degenerate);
}

TEST_CASE("asymmetric loss matches the per-anchor oracle") {
  Rng rng(101);
  for (int t = 0; t < 200; ++t) {
    const std::size_t b = 2 + rng.below(10);
    const Matrix z = random_matrix(b, 6, rng);
    const auto y = random_labels(b, rng);
    CHECK(std::abs(asymmetric_loss(z, y).value - asymmetric_oracle(z, y)) < 1e-12);
  }
}

TEST_CASE("asymmetric loss invariants") {
  Rng rng(7);
  for (int t = 0; t < 100; ++t) {
    const std::size_t b = 3 + rng.below(8);
    Matrix z = random_matrix(b, 5, rng);
    auto y = random_labels(b, rng);
    y[0] = 1;
    const double base = asymmetric_loss(z, y).value;
    CHECK(base >= -2.0);
    CHECK(base <= 2.0);

    Matrix scaled = z;
    const std::size_t row = rng.below(b);
    const double c = rng.uniform(0.01, 100.0);
    for (double& v : scaled.row(row)) v *= c;
    CHECK(std::abs(asymmetric_loss(scaled, y).value - base) < 1e-9);

    // Shuffle the rows that hold negatives among themselves.
    std::vector<std::size_t> negs;
    for (std::size_t i = 0; i < b; ++i)
      if (y[i] == 0) negs.push_back(i);
    if (negs.size() >= 2) {
      Matrix permuted = z;
      std::vector<std::size_t> shuffled = negs;
      Rng prng(t);
      const auto perm = permutation(negs.size(), prng);
      for (std::size_t k = 0; k < negs.size(); ++k) shuffled[k] = negs[perm[k]];
      for (std::size_t k = 0; k < negs.size(); ++k) {
        auto dst = permuted.row(negs[k]);
        const auto src = z.row(shuffled[k]);
        std::copy(src.begin(), src.end(), dst.begin());
      }
      CHECK(std::abs(asymmetric_loss(permuted, y).value - base) < 1e-12);
    }
  }
}

TEST_CASE("negatives never interact with each other") {
  // Moving a negative changes the loss only through anchor-negative pairs:
  // with no positives at all, any negative configuration gives 0.
  Rng rng(3);
  const Matrix z = random_matrix(5, 4, rng);
  CHECK(asymmetric_loss(z, std::vector{0, 0, 0, 0, 0}).value == 0.0);
  // Gradient of a negative row only depends on anchors, not on other negatives.
  const std::vector<int> y{1, 0, 0};
  Matrix moved = z;
  moved = gather_rows(z, std::vector<std::size_t>{0, 1, 2});
  const Matrix before = asymmetric_loss(moved, y).grad;
  for (double& v : moved.row(2)) v = rng.uniform(-1, 1);
  const Matrix after = asymmetric_loss(moved, y).grad;
  for (std::size_t c = 0; c < 4; ++c) CHECK(before(1, c) == after(1, c));
}

TEST_CASE("asymmetric loss gradient matches finite differences") {
  Rng rng(55);
  for (int t = 0; t < 20; ++t) {
    const std::size_t b = 3 + rng.below(6);
    const Matrix z = random_matrix(b, 8, rng);
    auto y = random_labels(b, rng);
    y[0] = 1;
    const MatrixLoss l = asymmetric_loss(z, y);
    auto f = [&](std::span<const double> v) {
      return asymmetric_loss(Matrix(b, 8, Vector(v.begin(), v.end())), y).value;
    };
    CHECK(grad_check(f, z.values(), l.grad.values()) <= 1e-4);
  }
}

TEST_CASE("domain adversarial loss values") {
  CHECK(std::abs(domain_adversarial_loss(Matrix(3, 2), std::vector{0, 1, 0}).value - std::log(2.0)) < 1e-12);
  CHECK(std::abs(domain_adversarial_loss(Matrix(2, 4, 1.5), std::vector{3, 2}).value - std::log(4.0)) < 1e-12);
  const double expected = std::log1p(2.0 * std::exp(-10.0));
  const double got = domain_adversarial_loss(Matrix::from_rows({{10, 0, 0}}), std::vector{0}).value;
  CHECK(std::abs(got - expected) < 1e-15);
  CHECK(got == doctest::Approx(9.08e-5).epsilon(0.01));
}

TEST_CASE("domain adversarial loss errors and gradient") {
  CHECK_THROWS_AS(domain_adversarial_loss(Matrix(1, 3), std::vector{3}), LabelError);
  CHECK_THROWS_AS(domain_adversarial_loss(Matrix(1, 3), std::vector{-1}), LabelError);
  CHECK_THROWS_AS(domain_adversarial_loss(Matrix(1, 1), std::vector{0}), ParameterError);

  Rng rng(9);
  const Matrix logits = random_matrix(5, 3, rng);
  const std::vector<int> d{0, 2, 1, 1, 0};
  const MatrixLoss l = domain_adversarial_loss(logits, d);
  // Each gradient row is (softmax - onehot) / b and sums to zero.
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (double v : l.grad.row(i)) s += v;
    CHECK(std::abs(s) < 1e-15);
  }
  auto f = [&](std::span<const double> v) {
    return domain_adversarial_loss(Matrix(5, 3, Vector(v.begin(), v.end())), d).value;
  };
  CHECK(grad_check(f, logits.values(), l.grad.values()) <= 1e-4);
}

TEST_CASE("classification loss values") {
  CHECK(std::abs(classification_loss(Vector{0.5, 0.5}, std::vector{1, 0}).value - std::log(2.0)) < 1e-12);
  CHECK(classification_loss(Vector{1.0, 0.0}, std::vector{1, 0}).value <= 1e-11);
  const double expected = (-std::log(0.9) - std::log(0.8)) / 2.0;
  CHECK(std::abs(classification_loss(Vector{0.9, 0.2}, std::vector{1, 0}).value - expected) < 1e-15);
  CHECK(expected == doctest::Approx(0.1643).epsilon(1e-3));
}

TEST_CASE("classification loss gradients") {
  const Vector p{0.3, 0.8, 0.55};
  const std::vector<int> y{1, 0, 1};
  const VectorLoss l = classification_loss(p, y);
  CHECK(grad_check([&](std::span<const double> v) { return classification_loss(v, y).value; }, p, l.grad) <= 1e-4);

  // The logit form agrees with the probability form.
  Rng rng(12);
  for (int t = 0; t < 50; ++t) {
    Vector logits(4), probs(4);
    for (std::size_t i = 0; i < 4; ++i) {
      logits[i] = rng.uniform(-8, 8);
      probs[i] = sigmoid(logits[i]);
    }
    const std::vector<int> labels{1, 0, 0, 1};
    const VectorLoss from_logits = classification_loss_logits(logits, labels);
    CHECK(from_logits.value == doctest::Approx(classification_loss(probs, labels).value).epsilon(1e-10));
    CHECK(grad_check([&](std::span<const double> v) { return classification_loss_logits(v, labels).value; },
                     logits, from_logits.grad) <= 1e-4);
  }
  // No overflow far into saturation.
  const VectorLoss far = classification_loss_logits(Vector{800.0, -800.0}, std::vector{0, 1});
  CHECK(far.value == doctest::Approx(800.0));
}

TEST_CASE("total loss") {
  CHECK(total_loss(0, 0, 0, 3.0, 5.0).total == 0.0);
  const double ln2 = std::log(2.0);
  const LossBreakdown b = total_loss(-1.0, ln2, ln2, 1.0, 1.0);
  CHECK(std::abs(b.total - (2 * ln2 - 1)) < 1e-15);
  CHECK(b.total == doctest::Approx(0.3863).epsilon(1e-4));
  CHECK(total_loss(-0.4, 0.7, 0.2, 0.0, 2.0).total == 0.7 + 2.0 * 0.2);
  // Linear in each weight.
  const double a = total_loss(-0.3, 0.5, 0.9, 2.0, 0.0).total - total_loss(-0.3, 0.5, 0.9, 1.0, 0.0).total;
  CHECK(a == doctest::Approx(-0.3).epsilon(1e-12));
  CHECK_THROWS_AS(total_loss(0, 0, 0, -1.0, 1.0), ParameterError);
}

TEST_CASE("attention diagnostic") {
  const Matrix orth = Matrix::from_rows({{1, 0, 0, 0}, {0, 2, 0, 0}});
  const Matrix a = attention_diagnostic(orth);
  CHECK(a(0, 1) == 0.0);
  CHECK(a(1, 0) == 0.0);

  // d = 4, |z|^2 = sqrt(4) * 3 = 6 gives alpha = 3.
  const double v = std::sqrt(6.0);
  const Matrix same = Matrix::from_rows({{v, 0, 0, 0}, {v, 0, 0, 0}});
  CHECK(attention_diagnostic(same)(0, 1) == doctest::Approx(3.0).epsilon(1e-14));

  Rng rng(2);
  Matrix z(6, 5);
  for (double& x : z.values()) x = rng.normal();
  const Matrix s = attention_diagnostic(z);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) CHECK(s(i, j) == s(j, i));
}
