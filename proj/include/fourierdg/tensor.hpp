#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace fourierdg {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T
Matrix matmul_bt(const Matrix& a, const Matrix& b);
// a^T * b
Matrix matmul_at(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix gather_rows(const Matrix& a, std::span<const std::size_t> rows);
Vector column_sums(const Matrix& a);
void add_inplace(Matrix& dst, const Matrix& src);
void add_inplace(std::span<double> dst, std::span<const double> src);
double max_abs_diff(const Matrix& a, const Matrix& b);

// Counter-based generator: the n-th draw of a stream is a pure function of
// (seed, n), so streams can be forked and replayed independently.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  // Independent stream keyed by `stream`; does not advance this one.
  Rng fork(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t x);
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

enum class Mode { train, eval };

// Records backward steps during a forward pass and replays them in reverse.
class GradTape {
 public:
  void record(std::function<void()> step);
  // Runs the recorded steps last-to-first. A tape can be replayed once.
  void backward();
  std::size_t size() const { return steps_.size(); }
  bool consumed() const { return consumed_; }

 private:
  std::vector<std::function<void()>> steps_;
  bool consumed_ = false;
};

// y = x W + bias
Matrix affine(const Matrix& x, const Matrix& weight, std::span<const double> bias);

struct AffineGrads {
  Matrix dx;
  Matrix dweight;
  Vector dbias;
};

AffineGrads affine_backward(const Matrix& x, const Matrix& weight, const Matrix& dy);

Matrix relu(const Matrix& x);
Matrix relu_backward(const Matrix& x, const Matrix& dy);

struct BatchNormState {
  Vector running_mean;
  Vector running_var;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

struct BatchNormCache {
  Matrix x_hat;
  Vector inv_std;
};

// Train mode normalizes with batch statistics (population variance) and
// folds them into `state` with momentum 0.1; eval mode uses `state`.
// `cache` is filled in train mode when non-null.
Matrix batchnorm(const Matrix& x, std::span<const double> gamma,
                 std::span<const double> beta, BatchNormState& state, Mode mode,
                 BatchNormCache* cache = nullptr);
// Eval-mode forward that never touches state.
Matrix batchnorm_eval(const Matrix& x, std::span<const double> gamma,
                      std::span<const double> beta, const BatchNormState& state);

struct BatchNormGrads {
  Matrix dx;
  Vector dgamma;
  Vector dbeta;
};

BatchNormGrads batchnorm_backward(const BatchNormCache& cache,
                                  std::span<const double> gamma, const Matrix& dy);

// Inverted dropout. In train mode `mask` (if non-null) receives the per-entry
// scale (0 or 1/(1-p)); eval mode is the identity.
Matrix dropout(const Matrix& x, double p, Rng& rng, Mode mode, Matrix* mask = nullptr);
Matrix dropout_backward(const Matrix& mask, const Matrix& dy);

using ScalarFn = std::function<double(std::span<const double>)>;

// Max over coordinates of |analytic - fd| / max(1, |analytic|, |fd|), fd being
// the central difference of f at x0 with step h.
double grad_check(const ScalarFn& f, std::span<const double> x0,
                  std::span<const double> analytic, double h = 1e-5);

}  // namespace fourierdg
