#include "fourierdg/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

#include "fourierdg/error.hpp"

namespace fourierdg {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Matrix& m) { return ConstMap(m.data(), m.rows(), m.cols()); }
MutMap view(Matrix& m) { return MutMap(m.data(), m.rows(), m.cols()); }

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a) +
                       " and " + shape_str(b));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("from_rows: ragged initializer");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Matrix out(a.rows(), b.cols());
  if (out.empty()) return out;
  if (a.cols() == 0) return out;
  view(out).noalias() = view(a) * view(b);
  return out;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) shape_error("matmul_bt", a, b);
  Matrix out(a.rows(), b.rows());
  if (out.empty() || a.cols() == 0) return out;
  view(out).noalias() = view(a) * view(b).transpose();
  return out;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_error("matmul_at", a, b);
  Matrix out(a.cols(), b.cols());
  if (out.empty() || a.rows() == 0) return out;
  view(out).noalias() = view(a).transpose() * view(b);
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  return out;
}

Matrix gather_rows(const Matrix& a, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= a.rows()) throw DimensionError("gather_rows: row index out of range");
    std::copy_n(a.row(rows[i]).begin(), a.cols(), out.row(i).begin());
  }
  return out;
}

Vector column_sums(const Matrix& a) {
  Vector sums(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    for (std::size_t c = 0; c < a.cols(); ++c) sums[c] += row[c];
  }
  return sums;
}

void add_inplace(Matrix& dst, const Matrix& src) {
  if (dst.rows() != src.rows() || dst.cols() != src.cols()) shape_error("add", dst, src);
  add_inplace(dst.values(), src.values());
}

void add_inplace(std::span<double> dst, std::span<const double> src) {
  if (dst.size() != src.size()) throw DimensionError("add: length mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("max_abs_diff", a, b);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  return worst;
}

// --- Rng -------------------------------------------------------------------

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(seed_ + counter_ * 0x9e3779b97f4a7c15ULL);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // Box-Muller, one output per pair of draws.
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw ParameterError("Rng::below: empty range");
  const unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::size_t>(wide >> 64);
}

Rng Rng::fork(std::uint64_t stream) const {
  return Rng(mix64(seed_ ^ mix64(stream + 0x632be59bd9b4e019ULL)), 0);
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

// --- GradTape --------------------------------------------------------------

void GradTape::record(std::function<void()> step) {
  if (consumed_) throw Error("GradTape: cannot record after backward");
  steps_.push_back(std::move(step));
}

void GradTape::backward() {
  if (consumed_) throw Error("GradTape: backward already run");
  consumed_ = true;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

// --- primitives ------------------------------------------------------------

Matrix affine(const Matrix& x, const Matrix& weight, std::span<const double> bias) {
  if (x.cols() != weight.rows()) shape_error("affine", x, weight);
  if (bias.size() != weight.cols()) {
    throw DimensionError("affine: bias length " + std::to_string(bias.size()) +
                         " does not match output width " + std::to_string(weight.cols()));
  }
  Matrix y = matmul(x, weight);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < y.cols(); ++c) row[c] += bias[c];
  }
  return y;
}

AffineGrads affine_backward(const Matrix& x, const Matrix& weight, const Matrix& dy) {
  if (dy.rows() != x.rows() || dy.cols() != weight.cols()) shape_error("affine_backward", x, dy);
  return {matmul_bt(dy, weight), matmul_at(x, dy), column_sums(dy)};
}

Matrix relu(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Matrix relu_backward(const Matrix& x, const Matrix& dy) {
  if (x.rows() != dy.rows() || x.cols() != dy.cols()) shape_error("relu_backward", x, dy);
  Matrix dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!(x.values()[i] > 0.0)) dx.values()[i] = 0.0;
  return dx;
}

Matrix batchnorm(const Matrix& x, std::span<const double> gamma,
                 std::span<const double> beta, BatchNormState& state, Mode mode,
                 BatchNormCache* cache) {
  const std::size_t b = x.rows();
  const std::size_t m = x.cols();
  if (gamma.size() != m || beta.size() != m || state.running_mean.size() != m ||
      state.running_var.size() != m) {
    throw DimensionError("batchnorm: parameter width does not match " + std::to_string(m) +
                         " columns");
  }
  if (mode == Mode::eval) return batchnorm_eval(x, gamma, beta, state);
  if (b < 2) {
    throw BatchSizeError("batchnorm: train mode needs at least 2 samples, got " +
                         std::to_string(b));
  }

  const double inv_b = 1.0 / static_cast<double>(b);
  Vector mean = column_sums(x);
  for (double& v : mean) v *= inv_b;
  Vector var(m, 0.0);
  for (std::size_t r = 0; r < b; ++r) {
    const auto row = x.row(r);
    for (std::size_t c = 0; c < m; ++c) {
      const double d = row[c] - mean[c];
      var[c] += d * d;
    }
  }
  Vector inv_std(m);
  for (std::size_t c = 0; c < m; ++c) {
    var[c] *= inv_b;
    inv_std[c] = 1.0 / std::sqrt(var[c] + kBatchNormEps);
  }

  Matrix x_hat(b, m);
  Matrix y(b, m);
  for (std::size_t r = 0; r < b; ++r) {
    const auto in = x.row(r);
    auto xh = x_hat.row(r);
    auto out = y.row(r);
    for (std::size_t c = 0; c < m; ++c) {
      xh[c] = (in[c] - mean[c]) * inv_std[c];
      out[c] = gamma[c] * xh[c] + beta[c];
    }
  }

  for (std::size_t c = 0; c < m; ++c) {
    state.running_mean[c] =
        (1.0 - kBatchNormMomentum) * state.running_mean[c] + kBatchNormMomentum * mean[c];
    state.running_var[c] =
        (1.0 - kBatchNormMomentum) * state.running_var[c] + kBatchNormMomentum * var[c];
  }
  if (cache != nullptr) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix batchnorm_eval(const Matrix& x, std::span<const double> gamma,
                      std::span<const double> beta, const BatchNormState& state) {
  const std::size_t m = x.cols();
  if (gamma.size() != m || beta.size() != m || state.running_mean.size() != m ||
      state.running_var.size() != m) {
    throw DimensionError("batchnorm: parameter width does not match " + std::to_string(m) +
                         " columns");
  }
  Vector scale(m), shift(m);
  for (std::size_t c = 0; c < m; ++c) {
    scale[c] = gamma[c] / std::sqrt(state.running_var[c] + kBatchNormEps);
    shift[c] = beta[c] - state.running_mean[c] * scale[c];
  }
  Matrix y(x.rows(), m);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto in = x.row(r);
    auto out = y.row(r);
    for (std::size_t c = 0; c < m; ++c) out[c] = in[c] * scale[c] + shift[c];
  }
  return y;
}

BatchNormGrads batchnorm_backward(const BatchNormCache& cache,
                                  std::span<const double> gamma, const Matrix& dy) {
  const Matrix& x_hat = cache.x_hat;
  const std::size_t b = x_hat.rows();
  const std::size_t m = x_hat.cols();
  if (dy.rows() != b || dy.cols() != m) shape_error("batchnorm_backward", x_hat, dy);

  BatchNormGrads g{Matrix(b, m), Vector(m, 0.0), Vector(m, 0.0)};
  // Per column: sum(dxhat) and sum(dxhat * xhat), with dxhat = dy * gamma.
  Vector sum_dxhat(m, 0.0), sum_dxhat_xhat(m, 0.0);
  for (std::size_t r = 0; r < b; ++r) {
    const auto d = dy.row(r);
    const auto xh = x_hat.row(r);
    for (std::size_t c = 0; c < m; ++c) {
      g.dbeta[c] += d[c];
      g.dgamma[c] += d[c] * xh[c];
      const double dxh = d[c] * gamma[c];
      sum_dxhat[c] += dxh;
      sum_dxhat_xhat[c] += dxh * xh[c];
    }
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::size_t r = 0; r < b; ++r) {
    const auto d = dy.row(r);
    const auto xh = x_hat.row(r);
    auto dx = g.dx.row(r);
    for (std::size_t c = 0; c < m; ++c) {
      const double dxh = d[c] * gamma[c];
      dx[c] = cache.inv_std[c] * (dxh - inv_b * sum_dxhat[c] - xh[c] * inv_b * sum_dxhat_xhat[c]);
    }
  }
  return g;
}

Matrix dropout(const Matrix& x, double p, Rng& rng, Mode mode, Matrix* mask) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ParameterError("dropout: probability must be in [0, 1), got " + std::to_string(p));
  }
  if (mode == Mode::eval || p == 0.0) {
    if (mask != nullptr) *mask = Matrix(x.rows(), x.cols(), 1.0);
    return x;
  }
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix m(x.rows(), x.cols());
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = rng.uniform() < p ? 0.0 : keep_scale;
    m.values()[i] = s;
    y.values()[i] = x.values()[i] * s;
  }
  if (mask != nullptr) *mask = std::move(m);
  return y;
}

Matrix dropout_backward(const Matrix& mask, const Matrix& dy) {
  if (mask.rows() != dy.rows() || mask.cols() != dy.cols()) shape_error("dropout_backward", mask, dy);
  Matrix dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.values()[i] *= mask.values()[i];
  return dx;
}

double grad_check(const ScalarFn& f, std::span<const double> x0,
                  std::span<const double> analytic, double h) {
  if (!(h > 0.0)) throw ParameterError("grad_check: step must be positive");
  if (analytic.size() != x0.size()) throw DimensionError("grad_check: gradient length mismatch");
  Vector x(x0.begin(), x0.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double fp = f(x);
    x[i] = saved - h;
    const double fm = f(x);
    x[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw EvaluationError("grad_check: non-finite function value at coordinate " +
                            std::to_string(i));
    }
    const double fd = (fp - fm) / (2.0 * h);
    const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(fd)});
    worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
  }
  return worst;
}

}  // namespace fourierdg
