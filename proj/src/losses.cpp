#include "fourierdg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fourierdg/error.hpp"

namespace fourierdg {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

MatrixLoss asymmetric_loss(const Matrix& z, std::span<const int> response) {
  const std::size_t b = z.rows();
  if (response.size() != b) {
    throw DimensionError("asymmetric_loss: " + std::to_string(response.size()) +
                         " labels for " + std::to_string(b) + " rows");
  }
  MatrixLoss out{0.0, Matrix(b, z.cols()), false};

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < b; ++i) (response[i] == 1 ? pos : neg).push_back(i);
  if (pos.empty() || (pos.size() < 2 && neg.empty())) {
    out.degenerate = true;
    return out;
  }

  // Pair weights W[i][o]: the loss is sum_{i,o} W[i][o] * cos(z_i, z_o).
  const double per_anchor = 1.0 / static_cast<double>(pos.size());
  const double w_pos = pos.size() > 1 ? -per_anchor / static_cast<double>(pos.size() - 1) : 0.0;
  const double w_neg = neg.empty() ? 0.0 : per_anchor / static_cast<double>(neg.size());

  Vector norms(b);
  Matrix unit(b, z.cols());
  for (std::size_t i = 0; i < b; ++i) {
    double sq = 0.0;
    for (double v : z.row(i)) sq += v * v;
    norms[i] = std::max(std::sqrt(sq), kCosineEps);
    auto u = unit.row(i);
    const auto src = z.row(i);
    for (std::size_t c = 0; c < u.size(); ++c) u[c] = src[c] / norms[i];
  }
  const Matrix cos = matmul_bt(unit, unit);

  // Symmetrized weights: dL/dU = (W + W^T) U.
  Matrix sym(b, b);
  double loss = 0.0;
  for (std::size_t i : pos) {
    for (std::size_t j : pos) {
      if (j == i) continue;
      loss += w_pos * cos(i, j);
      sym(i, j) += w_pos;
      sym(j, i) += w_pos;
    }
    for (std::size_t k : neg) {
      loss += w_neg * cos(i, k);
      sym(i, k) += w_neg;
      sym(k, i) += w_neg;
    }
  }
  out.value = loss;

  const Matrix dunit = matmul(sym, unit);
  for (std::size_t i = 0; i < b; ++i) {
    const auto du = dunit.row(i);
    const auto u = unit.row(i);
    auto dz = out.grad.row(i);
    const bool clamped = norms[i] <= kCosineEps;
    double radial = 0.0;
    if (!clamped)
      for (std::size_t c = 0; c < u.size(); ++c) radial += du[c] * u[c];
    for (std::size_t c = 0; c < u.size(); ++c) dz[c] = (du[c] - radial * u[c]) / norms[i];
  }
  return out;
}

MatrixLoss domain_adversarial_loss(const Matrix& logits, std::span<const int> domain) {
  const std::size_t b = logits.rows();
  const std::size_t m = logits.cols();
  if (m < 2) throw ParameterError("domain_adversarial_loss: need at least 2 domains");
  if (domain.size() != b) {
    throw DimensionError("domain_adversarial_loss: " + std::to_string(domain.size()) +
                         " labels for " + std::to_string(b) + " rows");
  }
  MatrixLoss out{0.0, Matrix(b, m), false};
  if (b == 0) return out;
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::size_t i = 0; i < b; ++i) {
    const int label = domain[i];
    if (label < 0 || static_cast<std::size_t>(label) >= m) {
      throw LabelError("domain label " + std::to_string(label) + " outside [0, " +
                       std::to_string(m) + ")");
    }
    const auto row = logits.row(i);
    const double peak = *std::max_element(row.begin(), row.end());
    double denom = 0.0;
    for (double v : row) denom += std::exp(v - peak);
    const double log_denom = std::log(denom);
    out.value += (log_denom - (row[label] - peak)) * inv_b;
    auto g = out.grad.row(i);
    for (std::size_t c = 0; c < m; ++c) {
      const double prob = std::exp(row[c] - peak - log_denom);
      g[c] = (prob - (static_cast<std::size_t>(label) == c ? 1.0 : 0.0)) * inv_b;
    }
  }
  return out;
}

VectorLoss classification_loss(std::span<const double> p, std::span<const int> response) {
  if (p.size() != response.size()) throw DimensionError("classification_loss: length mismatch");
  VectorLoss out{0.0, Vector(p.size(), 0.0)};
  if (p.empty()) return out;
  const double inv_b = 1.0 / static_cast<double>(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], kProbClamp, 1.0 - kProbClamp);
    const double y = response[i];
    out.value -= (y * std::log(q) + (1.0 - y) * std::log(1.0 - q)) * inv_b;
    const bool clamped = q != p[i];
    out.grad[i] = clamped ? 0.0 : (-y / q + (1.0 - y) / (1.0 - q)) * inv_b;
  }
  return out;
}

VectorLoss classification_loss_logits(std::span<const double> logits,
                                      std::span<const int> response) {
  if (logits.size() != response.size()) {
    throw DimensionError("classification_loss_logits: length mismatch");
  }
  VectorLoss out{0.0, Vector(logits.size(), 0.0)};
  if (logits.empty()) return out;
  const double inv_b = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = logits[i];
    const double y = response[i];
    // -[y log s(x) + (1-y) log(1-s(x))] = softplus(x) - y x
    const double softplus = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    out.value += (softplus - y * x) * inv_b;
    out.grad[i] = (sigmoid(x) - y) * inv_b;
  }
  return out;
}

LossBreakdown total_loss(double l_asy, double l_adv, double l_cls, double lambda1,
                         double lambda2) {
  if (!(std::isfinite(lambda1) && lambda1 >= 0.0 && std::isfinite(lambda2) && lambda2 >= 0.0)) {
    throw ParameterError("loss weights must be finite and non-negative");
  }
  return {l_asy, l_adv, l_cls, l_adv + lambda1 * l_asy + lambda2 * l_cls};
}

Matrix attention_diagnostic(const Matrix& z) {
  Matrix alpha = matmul_bt(z, z);
  const double scale = 1.0 / std::sqrt(static_cast<double>(z.cols()));
  for (double& v : alpha.values()) v *= scale;
  return alpha;
}

}  // namespace fourierdg
