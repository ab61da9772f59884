#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fourierdg/tensor.hpp"

namespace fourierdg {

// Per-sample labels of a mini-batch. response: 1 = sensitive, 0 = resistant.
struct BatchLabels {
  std::vector<int> response;
  std::vector<int> domain;
};

struct MatrixLoss {
  double value = 0.0;
  Matrix grad;
  // Set when the batch had no positive anchor, or no anchor had any
  // positive or negative partner, so the loss is identically 0.
  bool degenerate = false;
};

struct VectorLoss {
  double value = 0.0;
  Vector grad;
};

struct LossBreakdown {
  double l_asy = 0.0;
  double l_adv = 0.0;
  double l_cls = 0.0;
  double total = 0.0;
};

inline constexpr double kCosineEps = 1e-12;
inline constexpr double kProbClamp = 1e-12;

// Asymmetric cosine loss in frequency space. Every sensitive sample acts as
// an anchor: its mean cosine to the other sensitive samples is rewarded and
// its mean cosine to the resistant samples is penalized. The loss is the
// mean over anchors. Resistant samples are never compared with each other.
MatrixLoss asymmetric_loss(const Matrix& z, std::span<const int> response);

// Mean softmax cross-entropy of domain logits; grad = (softmax - onehot) / b.
MatrixLoss domain_adversarial_loss(const Matrix& logits, std::span<const int> domain);

// Mean binary cross-entropy of probabilities (clamped to [1e-12, 1-1e-12]);
// grad is with respect to p.
VectorLoss classification_loss(std::span<const double> p, std::span<const int> response);

// Same loss expressed on the pre-sigmoid logit, evaluated stably; grad is
// with respect to the logit: (sigmoid(logit) - y) / b.
VectorLoss classification_loss_logits(std::span<const double> logits,
                                      std::span<const int> response);

LossBreakdown total_loss(double l_asy, double l_adv, double l_cls, double lambda1,
                         double lambda2);

// Scaled dot-product similarity z_i.z_j / sqrt(d). Inspection only.
Matrix attention_diagnostic(const Matrix& z);

double sigmoid(double x);

}  // namespace fourierdg
