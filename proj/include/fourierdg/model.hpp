#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fourierdg/fourier.hpp"
#include "fourierdg/tensor.hpp"

namespace fourierdg {

// Layer widths. The defaults are the standard encoder (1024 -> 740) with a
// 256-unit discriminator hidden layer.
struct ModelShape {
  std::size_t genes = 0;
  std::size_t hidden = 1024;
  std::size_t feature_dim = 740;
  std::size_t disc_hidden = 256;
  std::size_t domains = 2;

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

struct Dense {
  Matrix weight;  // fan_in x fan_out
  Vector bias;
};

struct BatchNormAffine {
  Vector gamma;
  Vector beta;
};

// Every trainable tensor. Also used as the gradient and Adam moment
// containers, so all three share one layout.
struct Weights {
  Dense enc1;
  BatchNormAffine bn1;
  Dense enc2;
  BatchNormAffine bn2;
  Dense classifier;
  Dense disc_hidden;
  Dense disc_out;

  // Flat views over every tensor in a fixed order.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::size_t parameter_count() const;
};

Weights zeros_like(const Weights& w);

struct ModelParams {
  ModelShape shape;
  Weights weights;
  BatchNormState bn1_state;
  BatchNormState bn2_state;
  std::vector<std::string> gene_list;
  std::shared_ptr<const FourierBasis> basis;
};

struct GrlConfig {
  double coefficient = 1.0;
};

// Glorot-uniform weights, zero biases, unit BN scale, identity running stats.
ModelParams init_params(const ModelShape& shape, Rng& rng);
ModelParams init_params(std::size_t gene_count, std::size_t domains, Rng& rng);

struct ForwardOutputs {
  Matrix h;                 // encoder features, b x d
  Matrix z;                 // Fourier coefficients, b x d
  Vector response_logit;    // classifier logit per sample
  Vector p_response;        // sigmoid(response_logit)
  Matrix domain_logits;     // b x domains
};

// Identity in the forward direction; backward scales by -coefficient.
Matrix grl_backward(const Matrix& upstream, double coefficient);

// One recorded forward pass through encoder, Fourier projection, classifier
// and GRL + discriminator. In train mode batch-norm running statistics in
// `params` are updated and dropout masks are drawn from `rng`.
class ForwardPass {
 public:
  ForwardPass(ModelParams& params, const Matrix& x, const GrlConfig& grl, Mode mode,
              double dropout_p, Rng rng);

  ForwardPass(const ForwardPass&) = delete;
  ForwardPass& operator=(const ForwardPass&) = delete;

  const ForwardOutputs& outputs() const { return out_; }

  // Accumulates parameter gradients into `grads` given the loss gradient with
  // respect to z (from terms applied directly to z), the response logits and
  // the domain logits. The domain branch reaches the encoder through the GRL.
  void backward(const Matrix& grad_z, std::span<const double> grad_response_logit,
                const Matrix& grad_domain_logits, Weights& grads);

 private:
  // Linear -> BatchNorm -> ReLU -> Dropout
  struct Block {
    Matrix input;
    BatchNormCache bn;
    Matrix normalized;
    Matrix mask;
    Matrix grad_out;
  };

  Matrix run_block(const Matrix& x, Block& block, Dense Weights::*dense,
                   BatchNormAffine Weights::*bn, BatchNormState& state, Rng rng,
                   Matrix* grad_input);

  ModelParams& params_;
  GrlConfig grl_;
  Mode mode_;
  double dropout_p_;
  ForwardOutputs out_;
  GradTape tape_;
  Weights* grads_ = nullptr;

  Block block1_, block2_;
  Matrix disc_pre_relu_;
  Matrix disc_hidden_out_;

  Matrix grad_z_;
  Vector grad_logit_;
  Matrix grad_domain_;
  Matrix grad_disc_hidden_;
};

// Eval-mode encoder; pure function of its inputs.
Matrix encode(const Matrix& x, const ModelParams& params);
// Eval-mode full forward; pure function of its inputs.
ForwardOutputs forward_full(const Matrix& x, const ModelParams& params);

void check_input_width(const Matrix& x, const ModelParams& params);

}  // namespace fourierdg
