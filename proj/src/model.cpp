#include "fourierdg/model.hpp"

#include <cmath>
#include <string>

#include "fourierdg/error.hpp"
#include "fourierdg/losses.hpp"

namespace fourierdg {

namespace {

Dense glorot_dense(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Dense d{Matrix(fan_in, fan_out), Vector(fan_out, 0.0)};
  for (double& w : d.weight.values()) w = rng.uniform(-bound, bound);
  return d;
}

BatchNormAffine unit_bn(std::size_t width) {
  return {Vector(width, 1.0), Vector(width, 0.0)};
}

BatchNormState identity_stats(std::size_t width) {
  return {Vector(width, 0.0), Vector(width, 1.0)};
}

Dense zeros_like(const Dense& d) {
  return {Matrix(d.weight.rows(), d.weight.cols()), Vector(d.bias.size(), 0.0)};
}

BatchNormAffine zeros_like(const BatchNormAffine& bn) {
  return {Vector(bn.gamma.size(), 0.0), Vector(bn.beta.size(), 0.0)};
}

Matrix linear(const Matrix& x, const Dense& d) { return affine(x, d.weight, d.bias); }

}  // namespace

std::vector<std::span<double>> Weights::tensors() {
  return {enc1.weight.values(), enc1.bias, bn1.gamma, bn1.beta,
          enc2.weight.values(), enc2.bias, bn2.gamma, bn2.beta,
          classifier.weight.values(), classifier.bias,
          disc_hidden.weight.values(), disc_hidden.bias,
          disc_out.weight.values(), disc_out.bias};
}

std::vector<std::span<const double>> Weights::tensors() const {
  std::vector<std::span<const double>> out;
  for (auto s : const_cast<Weights*>(this)->tensors()) out.emplace_back(s);
  return out;
}

std::size_t Weights::parameter_count() const {
  std::size_t n = 0;
  for (auto s : tensors()) n += s.size();
  return n;
}

Weights zeros_like(const Weights& w) {
  return {zeros_like(w.enc1),       zeros_like(w.bn1),         zeros_like(w.enc2),
          zeros_like(w.bn2),        zeros_like(w.classifier),  zeros_like(w.disc_hidden),
          zeros_like(w.disc_out)};
}

ModelParams init_params(const ModelShape& shape, Rng& rng) {
  if (shape.genes < 1) throw ParameterError("init_params: gene count must be >= 1");
  if (shape.domains < 2) throw ParameterError("init_params: need at least 2 domains");
  ModelParams p;
  p.shape = shape;
  p.basis = std::make_shared<const FourierBasis>(shape.feature_dim);
  p.weights.enc1 = glorot_dense(shape.genes, shape.hidden, rng);
  p.weights.bn1 = unit_bn(shape.hidden);
  p.weights.enc2 = glorot_dense(shape.hidden, shape.feature_dim, rng);
  p.weights.bn2 = unit_bn(shape.feature_dim);
  p.weights.classifier = glorot_dense(shape.feature_dim, 1, rng);
  p.weights.disc_hidden = glorot_dense(shape.feature_dim, shape.disc_hidden, rng);
  p.weights.disc_out = glorot_dense(shape.disc_hidden, shape.domains, rng);
  p.bn1_state = identity_stats(shape.hidden);
  p.bn2_state = identity_stats(shape.feature_dim);
  return p;
}

ModelParams init_params(std::size_t gene_count, std::size_t domains, Rng& rng) {
  ModelShape shape;
  shape.genes = gene_count;
  shape.domains = domains;
  return init_params(shape, rng);
}

Matrix grl_backward(const Matrix& upstream, double coefficient) {
  if (!(coefficient >= 0.0) || !std::isfinite(coefficient)) {
    throw ParameterError("GRL coefficient must be finite and non-negative");
  }
  Matrix out = upstream;
  for (double& v : out.values()) v = coefficient == 0.0 ? 0.0 : -coefficient * v;
  return out;
}

void check_input_width(const Matrix& x, const ModelParams& params) {
  if (x.cols() != params.shape.genes) {
    throw DimensionError("model expects " + std::to_string(params.shape.genes) +
                         " genes per sample, input has " + std::to_string(x.cols()));
  }
}

// --- ForwardPass -------------------------------------------------------------

Matrix ForwardPass::run_block(const Matrix& x, Block& block, Dense Weights::*dense,
                              BatchNormAffine Weights::*bn, BatchNormState& state, Rng rng,
                              Matrix* grad_input) {
  const Dense& layer = params_.weights.*dense;
  const BatchNormAffine& norm = params_.weights.*bn;
  block.input = x;

  Matrix a = linear(x, layer);
  tape_.record([this, &block, dense, grad_input] {
    const Dense& w = params_.weights.*dense;
    AffineGrads g = affine_backward(block.input, w.weight, block.grad_out);
    Dense& dst = grads_->*dense;
    add_inplace(dst.weight, g.dweight);
    add_inplace(dst.bias, g.dbias);
    if (grad_input != nullptr) *grad_input = std::move(g.dx);
  });

  Matrix n;
  if (mode_ == Mode::train) {
    n = batchnorm(a, norm.gamma, norm.beta, state, Mode::train, &block.bn);
  } else {
    n = batchnorm_eval(a, norm.gamma, norm.beta, state);
  }
  tape_.record([this, &block, bn] {
    const BatchNormAffine& w = params_.weights.*bn;
    BatchNormGrads g = batchnorm_backward(block.bn, w.gamma, block.grad_out);
    BatchNormAffine& dst = grads_->*bn;
    add_inplace(dst.gamma, g.dgamma);
    add_inplace(dst.beta, g.dbeta);
    block.grad_out = std::move(g.dx);
  });

  Matrix r = relu(n);
  block.normalized = std::move(n);
  tape_.record([&block] { block.grad_out = relu_backward(block.normalized, block.grad_out); });

  Matrix out = dropout(r, dropout_p_, rng, mode_, &block.mask);
  tape_.record([&block] { block.grad_out = dropout_backward(block.mask, block.grad_out); });
  return out;
}

ForwardPass::ForwardPass(ModelParams& params, const Matrix& x, const GrlConfig& grl,
                         Mode mode, double dropout_p, Rng rng)
    : params_(params), grl_(grl), mode_(mode), dropout_p_(dropout_p) {
  check_input_width(x, params_);
  if (!(grl.coefficient >= 0.0) || !std::isfinite(grl.coefficient)) {
    throw ParameterError("GRL coefficient must be finite and non-negative");
  }
  const FourierBasis& basis = *params_.basis;

  Matrix h1 = run_block(x, block1_, &Weights::enc1, &Weights::bn1, params_.bn1_state,
                        rng.fork(1), nullptr);
  out_.h = run_block(h1, block2_, &Weights::enc2, &Weights::bn2, params_.bn2_state,
                     rng.fork(2), &block1_.grad_out);

  out_.z = project(out_.h, basis);
  tape_.record([this] { block2_.grad_out = project_backward(grad_z_, *params_.basis); });

  const Matrix logit = linear(out_.z, params_.weights.classifier);
  out_.response_logit.assign(logit.values().begin(), logit.values().end());
  out_.p_response.resize(out_.response_logit.size());
  for (std::size_t i = 0; i < out_.response_logit.size(); ++i)
    out_.p_response[i] = sigmoid(out_.response_logit[i]);
  tape_.record([this] {
    const Matrix dy(grad_logit_.size(), 1, grad_logit_);
    AffineGrads g = affine_backward(out_.z, params_.weights.classifier.weight, dy);
    add_inplace(grads_->classifier.weight, g.dweight);
    add_inplace(grads_->classifier.bias, g.dbias);
    add_inplace(grad_z_, g.dx);
  });

  // GRL is the identity going forward; the discriminator reads z directly.
  disc_pre_relu_ = linear(out_.z, params_.weights.disc_hidden);
  tape_.record([this] {
    AffineGrads g =
        affine_backward(out_.z, params_.weights.disc_hidden.weight, grad_disc_hidden_);
    add_inplace(grads_->disc_hidden.weight, g.dweight);
    add_inplace(grads_->disc_hidden.bias, g.dbias);
    add_inplace(grad_z_, grl_backward(g.dx, grl_.coefficient));
  });

  disc_hidden_out_ = relu(disc_pre_relu_);
  tape_.record([this] {
    grad_disc_hidden_ = relu_backward(disc_pre_relu_, grad_disc_hidden_);
  });

  out_.domain_logits = linear(disc_hidden_out_, params_.weights.disc_out);
  tape_.record([this] {
    AffineGrads g =
        affine_backward(disc_hidden_out_, params_.weights.disc_out.weight, grad_domain_);
    add_inplace(grads_->disc_out.weight, g.dweight);
    add_inplace(grads_->disc_out.bias, g.dbias);
    grad_disc_hidden_ = std::move(g.dx);
  });
}

void ForwardPass::backward(const Matrix& grad_z, std::span<const double> grad_response_logit,
                           const Matrix& grad_domain_logits, Weights& grads) {
  if (mode_ != Mode::train) throw Error("ForwardPass: backward requires a train-mode pass");
  const std::size_t b = out_.z.rows();
  if (grad_z.rows() != b || grad_z.cols() != out_.z.cols() ||
      grad_response_logit.size() != b || grad_domain_logits.rows() != b ||
      grad_domain_logits.cols() != out_.domain_logits.cols()) {
    throw DimensionError("ForwardPass::backward: seed gradient shapes do not match outputs");
  }
  grads_ = &grads;
  grad_z_ = grad_z;
  grad_logit_.assign(grad_response_logit.begin(), grad_response_logit.end());
  grad_domain_ = grad_domain_logits;
  tape_.backward();
  grads_ = nullptr;
}

// --- eval-mode helpers -------------------------------------------------------

namespace {

Matrix eval_block(const Matrix& x, const Dense& dense, const BatchNormAffine& bn,
                  const BatchNormState& state) {
  return relu(batchnorm_eval(linear(x, dense), bn.gamma, bn.beta, state));
}

}  // namespace

Matrix encode(const Matrix& x, const ModelParams& params) {
  check_input_width(x, params);
  const Weights& w = params.weights;
  const Matrix h1 = eval_block(x, w.enc1, w.bn1, params.bn1_state);
  return eval_block(h1, w.enc2, w.bn2, params.bn2_state);
}

ForwardOutputs forward_full(const Matrix& x, const ModelParams& params) {
  ForwardOutputs out;
  out.h = encode(x, params);
  out.z = project(out.h, *params.basis);
  const Matrix logit = linear(out.z, params.weights.classifier);
  out.response_logit.assign(logit.values().begin(), logit.values().end());
  out.p_response.resize(out.response_logit.size());
  for (std::size_t i = 0; i < out.response_logit.size(); ++i)
    out.p_response[i] = sigmoid(out.response_logit[i]);
  out.domain_logits =
      linear(relu(linear(out.z, params.weights.disc_hidden)), params.weights.disc_out);
  return out;
}

}  // namespace fourierdg
