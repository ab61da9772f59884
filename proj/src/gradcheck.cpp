#include "fourierdg/gradcheck.hpp"

#include <algorithm>

#include "fourierdg/losses.hpp"
#include "fourierdg/model.hpp"
#include "fourierdg/train.hpp"

namespace fourierdg {

namespace {

struct Objective {
  std::string name;
  double w_asy;
  double w_adv;
  double w_cls;
};

struct Problem {
  ModelParams params;
  Matrix x;
  BatchLabels labels;
  double grl = 0.5;
};

Problem make_problem(std::uint64_t seed) {
  Rng rng(seed);
  ModelShape shape;
  shape.genes = 12;
  shape.hidden = 10;
  shape.feature_dim = 8;
  shape.disc_hidden = 6;
  shape.domains = 3;
  Problem p{init_params(shape, rng), Matrix(6, 12), {}};
  for (double& v : p.x.values()) v = rng.uniform(-1.0, 1.0);
  // Move biases and BN affine terms off their initial values so every
  // parameter has a generic gradient.
  for (auto t : p.params.weights.tensors())
    for (double& v : t) v += rng.uniform(-0.3, 0.3);
  p.labels.response = {1, 0, 1, 1, 0, 0};
  p.labels.domain = {0, 1, 2, 0, 1, 2};
  return p;
}

// Loss parts of one train-mode pass with dropout disabled.
LossBreakdown evaluate(const Problem& p, const Weights& w) {
  ModelParams params = p.params;
  params.weights = w;
  ForwardPass pass(params, p.x, GrlConfig{p.grl}, Mode::train, 0.0, Rng(0));
  const auto& out = pass.outputs();
  LossBreakdown parts;
  parts.l_asy = asymmetric_loss(out.z, p.labels.response).value;
  parts.l_adv = domain_adversarial_loss(out.domain_logits, p.labels.domain).value;
  parts.l_cls = classification_loss_logits(out.response_logit, p.labels.response).value;
  return parts;
}

Weights analytic(const Problem& p, const Objective& obj) {
  ModelParams params = p.params;
  ForwardPass pass(params, p.x, GrlConfig{p.grl}, Mode::train, 0.0, Rng(0));
  const auto& out = pass.outputs();
  MatrixLoss asy = asymmetric_loss(out.z, p.labels.response);
  MatrixLoss adv = domain_adversarial_loss(out.domain_logits, p.labels.domain);
  VectorLoss cls = classification_loss_logits(out.response_logit, p.labels.response);
  for (double& v : asy.grad.values()) v *= obj.w_asy;
  for (double& v : adv.grad.values()) v *= obj.w_adv;
  for (double& v : cls.grad) v *= obj.w_cls;
  Weights grads = zeros_like(params.weights);
  pass.backward(asy.grad, cls.grad, adv.grad, grads);
  return grads;
}

}  // namespace

GradCheckReport gradient_suite(std::uint64_t seed, double h) {
  const Problem problem = make_problem(seed);
  const std::vector<Objective> objectives{
      {"asymmetric", 1.0, 0.0, 0.0},
      {"domain_adversarial", 0.0, 1.0, 0.0},
      {"classification", 0.0, 0.0, 1.0},
      {"total", 0.7, 1.0, 1.3},
  };
  // Tensors 0..7 belong to the encoder (two dense + two batch-norm layers).
  constexpr std::size_t kEncoderTensors = 8;

  GradCheckReport report;
  report.parameters = problem.params.weights.parameter_count();
  for (const Objective& obj : objectives) {
    const Weights grads = analytic(problem, obj);
    const auto grad_tensors = grads.tensors();
    double worst = 0.0;
    for (std::size_t t = 0; t < grad_tensors.size(); ++t) {
      const bool encoder = t < kEncoderTensors;
      const double adv_sign = encoder ? -problem.grl : 1.0;
      const auto x0 = problem.params.weights.tensors()[t];
      auto f = [&](std::span<const double> x) {
        Weights w = problem.params.weights;
        auto dst = w.tensors()[t];
        std::copy(x.begin(), x.end(), dst.begin());
        const LossBreakdown parts = evaluate(problem, w);
        return obj.w_asy * parts.l_asy + adv_sign * obj.w_adv * parts.l_adv + obj.w_cls * parts.l_cls;
      };
      worst = std::max(worst, grad_check(f, x0, grad_tensors[t], h));
    }
    report.cases.push_back({obj.name, worst});
    report.max_rel_err = std::max(report.max_rel_err, worst);
  }
  return report;
}

}  // namespace fourierdg
