#include "fourierdg/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "fourierdg/error.hpp"
#include "fourierdg/eval.hpp"

namespace fourierdg {

namespace {

enum : std::uint64_t {
  kInitStream = 1,
  kBatchStream = 2,
  kDropoutStream = 3,
};

}  // namespace

void TrainConfig::validate() const {
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!finite_nonneg(lambda1)) throw ConfigError("lambda1 must be finite and >= 0");
  if (!finite_nonneg(lambda2)) throw ConfigError("lambda2 must be finite and >= 0");
  if (!(std::isfinite(lr) && lr > 0.0)) throw ConfigError("lr must be > 0");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!finite_nonneg(grl_coefficient)) throw ConfigError("grl coefficient must be finite and >= 0");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (hidden < 1 || disc_hidden < 1) throw ConfigError("layer widths must be >= 1");
  if (feature_dim < 2 || feature_dim % 2 != 0) throw ConfigError("feature_dim must be even and >= 2");
}

LabeledData make_labeled(const Dataset& ds) {
  LabeledData out;
  out.x = ds.expr.values;
  out.response = responses(ds.meta);
  out.domain_names = domain_names(ds.meta);
  for (const auto& m : ds.meta) {
    const auto it = std::lower_bound(out.domain_names.begin(), out.domain_names.end(), m.domain);
    out.domain.push_back(static_cast<int>(it - out.domain_names.begin()));
  }
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   Rng& rng) {
  if (batch_size < 1) throw ParameterError("make_batches: batch_size must be >= 1");
  const std::vector<std::size_t> order = permutation(n, rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.size() >= 2 && batches.back().size() < 2) {
    auto tail = std::move(batches.back());
    batches.pop_back();
    batches.back().insert(batches.back().end(), tail.begin(), tail.end());
  }
  return batches;
}

// --- Adam --------------------------------------------------------------------

Adam::Adam(const Weights& like, AdamConfig cfg)
    : cfg_(cfg), m_(zeros_like(like)), v_(zeros_like(like)) {}

void Adam::step(Weights& params, const Weights& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto m = m_.tensors();
  auto v = v_.tensors();
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (g[t].size() != p[t].size()) throw DimensionError("Adam: gradient layout mismatch");
    for (std::size_t i = 0; i < p[t].size(); ++i) {
      const double gi = g[t][i];
      m[t][i] = cfg_.beta1 * m[t][i] + (1.0 - cfg_.beta1) * gi;
      v[t][i] = cfg_.beta2 * v[t][i] + (1.0 - cfg_.beta2) * gi * gi;
      const double m_hat = m[t][i] / bc1;
      const double v_hat = v[t][i] / bc2;
      p[t][i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

// --- training ----------------------------------------------------------------

BatchResult compute_batch(ModelParams& params, const Matrix& x, const BatchLabels& labels,
                          const TrainConfig& cfg, Rng dropout_rng) {
  ForwardPass pass(params, x, GrlConfig{cfg.grl_coefficient}, Mode::train, cfg.dropout_p,
                   dropout_rng);
  const ForwardOutputs& out = pass.outputs();

  const VectorLoss cls = classification_loss_logits(out.response_logit, labels.response);
  const MatrixLoss adv = domain_adversarial_loss(out.domain_logits, labels.domain);

  BatchResult result;
  Matrix grad_z(out.z.rows(), out.z.cols());
  double l_asy = 0.0;
  if (cfg.asymmetric_active()) {
    MatrixLoss asy = asymmetric_loss(out.z, labels.response);
    l_asy = asy.value;
    result.asy_degenerate = asy.degenerate;
    grad_z = std::move(asy.grad);
    for (double& v : grad_z.values()) v *= cfg.lambda1;
  }
  Vector grad_logit = cls.grad;
  for (double& v : grad_logit) v *= cfg.lambda2;

  result.losses = total_loss(l_asy, adv.value, cls.value, cfg.lambda1, cfg.lambda2);
  result.grads = zeros_like(params.weights);
  pass.backward(grad_z, grad_logit, adv.grad, result.grads);
  return result;
}

Vector predict_scores(const Matrix& x, const ModelParams& params) {
  return forward_full(x, params).p_response;
}

namespace {

// Logits rank identically to probabilities but do not saturate.
double epoch_auc(const Matrix& x, const std::vector<int>& y, const ModelParams& params) {
  const bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
  const bool has_neg = std::find(y.begin(), y.end(), 0) != y.end();
  if (!has_pos || !has_neg) return std::nan("");
  return auroc(forward_full(x, params).response_logit, y);
}

}  // namespace

FitResult fit(const LabeledData& train, const TrainConfig& cfg, const FitOptions& opts) {
  cfg.validate();
  const std::size_t n = train.x.rows();
  if (train.response.size() != n || train.domain.size() != n) {
    throw DimensionError("fit: label count does not match sample count");
  }
  std::vector<bool> seen(train.domain_names.size(), false);
  for (int d : train.domain) {
    if (d < 0 || static_cast<std::size_t>(d) >= seen.size()) throw LabelError("fit: domain index out of range");
    seen[static_cast<std::size_t>(d)] = true;
  }
  if (std::count(seen.begin(), seen.end(), true) < 2) {
    throw ConfigError("fit: training data must span at least 2 domains");
  }
  const auto positives = std::count(train.response.begin(), train.response.end(), 1);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(n)) {
    throw ConfigError("fit: both response classes must be present");
  }
  if (!opts.gene_list.empty() && opts.gene_list.size() != train.x.cols()) {
    throw DimensionError("fit: gene list length does not match input width");
  }

  const Rng root(cfg.seed);
  ModelShape shape;
  shape.genes = train.x.cols();
  shape.hidden = cfg.hidden;
  shape.feature_dim = cfg.feature_dim;
  shape.disc_hidden = cfg.disc_hidden;
  shape.domains = train.domain_names.size();
  Rng init_rng = root.fork(kInitStream);
  FitResult result{init_params(shape, init_rng), {}};
  result.params.gene_list = opts.gene_list;

  Adam adam(result.params.weights, AdamConfig{cfg.lr});
  const Rng batch_root = root.fork(kBatchStream);
  const Rng dropout_root = root.fork(kDropoutStream);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng batch_rng = batch_root.fork(epoch);
    const auto batches = make_batches(n, cfg.batch_size, batch_rng);
    const Rng epoch_dropout = dropout_root.fork(epoch);

    double sum_asy = 0.0, sum_adv = 0.0, sum_cls = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& idx = batches[b];
      const Matrix xb = gather_rows(train.x, idx);
      BatchLabels labels;
      for (std::size_t i : idx) {
        labels.response.push_back(train.response[i]);
        labels.domain.push_back(train.domain[i]);
      }
      BatchResult br = compute_batch(result.params, xb, labels, cfg, epoch_dropout.fork(b));
      adam.step(result.params.weights, br.grads);
      sum_asy += br.losses.l_asy;
      sum_adv += br.losses.l_adv;
      sum_cls += br.losses.l_cls;
    }

    const double nb = static_cast<double>(batches.size());
    EpochLog entry;
    entry.epoch = epoch + 1;
    entry.losses = total_loss(sum_asy / nb, sum_adv / nb, sum_cls / nb, cfg.lambda1, cfg.lambda2);
    entry.train_auc = epoch_auc(train.x, train.response, result.params);
    if (opts.validation != nullptr) {
      entry.val_auc = epoch_auc(opts.validation->x, opts.validation->response, result.params);
    }
    result.log.push_back(entry);
    if (opts.on_epoch) opts.on_epoch(entry);
  }
  return result;
}

Vector predict(const GeneMatrix& raw, const Checkpoint& ckpt) {
  const GeneMatrix aligned = align_genes(raw, ckpt.params.gene_list);
  const GeneMatrix standardized = apply_zscore(aligned, ckpt.norm);
  return predict_scores(standardized.values, ckpt.params);
}

// --- logs --------------------------------------------------------------------

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string training_log_csv(std::span<const EpochLog> log) {
  std::string out = "epoch,l_asy,l_adv,l_cls,total,train_auc,val_auc\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch) + "," + format_number(e.losses.l_asy) + "," +
           format_number(e.losses.l_adv) + "," + format_number(e.losses.l_cls) + "," +
           format_number(e.losses.total) + "," + format_number(e.train_auc) + ",";
    if (e.val_auc) out += format_number(*e.val_auc);
    out += "\n";
  }
  return out;
}

void write_training_log(std::span<const EpochLog> log, const std::filesystem::path& path) {
  write_text(path, training_log_csv(log));
}

}  // namespace fourierdg
