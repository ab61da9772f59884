#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "fourierdg/error.hpp"
#include "fourierdg/eval.hpp"
#include "fourierdg/synth.hpp"
#include "fourierdg/train.hpp"

using namespace fourierdg;

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.hidden = 16;
  cfg.feature_dim = 8;
  cfg.disc_hidden = 6;
  cfg.batch_size = 16;
  cfg.epochs = 3;
  cfg.lr = 1e-3;
  cfg.seed = 5;
  return cfg;
}

LabeledData small_data(std::uint64_t seed = 0) {
  SynthConfig sc;
  sc.domains = 3;
  sc.genes = 20;
  sc.samples_per_domain = 20;
  sc.seed = seed;
  const SynthData d = generate(sc);
  const Standardized st = zscore_fit_apply(d.expr);
  return make_labeled(Dataset{st.data, d.meta});
}

std::vector<std::size_t> sizes(const std::vector<std::vector<std::size_t>>& batches) {
  std::vector<std::size_t> out;
  for (const auto& b : batches) out.push_back(b.size());
  return out;
}

bool same_params(const ModelParams& a, const ModelParams& b) {
  const auto ta = a.weights.tensors();
  const auto tb = b.weights.tensors();
  for (std::size_t k = 0; k < ta.size(); ++k)
    if (!std::equal(ta[k].begin(), ta[k].end(), tb[k].begin(), tb[k].end())) return false;
  return a.bn1_state.running_mean == b.bn1_state.running_mean &&
         a.bn2_state.running_var == b.bn2_state.running_var;
}

}  // namespace

TEST_CASE("make_batches chunking and merge rule") {
  Rng a(1), b(1);
  CHECK(sizes(make_batches(10, 4, a)) == std::vector<std::size_t>{4, 4, 2});
  CHECK(sizes(make_batches(5, 4, a)) == std::vector<std::size_t>{5});
  CHECK(sizes(make_batches(9, 4, a)) == std::vector<std::size_t>{4, 5});
  Rng c(7), d(7);
  CHECK(make_batches(50, 8, c) == make_batches(50, 8, d));

  Rng e(3);
  const auto batches = make_batches(23, 6, e);
  std::vector<std::size_t> all;
  for (const auto& batch : batches) all.insert(all.end(), batch.begin(), batch.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 23; ++i) CHECK(all[i] == i);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.lambda1 = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(TrainConfig{}.lr == 8e-5);
  CHECK(TrainConfig{}.dropout_p == 0.1);
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  Rng rng(2);
  ModelShape s;
  s.genes = 5;
  s.hidden = 4;
  s.feature_dim = 4;
  s.disc_hidden = 3;
  ModelParams p = init_params(s, rng);
  const ModelParams before = p;
  Adam adam(p.weights, AdamConfig{});
  const Weights zero = zeros_like(p.weights);
  for (int i = 0; i < 5; ++i) adam.step(p.weights, zero);
  CHECK(adam.steps() == 5);
  CHECK(same_params(p, before));
}

TEST_CASE("adam first step moves each parameter by lr against the gradient sign") {
  Rng rng(2);
  ModelShape s;
  s.genes = 3;
  s.hidden = 2;
  s.feature_dim = 2;
  s.disc_hidden = 2;
  ModelParams p = init_params(s, rng);
  const ModelParams before = p;
  Weights g = zeros_like(p.weights);
  for (auto t : g.tensors())
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (i % 2 ? 0.3 : -2.0);
  Adam adam(p.weights, AdamConfig{.lr = 0.01});
  adam.step(p.weights, g);
  const auto after = p.weights.tensors();
  const auto orig = before.weights.tensors();
  for (std::size_t k = 0; k < after.size(); ++k)
    for (std::size_t i = 0; i < after[k].size(); ++i)
      CHECK(after[k][i] - orig[k][i] == doctest::Approx(i % 2 ? -0.01 : 0.01).epsilon(1e-6));
}

TEST_CASE("switch semantics with zero weights") {
  const LabeledData data = small_data();
  TrainConfig cfg = small_config();
  cfg.lambda1 = 0;
  cfg.lambda2 = 0;
  cfg.grl_coefficient = 0;
  Rng rng(1);
  ModelShape shape{20, 16, 8, 6, 3};
  ModelParams params = init_params(shape, rng);
  std::vector<std::size_t> rows(16);
  std::iota(rows.begin(), rows.end(), 0);
  const Matrix x = gather_rows(data.x, rows);
  BatchLabels labels;
  for (auto r : rows) {
    labels.response.push_back(data.response[r]);
    labels.domain.push_back(data.domain[r]);
  }
  const BatchResult res = compute_batch(params, x, labels, cfg, Rng(3));
  CHECK(res.losses.total == res.losses.l_adv);
  CHECK(res.losses.l_asy == 0.0);
  for (double v : res.grads.classifier.weight.values()) CHECK(v == 0.0);
  for (double v : res.grads.classifier.bias) CHECK(v == 0.0);
  for (double v : res.grads.enc1.weight.values()) CHECK(v == 0.0);
  double disc = 0.0;
  for (double v : res.grads.disc_out.weight.values()) disc += std::abs(v);
  CHECK(disc > 0.0);
}

TEST_CASE("fit is deterministic and disabling FAAC equals zero weight") {
  const LabeledData data = small_data();
  const TrainConfig cfg = small_config();
  const FitResult a = fit(data, cfg);
  const FitResult b = fit(data, cfg);
  CHECK(a.log.size() == cfg.epochs);
  CHECK(a.log == b.log);
  CHECK(same_params(a.params, b.params));

  TrainConfig off = cfg;
  off.faac_enabled = false;
  TrainConfig zero = cfg;
  zero.lambda1 = 0.0;
  const FitResult c = fit(data, off);
  const FitResult d = fit(data, zero);
  CHECK(c.log == d.log);
  CHECK(same_params(c.params, d.params));
  for (const auto& e : c.log) CHECK(e.losses.l_asy == 0.0);
  CHECK_FALSE(c.log == a.log);
}

TEST_CASE("fit rejects unusable training data") {
  LabeledData data = small_data();
  LabeledData one_domain = data;
  std::fill(one_domain.domain.begin(), one_domain.domain.end(), 0);
  one_domain.domain_names = {"D0"};
  CHECK_THROWS_AS(fit(one_domain, small_config()), ConfigError);
  LabeledData one_class = data;
  std::fill(one_class.response.begin(), one_class.response.end(), 1);
  CHECK_THROWS_AS(fit(one_class, small_config()), ConfigError);
}

TEST_CASE("validation AUROC is logged when a validation set is given") {
  const LabeledData train = small_data(0);
  const LabeledData val = small_data(1);
  FitOptions opts;
  opts.validation = &val;
  int calls = 0;
  opts.on_epoch = [&](const EpochLog&) { ++calls; };
  const FitResult r = fit(train, small_config(), opts);
  CHECK(calls == 3);
  for (const auto& e : r.log) {
    REQUIRE(e.val_auc.has_value());
    CHECK(*e.val_auc >= 0.0);
    CHECK(*e.val_auc <= 1.0);
  }
  const std::string csv = training_log_csv(r.log);
  CHECK(csv.rfind("epoch,l_asy,l_adv,l_cls,total,train_auc,val_auc\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("checkpoint round trip is bitwise") {
  const LabeledData data = small_data();
  const FitResult r = fit(data, small_config());
  Checkpoint ckpt;
  ckpt.params = r.params;
  ckpt.params.gene_list.clear();
  for (int g = 0; g < 20; ++g) ckpt.params.gene_list.push_back("g" + std::to_string(g));
  ckpt.norm.genes = ckpt.params.gene_list;
  ckpt.norm.mean.assign(20, 0.125);
  ckpt.norm.std.assign(20, 1.0 / 3.0);
  ckpt.config = small_config();
  ckpt.domain_names = data.domain_names;
  const std::string text = checkpoint_to_json(ckpt);
  const Checkpoint back = checkpoint_from_json(text);
  CHECK(same_params(back.params, ckpt.params));
  CHECK(back.norm == ckpt.norm);
  CHECK(back.params.shape == ckpt.params.shape);
  CHECK(checkpoint_to_json(back) == text);

  const auto path = std::filesystem::temp_directory_path() / "fourierdg_test_ckpt.json";
  save_checkpoint(ckpt, path);
  CHECK(checkpoint_to_json(load_checkpoint(path)) == text);
  CHECK_THROWS_AS(checkpoint_from_json("{not json"), ParseError);
}

TEST_CASE("predict aligns genes and returns probabilities") {
  SynthConfig sc;
  sc.domains = 3;
  sc.genes = 20;
  sc.samples_per_domain = 20;
  const SynthData d = generate(sc);
  const Standardized st = zscore_fit_apply(d.expr);
  const FitResult r = fit(make_labeled(Dataset{st.data, d.meta}), small_config());
  Checkpoint ckpt;
  ckpt.params = r.params;
  ckpt.params.gene_list = d.expr.gene_names;
  ckpt.norm = st.stats;

  const Vector direct = predict(d.expr, ckpt);
  for (double p : direct) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  std::vector<std::string> reversed(d.expr.gene_names.rbegin(), d.expr.gene_names.rend());
  const Vector shuffled = predict(align_genes(d.expr, reversed), ckpt);
  CHECK(shuffled == direct);

  GeneMatrix missing = d.expr;
  missing.gene_names[0] = "other";
  CHECK_THROWS_AS(predict(missing, ckpt), AlignmentError);
}

TEST_CASE("converged run on the default synthetic benchmark") {
  const SynthData d = generate(SynthConfig{});
  const Standardized st = zscore_fit_apply(d.expr);
  const LabeledData data = make_labeled(Dataset{st.data, d.meta});
  TrainConfig cfg;
  cfg.epochs = 50;
  const FitResult r = fit(data, cfg);
  REQUIRE(r.log.size() == 50);
  CHECK(r.log.back().train_auc > 0.95);
  CHECK(auroc(predict_scores(data.x, r.params), data.response) > 0.95);

  // Smoothed classification loss trends down.
  auto window = [&](std::size_t from) {
    double s = 0;
    for (std::size_t e = from; e < from + 5; ++e) s += r.log[e].losses.l_cls;
    return s / 5;
  };
  CHECK(window(45) < window(0));
}
