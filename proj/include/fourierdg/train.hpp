#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fourierdg/data.hpp"
#include "fourierdg/losses.hpp"
#include "fourierdg/model.hpp"

namespace fourierdg {

struct TrainConfig {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lr = 8e-5;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  bool faac_enabled = true;
  double grl_coefficient = 1.0;
  double dropout_p = 0.1;
  // Architecture widths; defaults are the standard encoder.
  std::size_t hidden = 1024;
  std::size_t feature_dim = 740;
  std::size_t disc_hidden = 256;

  void validate() const;
  // The asymmetric term is computed only when enabled with a positive weight,
  // so a zero weight and a disabled switch train identically.
  bool asymmetric_active() const { return faac_enabled && lambda1 > 0.0; }
};

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown losses;
  double train_auc = 0.0;
  std::optional<double> val_auc;

  friend bool operator==(const EpochLog& a, const EpochLog& b) {
    return a.epoch == b.epoch && a.losses.l_asy == b.losses.l_asy &&
           a.losses.l_adv == b.losses.l_adv && a.losses.l_cls == b.losses.l_cls &&
           a.losses.total == b.losses.total && a.train_auc == b.train_auc &&
           a.val_auc == b.val_auc;
  }
};

// Standardized inputs with integer labels ready for training.
struct LabeledData {
  Matrix x;
  std::vector<int> response;
  std::vector<int> domain;       // index into domain_names
  std::vector<std::string> domain_names;
};

LabeledData make_labeled(const Dataset& standardized);

// Seeded permutation of [0, n) cut into batches of batch_size. A trailing
// batch of one sample is merged into the previous batch.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   Rng& rng);

struct AdamConfig {
  double lr = 8e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const Weights& like, AdamConfig cfg);
  void step(Weights& params, const Weights& grads);
  std::size_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  Weights m_, v_;
  std::size_t t_ = 0;
};

struct BatchResult {
  LossBreakdown losses;
  Weights grads;
  bool asy_degenerate = false;
};

// Forward + backward of the full objective on one batch. Mutates batch-norm
// running statistics in `params`.
BatchResult compute_batch(ModelParams& params, const Matrix& x, const BatchLabels& labels,
                          const TrainConfig& cfg, Rng dropout_rng);

struct FitResult {
  ModelParams params;
  std::vector<EpochLog> log;
};

struct FitOptions {
  const LabeledData* validation = nullptr;
  std::vector<std::string> gene_list;
  // Called after every epoch, e.g. to print progress.
  std::function<void(const EpochLog&)> on_epoch;
};

FitResult fit(const LabeledData& train, const TrainConfig& cfg, const FitOptions& opts = {});

// Probability of sensitivity for standardized, aligned inputs.
Vector predict_scores(const Matrix& x, const ModelParams& params);

struct Checkpoint {
  ModelParams params;
  NormStats norm;
  GrlConfig grl;
  TrainConfig config;
  std::vector<std::string> domain_names;
};

inline constexpr int kCheckpointFormatVersion = 1;

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Aligns raw expression to the checkpoint genes, applies its normalization
// and returns P(sensitive) per sample.
Vector predict(const GeneMatrix& raw, const Checkpoint& ckpt);

std::string training_log_csv(std::span<const EpochLog> log);
void write_training_log(std::span<const EpochLog> log, const std::filesystem::path& path);

std::string format_number(double v);

}  // namespace fourierdg
