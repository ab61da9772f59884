#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fourierdg/data.hpp"
#include "fourierdg/train.hpp"

namespace fourierdg {

// Mann-Whitney AUROC with midranks: P(score+ > score-) + P(tie) / 2.
double auroc(std::span<const double> scores, std::span<const int> labels);

struct RocResult {
  double auroc = 0.0;
  std::vector<std::pair<double, double>> points;  // (fpr, tpr)
};

// Threshold sweep over distinct scores in descending order; interior points of
// vertical or horizontal runs are merged.
RocResult roc_points(std::span<const double> scores, std::span<const int> labels);
double trapezoid_area(std::span<const std::pair<double, double>> points);

struct LodoFold {
  std::string domain;
  std::size_t n_test = 0;
  std::size_t n_sensitive = 0;
  std::size_t n_resistant = 0;
  RocResult roc;
  NormStats norm;
  std::vector<EpochLog> log;
  // Populated only when LodoOptions::retain_models is set.
  std::optional<ModelParams> model;
};

struct LodoReport {
  std::vector<LodoFold> folds;
  double mean_auroc = 0.0;
};

struct LodoOptions {
  std::size_t min_test_per_class = 3;
  // Highly variable genes selected on each training split; clamped to the
  // available gene count.
  std::size_t hvg = 3000;
  std::size_t jobs = 1;
  bool retain_models = false;
};

// Holds out each eligible domain in turn. Domains with fewer than
// min_test_per_class samples of either class stay in every training split
// but are never used as a test set. Gene selection and normalization are
// fitted on the training split only.
LodoReport lodo_run(const Dataset& data, const TrainConfig& cfg, const LodoOptions& opts);

struct AblationRow {
  std::uint64_t seed = 0;
  bool faac = true;
  std::string domain;
  double auroc = 0.0;
};

struct DomainDelta {
  std::string domain;
  double mean_on = 0.0;   // mean over seeds
  double mean_off = 0.0;
  double delta() const { return mean_on - mean_off; }
};

struct AblationTable {
  std::vector<AblationRow> rows;
  std::vector<DomainDelta> domains;
  double mean_on = 0.0;
  double mean_off = 0.0;
  double mean_delta() const { return mean_on - mean_off; }
};

AblationTable ablate_faac(const Dataset& data, const TrainConfig& cfg, const LodoOptions& opts,
                          std::span<const std::uint64_t> seeds);

// Mean-centred projection onto the top two principal components, found by
// power iteration with deflation.
Matrix embed_2d(const Matrix& features);

// In-sample R^2 of a ridge-stabilized (1e-8) least-squares fit with intercept.
double feature_ic50_r2(const Matrix& features, std::span<const double> ic50);

std::string roc_csv(const RocResult& roc);
std::string lodo_report_csv(const LodoReport& report);
std::string lodo_roc_csv(const LodoReport& report);
std::string ablation_csv(const AblationTable& table);
std::string ablation_summary_csv(const AblationTable& table);
std::string embedding_csv(std::span<const std::string> sample_ids, const Matrix& xy,
                          std::span<const int> labels);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace fourierdg
