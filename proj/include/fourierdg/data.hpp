#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fourierdg/tensor.hpp"

namespace fourierdg {

// Samples x genes expression matrix.
struct GeneMatrix {
  std::vector<std::string> sample_ids;
  std::vector<std::string> gene_names;
  Matrix values;

  std::size_t samples() const { return sample_ids.size(); }
  std::size_t genes() const { return gene_names.size(); }
};

struct SampleMeta {
  std::string sample_id;
  std::string domain;
  std::optional<double> ic50;
  std::optional<int> response;
};

// Per-gene standardization statistics fitted on a training split.
struct NormStats {
  std::vector<std::string> genes;
  Vector mean;
  Vector std;

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

inline constexpr double kStdFloor = 1e-8;

// Expression table: header "sample_id,<gene>...", one sample per row. The
// delimiter is a tab if the header contains one, otherwise a comma.
GeneMatrix load_expression(const std::filesystem::path& path);
GeneMatrix parse_expression(const std::string& text, const std::string& source = "<input>");
void write_expression(const GeneMatrix& gm, const std::filesystem::path& path);

// Metadata table with header "sample_id,domain,ic50,response"; either of the
// last two cells may be empty but not both.
std::vector<SampleMeta> load_metadata(const std::filesystem::path& path);
std::vector<SampleMeta> parse_metadata(const std::string& text,
                                       const std::string& source = "<input>");
void write_metadata(const std::vector<SampleMeta>& metas, const std::filesystem::path& path);

// Keeps the k genes with the largest population variance (ties by ascending
// name), preserving their original column order.
GeneMatrix select_hvg(const GeneMatrix& gm, std::size_t k);

// Labels each sample sensitive (1) when its IC50 is strictly below the cohort
// mean, resistant (0) otherwise.
std::vector<SampleMeta> binarize_ic50(std::vector<SampleMeta> metas);

NormStats fit_zscore(const GeneMatrix& gm);
GeneMatrix apply_zscore(const GeneMatrix& gm, const NormStats& stats);
GeneMatrix undo_zscore(const GeneMatrix& gm, const NormStats& stats);

struct Standardized {
  GeneMatrix data;
  NormStats stats;
};

// Fits statistics on gm unless `stats` is given, then standardizes gm.
Standardized zscore_fit_apply(const GeneMatrix& gm, const NormStats* stats = nullptr);

// Reorders/subsets columns to exactly `gene_list`.
GeneMatrix align_genes(const GeneMatrix& gm, std::span<const std::string> gene_list);

GeneMatrix take_samples(const GeneMatrix& gm, std::span<const std::size_t> rows);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

Split lodo_split(std::span<const SampleMeta> metas, const std::string& held_out_domain);

// Sorted distinct domain names.
std::vector<std::string> domain_names(std::span<const SampleMeta> metas);

// Expression rows paired with their metadata, in the same order.
struct Dataset {
  GeneMatrix expr;
  std::vector<SampleMeta> meta;
};

// Orders metadata to match expression rows. Every expression sample needs a
// metadata row; extra metadata rows are ignored. If any sample lacks a
// response label the whole cohort is binarized from IC50.
Dataset join(GeneMatrix expr, const std::vector<SampleMeta>& metas);

Dataset subset(const Dataset& ds, std::span<const std::size_t> rows);

std::vector<int> responses(std::span<const SampleMeta> metas);

}  // namespace fourierdg
