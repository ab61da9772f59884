#include "fourierdg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "fourierdg/error.hpp"

namespace fourierdg {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

struct Line {
  std::size_t number;
  std::string text;
};

std::vector<Line> split_lines(const std::string& text) {
  std::vector<Line> lines;
  std::size_t start = 0, number = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++number;
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back({number, std::move(line)});
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = line.find(delim, start);
    std::string f = line.substr(start, end == std::string::npos ? std::string::npos : end - start);
    // trim spaces
    const auto first = f.find_first_not_of(" \t");
    const auto last = f.find_last_not_of(" \t");
    fields.push_back(first == std::string::npos ? std::string() : f.substr(first, last - first + 1));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return fields;
}

char detect_delimiter(const std::string& header) {
  return header.find('\t') != std::string::npos ? '\t' : ',';
}

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& msg) {
  throw ParseError(source + ":" + std::to_string(line) + ": " + msg);
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  if (*first == '+') ++first;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

// --- expression -------------------------------------------------------------

GeneMatrix parse_expression(const std::string& text, const std::string& source) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError(source + ": empty expression file");
  const char delim = detect_delimiter(lines[0].text);
  auto header = split_fields(lines[0].text, delim);
  if (header.size() < 2) parse_fail(source, lines[0].number, "header needs sample_id and at least one gene");

  GeneMatrix gm;
  gm.gene_names.assign(header.begin() + 1, header.end());
  std::unordered_set<std::string> seen_genes;
  for (const auto& g : gm.gene_names) {
    if (g.empty()) parse_fail(source, lines[0].number, "empty gene name in header");
    if (!seen_genes.insert(g).second) parse_fail(source, lines[0].number, "duplicate gene \"" + g + "\"");
  }

  const std::size_t genes = gm.gene_names.size();
  std::vector<double> values;
  values.reserve((lines.size() - 1) * genes);
  std::unordered_set<std::string> seen_samples;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = split_fields(lines[li].text, delim);
    if (fields.size() != genes + 1) {
      parse_fail(source, lines[li].number,
                 "expected " + std::to_string(genes + 1) + " fields, found " +
                     std::to_string(fields.size()));
    }
    if (fields[0].empty()) parse_fail(source, lines[li].number, "empty sample id");
    if (!seen_samples.insert(fields[0]).second) {
      parse_fail(source, lines[li].number, "duplicate sample \"" + fields[0] + "\"");
    }
    gm.sample_ids.push_back(fields[0]);
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const auto v = parse_double(fields[c]);
      if (!v) {
        parse_fail(source, lines[li].number,
                   "non-numeric value \"" + fields[c] + "\" for gene " + gm.gene_names[c - 1]);
      }
      values.push_back(*v);
    }
  }
  gm.values = Matrix(gm.sample_ids.size(), genes, std::move(values));
  return gm;
}

GeneMatrix load_expression(const std::filesystem::path& path) {
  return parse_expression(read_file(path), path.string());
}

void write_expression(const GeneMatrix& gm, const std::filesystem::path& path) {
  std::string out = "sample_id";
  for (const auto& g : gm.gene_names) out += "," + g;
  out += "\n";
  for (std::size_t r = 0; r < gm.samples(); ++r) {
    out += gm.sample_ids[r];
    for (double v : gm.values.row(r)) out += "," + format_double(v);
    out += "\n";
  }
  write_file(path, out);
}

// --- metadata ----------------------------------------------------------------

std::vector<SampleMeta> parse_metadata(const std::string& text, const std::string& source) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError(source + ": empty metadata file");
  const char delim = detect_delimiter(lines[0].text);
  const auto header = split_fields(lines[0].text, delim);
  const std::vector<std::string> expected{"sample_id", "domain", "ic50", "response"};
  if (header != expected) {
    parse_fail(source, lines[0].number, "header must be sample_id,domain,ic50,response");
  }
  std::vector<SampleMeta> metas;
  std::unordered_set<std::string> seen;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto f = split_fields(lines[li].text, delim);
    if (f.size() != 4) {
      parse_fail(source, lines[li].number, "expected 4 fields, found " + std::to_string(f.size()));
    }
    SampleMeta m;
    m.sample_id = f[0];
    m.domain = f[1];
    if (m.sample_id.empty()) parse_fail(source, lines[li].number, "empty sample id");
    if (m.domain.empty()) parse_fail(source, lines[li].number, "empty domain");
    if (!seen.insert(m.sample_id).second) {
      parse_fail(source, lines[li].number, "duplicate sample \"" + m.sample_id + "\"");
    }
    if (!f[2].empty()) {
      m.ic50 = parse_double(f[2]);
      if (!m.ic50) parse_fail(source, lines[li].number, "non-numeric ic50 \"" + f[2] + "\"");
    }
    if (!f[3].empty()) {
      if (f[3] == "0") m.response = 0;
      else if (f[3] == "1") m.response = 1;
      else parse_fail(source, lines[li].number, "response must be 0 or 1, got \"" + f[3] + "\"");
    }
    if (!m.ic50 && !m.response) {
      parse_fail(source, lines[li].number, "sample \"" + m.sample_id + "\" has neither ic50 nor response");
    }
    metas.push_back(std::move(m));
  }
  return metas;
}

std::vector<SampleMeta> load_metadata(const std::filesystem::path& path) {
  return parse_metadata(read_file(path), path.string());
}

void write_metadata(const std::vector<SampleMeta>& metas, const std::filesystem::path& path) {
  std::string out = "sample_id,domain,ic50,response\n";
  for (const auto& m : metas) {
    out += m.sample_id + "," + m.domain + ",";
    if (m.ic50) out += format_double(*m.ic50);
    out += ",";
    if (m.response) out += std::to_string(*m.response);
    out += "\n";
  }
  write_file(path, out);
}

// --- preprocessing -------------------------------------------------------------

GeneMatrix select_hvg(const GeneMatrix& gm, std::size_t k) {
  const std::size_t genes = gm.genes();
  if (k > genes) {
    throw ParameterError("select_hvg: requested " + std::to_string(k) + " genes but only " +
                         std::to_string(genes) + " available");
  }
  const std::size_t n = gm.samples();
  Vector mean(genes, 0.0), var(genes, 0.0);
  if (n > 0) {
    mean = column_sums(gm.values);
    for (double& v : mean) v /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = gm.values.row(r);
      for (std::size_t c = 0; c < genes; ++c) var[c] += (row[c] - mean[c]) * (row[c] - mean[c]);
    }
    for (double& v : var) v /= static_cast<double>(n);
  }
  std::vector<std::size_t> order(genes);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (var[a] != var[b]) return var[a] > var[b];
    return gm.gene_names[a] < gm.gene_names[b];
  });
  order.resize(k);
  std::sort(order.begin(), order.end());

  std::vector<std::string> keep;
  keep.reserve(k);
  for (std::size_t c : order) keep.push_back(gm.gene_names[c]);
  return align_genes(gm, keep);
}

std::vector<SampleMeta> binarize_ic50(std::vector<SampleMeta> metas) {
  if (metas.empty()) throw ParameterError("binarize_ic50: empty cohort");
  double sum = 0.0;
  for (const auto& m : metas) {
    if (!m.ic50) throw ParameterError("binarize_ic50: sample \"" + m.sample_id + "\" has no ic50");
    sum += *m.ic50;
  }
  const double mean = sum / static_cast<double>(metas.size());
  for (auto& m : metas) m.response = *m.ic50 < mean ? 1 : 0;
  return metas;
}

NormStats fit_zscore(const GeneMatrix& gm) {
  const std::size_t n = gm.samples();
  const std::size_t genes = gm.genes();
  if (n == 0) throw ParameterError("fit_zscore: no samples");
  NormStats s{gm.gene_names, column_sums(gm.values), Vector(genes, 0.0)};
  for (double& v : s.mean) v /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = gm.values.row(r);
    for (std::size_t c = 0; c < genes; ++c) s.std[c] += (row[c] - s.mean[c]) * (row[c] - s.mean[c]);
  }
  for (double& v : s.std) v = std::max(std::sqrt(v / static_cast<double>(n)), kStdFloor);
  return s;
}

namespace {

void check_stats(const GeneMatrix& gm, const NormStats& stats) {
  if (stats.genes != gm.gene_names) {
    throw AlignmentError("normalization statistics were fitted on a different gene list");
  }
}

}  // namespace

GeneMatrix apply_zscore(const GeneMatrix& gm, const NormStats& stats) {
  check_stats(gm, stats);
  GeneMatrix out = gm;
  for (std::size_t r = 0; r < out.samples(); ++r) {
    auto row = out.values.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - stats.mean[c]) / stats.std[c];
  }
  return out;
}

GeneMatrix undo_zscore(const GeneMatrix& gm, const NormStats& stats) {
  check_stats(gm, stats);
  GeneMatrix out = gm;
  for (std::size_t r = 0; r < out.samples(); ++r) {
    auto row = out.values.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = row[c] * stats.std[c] + stats.mean[c];
  }
  return out;
}

Standardized zscore_fit_apply(const GeneMatrix& gm, const NormStats* stats) {
  NormStats s = stats != nullptr ? *stats : fit_zscore(gm);
  GeneMatrix data = apply_zscore(gm, s);
  return {std::move(data), std::move(s)};
}

GeneMatrix align_genes(const GeneMatrix& gm, std::span<const std::string> gene_list) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < gm.genes(); ++c) index.emplace(gm.gene_names[c], c);
  std::vector<std::size_t> cols;
  std::vector<std::string> missing;
  std::size_t missing_count = 0;
  for (const auto& g : gene_list) {
    auto it = index.find(g);
    if (it == index.end()) {
      ++missing_count;
      if (missing.size() < 10) missing.push_back(g);
      continue;
    }
    cols.push_back(it->second);
  }
  if (missing_count > 0) {
    std::string msg = std::to_string(missing_count) + " required gene(s) missing: ";
    for (std::size_t i = 0; i < missing.size(); ++i) msg += (i ? ", " : "") + missing[i];
    if (missing_count > missing.size()) msg += ", ...";
    throw AlignmentError(msg);
  }
  GeneMatrix out;
  out.sample_ids = gm.sample_ids;
  out.gene_names.assign(gene_list.begin(), gene_list.end());
  out.values = Matrix(gm.samples(), cols.size());
  for (std::size_t r = 0; r < gm.samples(); ++r) {
    const auto src = gm.values.row(r);
    auto dst = out.values.row(r);
    for (std::size_t c = 0; c < cols.size(); ++c) dst[c] = src[cols[c]];
  }
  return out;
}

GeneMatrix take_samples(const GeneMatrix& gm, std::span<const std::size_t> rows) {
  GeneMatrix out;
  out.gene_names = gm.gene_names;
  out.values = gather_rows(gm.values, rows);
  for (std::size_t r : rows) out.sample_ids.push_back(gm.sample_ids[r]);
  return out;
}

std::vector<std::string> domain_names(std::span<const SampleMeta> metas) {
  std::vector<std::string> names;
  for (const auto& m : metas) names.push_back(m.domain);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return names;
}

Split lodo_split(std::span<const SampleMeta> metas, const std::string& held_out_domain) {
  const auto names = domain_names(metas);
  if (names.size() < 2) throw ParameterError("lodo_split: need at least 2 domains");
  if (!std::binary_search(names.begin(), names.end(), held_out_domain)) {
    throw ParameterError("lodo_split: unknown domain \"" + held_out_domain + "\"");
  }
  Split s;
  for (std::size_t i = 0; i < metas.size(); ++i)
    (metas[i].domain == held_out_domain ? s.test : s.train).push_back(i);
  return s;
}

Dataset join(GeneMatrix expr, const std::vector<SampleMeta>& metas) {
  std::unordered_map<std::string, const SampleMeta*> by_id;
  for (const auto& m : metas) by_id.emplace(m.sample_id, &m);
  Dataset ds;
  bool all_labeled = true;
  std::vector<std::string> missing;
  for (const auto& id : expr.sample_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      missing.push_back(id);
      continue;
    }
    ds.meta.push_back(*it->second);
    all_labeled = all_labeled && ds.meta.back().response.has_value();
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " expression sample(s) lack metadata: ";
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 10); ++i)
      msg += (i ? ", " : "") + missing[i];
    throw AlignmentError(msg);
  }
  if (!all_labeled) ds.meta = binarize_ic50(std::move(ds.meta));
  ds.expr = std::move(expr);
  return ds;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> rows) {
  Dataset out;
  out.expr = take_samples(ds.expr, rows);
  for (std::size_t r : rows) out.meta.push_back(ds.meta[r]);
  return out;
}

std::vector<int> responses(std::span<const SampleMeta> metas) {
  std::vector<int> y;
  y.reserve(metas.size());
  for (const auto& m : metas) {
    if (!m.response) throw LabelError("sample \"" + m.sample_id + "\" has no response label");
    y.push_back(*m.response);
  }
  return y;
}

}  // namespace fourierdg
