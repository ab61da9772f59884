#include "fourierdg/eval.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <thread>

#include "fourierdg/error.hpp"

namespace fourierdg {

namespace {

struct ClassCounts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

ClassCounts check_binary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("auroc: scores and labels differ in length");
  ClassCounts c;
  for (int y : labels) {
    if (y == 1) ++c.pos;
    else if (y == 0) ++c.neg;
    else throw MetricError("auroc: labels must be 0 or 1");
  }
  if (c.pos == 0 || c.neg == 0) throw MetricError("auroc: both classes must be present");
  return c;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = check_binary(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j share the midrank.
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) pos_rank_sum += midrank;
    i = j;
  }
  const double np = static_cast<double>(c.pos);
  const double nn = static_cast<double>(c.neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

RocResult roc_points(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = check_binary(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocResult roc;
  roc.points.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    const std::pair<double, double> next{static_cast<double>(fp) / static_cast<double>(c.neg),
                                         static_cast<double>(tp) / static_cast<double>(c.pos)};
    // Interior points of a vertical or horizontal run are dropped.
    const std::size_t m = roc.points.size();
    if (m >= 2 && ((roc.points[m - 2].first == roc.points[m - 1].first &&
                    roc.points[m - 1].first == next.first) ||
                   (roc.points[m - 2].second == roc.points[m - 1].second &&
                    roc.points[m - 1].second == next.second))) {
      roc.points.back() = next;
    } else {
      roc.points.push_back(next);
    }
    i = j;
  }
  roc.auroc = auroc(scores, labels);
  return roc;
}

double trapezoid_area(std::span<const std::pair<double, double>> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].first - points[i - 1].first) * (points[i].second + points[i - 1].second) / 2.0;
  }
  return area;
}

// --- leave-one-domain-out ---------------------------------------------------

namespace {

LodoFold run_fold(const Dataset& data, const std::string& domain, const TrainConfig& cfg,
                  const LodoOptions& opts) {
  const Split split = lodo_split(data.meta, domain);
  const Dataset train = subset(data, split.train);
  const Dataset test = subset(data, split.test);

  const std::size_t k = std::min(opts.hvg, train.expr.genes());
  const GeneMatrix selected = select_hvg(train.expr, k);
  Standardized std_train = zscore_fit_apply(selected);
  const GeneMatrix test_x =
      apply_zscore(align_genes(test.expr, std_train.data.gene_names), std_train.stats);

  const LabeledData labeled = make_labeled(Dataset{std_train.data, train.meta});
  FitOptions fit_opts;
  fit_opts.gene_list = std_train.data.gene_names;
  FitResult fitted = fit(labeled, cfg, fit_opts);

  const std::vector<int> y = responses(test.meta);
  const Vector logits = forward_full(test_x.values, fitted.params).response_logit;

  LodoFold fold;
  fold.domain = domain;
  fold.n_test = y.size();
  fold.n_sensitive = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  fold.n_resistant = fold.n_test - fold.n_sensitive;
  fold.roc = roc_points(logits, y);
  fold.norm = std::move(std_train.stats);
  fold.log = std::move(fitted.log);
  if (opts.retain_models) fold.model = std::move(fitted.params);
  return fold;
}

}  // namespace

LodoReport lodo_run(const Dataset& data, const TrainConfig& cfg, const LodoOptions& opts) {
  cfg.validate();
  const auto names = domain_names(data.meta);
  if (names.size() < 2) throw ParameterError("lodo_run: need at least 2 domains");

  std::map<std::string, ClassCounts> counts;
  for (const auto& m : data.meta) {
    if (!m.response) throw LabelError("lodo_run: sample \"" + m.sample_id + "\" has no response");
    (*m.response == 1 ? counts[m.domain].pos : counts[m.domain].neg) += 1;
  }
  std::vector<std::string> eligible;
  for (const auto& name : names) {
    const ClassCounts& c = counts[name];
    if (c.pos >= opts.min_test_per_class && c.neg >= opts.min_test_per_class) eligible.push_back(name);
  }
  if (eligible.empty()) {
    throw ReportError("lodo_run: no domain has at least " + std::to_string(opts.min_test_per_class) +
                      " samples of each class");
  }

  LodoReport report;
  report.folds.resize(eligible.size());
  const std::size_t jobs = std::clamp<std::size_t>(opts.jobs, 1, eligible.size());
  if (jobs == 1) {
    for (std::size_t i = 0; i < eligible.size(); ++i)
      report.folds[i] = run_fold(data, eligible[i], cfg, opts);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(eligible.size());
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < eligible.size(); i = next++) {
          try {
            report.folds[i] = run_fold(data, eligible[i], cfg, opts);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : workers) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  double sum = 0.0;
  for (const auto& f : report.folds) sum += f.roc.auroc;
  report.mean_auroc = sum / static_cast<double>(report.folds.size());
  return report;
}

AblationTable ablate_faac(const Dataset& data, const TrainConfig& cfg, const LodoOptions& opts,
                          std::span<const std::uint64_t> seeds) {
  if (seeds.size() < 2) throw ParameterError("ablate_faac: need at least 2 seeds");
  AblationTable table;
  std::map<std::string, std::pair<double, double>> per_domain;
  for (std::uint64_t seed : seeds) {
    for (bool faac : {true, false}) {
      TrainConfig run = cfg;
      run.seed = seed;
      run.faac_enabled = faac;
      const LodoReport report = lodo_run(data, run, opts);
      (faac ? table.mean_on : table.mean_off) += report.mean_auroc;
      for (const auto& fold : report.folds) {
        table.rows.push_back({seed, faac, fold.domain, fold.roc.auroc});
        auto& acc = per_domain[fold.domain];
        (faac ? acc.first : acc.second) += fold.roc.auroc;
      }
    }
  }
  const double ns = static_cast<double>(seeds.size());
  table.mean_on /= ns;
  table.mean_off /= ns;
  for (const auto& [domain, acc] : per_domain) table.domains.push_back({domain, acc.first / ns, acc.second / ns});
  return table;
}

// --- embedding and regression ------------------------------------------------

namespace {

Vector mat_vec(const Matrix& a, const Vector& v) {
  Vector out(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * v[c];
    out[r] = s;
  }
  return out;
}

double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

bool normalize(Vector& v) {
  const double n = std::sqrt(dot(v, v));
  if (!(n > 0.0)) return false;
  for (double& x : v) x /= n;
  return true;
}

void orthogonalize(Vector& v, const std::vector<Vector>& against) {
  for (const auto& u : against) {
    const double p = dot(v, u);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p * u[i];
  }
}

// Leading eigenvector of symmetric `cov` orthogonal to `found`.
Vector power_iteration(const Matrix& cov, const std::vector<Vector>& found) {
  const std::size_t dim = cov.rows();
  constexpr double kTol = 1e-10;
  constexpr int kMaxIter = 20000;

  // Start from the covariance row with the largest norm; fall back to a
  // fixed ramp when that is degenerate.
  Vector v(dim, 0.0);
  std::size_t best = 0;
  double best_norm = -1.0;
  for (std::size_t r = 0; r < dim; ++r) {
    double s = 0.0;
    for (double x : cov.row(r)) s += x * x;
    if (s > best_norm) {
      best_norm = s;
      best = r;
    }
  }
  v.assign(cov.row(best).begin(), cov.row(best).end());
  orthogonalize(v, found);
  if (!normalize(v) || std::sqrt(dot(v, v)) < 0.5) {
    for (std::size_t i = 0; i < dim; ++i) v[i] = 1.0 + static_cast<double>(i) / static_cast<double>(dim);
    orthogonalize(v, found);
    if (!normalize(v)) {
      v.assign(dim, 0.0);
      v[found.size() % dim] = 1.0;
      orthogonalize(v, found);
      normalize(v);
    }
  }

  for (int it = 0; it < kMaxIter; ++it) {
    Vector next = mat_vec(cov, v);
    orthogonalize(next, found);
    if (!normalize(next)) break;  // remaining spectrum is zero
    if (dot(next, v) < 0.0)
      for (double& x : next) x = -x;
    double change = 0.0;
    for (std::size_t i = 0; i < dim; ++i) change = std::max(change, std::abs(next[i] - v[i]));
    v = std::move(next);
    if (change < kTol) break;
  }
  // Fix the sign so the largest-magnitude entry is positive.
  std::size_t arg = 0;
  for (std::size_t i = 1; i < dim; ++i)
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  if (v[arg] < 0.0)
    for (double& x : v) x = -x;
  return v;
}

}  // namespace

Matrix embed_2d(const Matrix& features) {
  const std::size_t b = features.rows();
  const std::size_t dim = features.cols();
  if (b < 3) throw ParameterError("embed_2d: need at least 3 samples");
  if (dim < 1) throw ParameterError("embed_2d: need at least 1 feature");

  Vector mean = column_sums(features);
  for (double& m : mean) m /= static_cast<double>(b);
  Matrix centered = features;
  for (std::size_t r = 0; r < b; ++r) {
    auto row = centered.row(r);
    for (std::size_t c = 0; c < dim; ++c) row[c] -= mean[c];
  }
  Matrix cov = matmul_at(centered, centered);
  for (double& v : cov.values()) v /= static_cast<double>(b - 1);

  std::vector<Vector> components;
  for (int k = 0; k < 2; ++k) {
    Vector v = dim > static_cast<std::size_t>(k) ? power_iteration(cov, components) : Vector(dim, 0.0);
    // Deflate so the next search sees the remaining spectrum.
    const double lambda = dot(v, mat_vec(cov, v));
    for (std::size_t r = 0; r < dim; ++r)
      for (std::size_t c = 0; c < dim; ++c) cov(r, c) -= lambda * v[r] * v[c];
    components.push_back(std::move(v));
  }

  Matrix out(b, 2);
  for (std::size_t r = 0; r < b; ++r) {
    const auto row = centered.row(r);
    for (std::size_t k = 0; k < 2; ++k) {
      double s = 0.0;
      for (std::size_t c = 0; c < dim; ++c) s += row[c] * components[k][c];
      out(r, k) = s;
    }
  }
  return out;
}

double feature_ic50_r2(const Matrix& features, std::span<const double> ic50) {
  const std::size_t n = features.rows();
  const std::size_t p = features.cols() + 1;
  if (ic50.size() != n) throw DimensionError("feature_ic50_r2: ic50 length does not match rows");
  if (n < 2) throw MetricError("feature_ic50_r2: need at least 2 samples");
  const double mean = std::accumulate(ic50.begin(), ic50.end(), 0.0) / static_cast<double>(n);
  double ss_tot = 0.0;
  for (double y : ic50) ss_tot += (y - mean) * (y - mean);
  if (!(ss_tot > 0.0)) throw MetricError("feature_ic50_r2: ic50 has zero variance");

  Eigen::MatrixXd design(n, p);
  Eigen::VectorXd y(n);
  for (std::size_t r = 0; r < n; ++r) {
    design(r, 0) = 1.0;
    for (std::size_t c = 1; c < p; ++c) design(r, c) = features(r, c - 1);
    y(r) = ic50[r];
  }
  Eigen::MatrixXd normal = design.transpose() * design;
  normal.diagonal().array() += 1e-8;
  const Eigen::VectorXd coef = normal.ldlt().solve(design.transpose() * y);
  const Eigen::VectorXd resid = y - design * coef;
  return 1.0 - resid.squaredNorm() / ss_tot;
}

// --- CSV ---------------------------------------------------------------------

std::string roc_csv(const RocResult& roc) {
  std::string out = "fpr,tpr\n";
  for (const auto& [fpr, tpr] : roc.points) out += format_number(fpr) + "," + format_number(tpr) + "\n";
  return out;
}

std::string lodo_report_csv(const LodoReport& report) {
  std::string out = "domain,n_test,n_sensitive,n_resistant,auroc\n";
  for (const auto& f : report.folds) {
    out += f.domain + "," + std::to_string(f.n_test) + "," + std::to_string(f.n_sensitive) + "," +
           std::to_string(f.n_resistant) + "," + format_number(f.roc.auroc) + "\n";
  }
  out += "MEAN,,,," + format_number(report.mean_auroc) + "\n";
  return out;
}

std::string lodo_roc_csv(const LodoReport& report) {
  std::string out = "domain,fpr,tpr\n";
  for (const auto& f : report.folds)
    for (const auto& [fpr, tpr] : f.roc.points)
      out += f.domain + "," + format_number(fpr) + "," + format_number(tpr) + "\n";
  return out;
}

std::string ablation_csv(const AblationTable& table) {
  std::string out = "seed,faac,domain,auroc\n";
  for (const auto& r : table.rows) {
    out += std::to_string(r.seed) + "," + (r.faac ? "on" : "off") + "," + r.domain + "," +
           format_number(r.auroc) + "\n";
  }
  return out;
}

std::string ablation_summary_csv(const AblationTable& table) {
  std::string out = "domain,mean_auroc_on,mean_auroc_off,delta\n";
  for (const auto& d : table.domains) {
    out += d.domain + "," + format_number(d.mean_on) + "," + format_number(d.mean_off) + "," +
           format_number(d.delta()) + "\n";
  }
  out += "ALL," + format_number(table.mean_on) + "," + format_number(table.mean_off) + "," +
         format_number(table.mean_delta()) + "\n";
  return out;
}

std::string embedding_csv(std::span<const std::string> sample_ids, const Matrix& xy,
                          std::span<const int> labels) {
  if (sample_ids.size() != xy.rows() || labels.size() != xy.rows() || xy.cols() != 2) {
    throw DimensionError("embedding_csv: inconsistent inputs");
  }
  std::string out = "sample_id,x,y,label\n";
  for (std::size_t r = 0; r < xy.rows(); ++r) {
    out += sample_ids[r] + "," + format_number(xy(r, 0)) + "," + format_number(xy(r, 1)) + "," +
           std::to_string(labels[r]) + "\n";
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace fourierdg
