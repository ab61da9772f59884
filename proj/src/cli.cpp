#include "fourierdg/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "fourierdg/data.hpp"
#include "fourierdg/error.hpp"
#include "fourierdg/eval.hpp"
#include "fourierdg/gradcheck.hpp"
#include "fourierdg/synth.hpp"
#include "fourierdg/train.hpp"

namespace fourierdg::cli {

namespace {

namespace fs = std::filesystem;

struct TrainFlags {
  TrainConfig cfg;
  std::size_t hvg = 3000;
  bool no_faac = false;
};

struct Paths {
  std::string expr, meta, checkpoint, out_checkpoint, out_log, out_scores, out_report, out_roc,
      out_table, out_summary, out_expr, out_meta, config, out_embedding, val_expr, val_meta;
};

struct Invocation {
  TrainFlags train;
  Paths paths;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::size_t min_test_per_class = 3;
  std::size_t jobs = 1;
  std::string seeds = "1,2,3,4,5";
  bool dry_run = false;
};

void add_train_flags(CLI::App* app, Invocation& inv) {
  TrainConfig& c = inv.train.cfg;
  app->add_option("--hvg", inv.train.hvg, "Highly variable genes kept (clamped to gene count)")
      ->capture_default_str();
  app->add_option("--lambda1", c.lambda1, "Weight of the asymmetric loss")->capture_default_str();
  app->add_option("--lambda2", c.lambda2, "Weight of the classification loss")->capture_default_str();
  app->add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--batch", c.batch_size, "Mini-batch size")->capture_default_str();
  app->add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
  app->add_option("--dropout", c.dropout_p, "Dropout probability")->capture_default_str();
  app->add_option("--grl", c.grl_coefficient, "Gradient reversal coefficient")->capture_default_str();
  app->add_flag("--no-faac", inv.train.no_faac, "Disable the Fourier asymmetric constraint");
  app->add_option("--hidden", c.hidden, "Encoder hidden width")->capture_default_str();
  app->add_option("--feature-dim", c.feature_dim, "Encoder output width (even)")->capture_default_str();
  app->add_option("--disc-hidden", c.disc_hidden, "Discriminator hidden width")->capture_default_str();
}

void add_seed(CLI::App* app, Invocation& inv) {
  inv.seed_opt = app->add_option("--seed", inv.seed, "Random seed")
                     ->envname("FOURIERDG_SEED")
                     ->capture_default_str();
}

std::string on_off(bool v) { return v ? "on" : "off"; }

std::string train_config_str(const TrainFlags& t) {
  const TrainConfig& c = t.cfg;
  return "lambda1=" + format_number(c.lambda1) + " lambda2=" + format_number(c.lambda2) +
         " lr=" + format_number(c.lr) + " batch=" + std::to_string(c.batch_size) +
         " epochs=" + std::to_string(c.epochs) + " seed=" + std::to_string(c.seed) +
         " faac=" + on_off(c.faac_enabled) + " grl=" + format_number(c.grl_coefficient) +
         " dropout=" + format_number(c.dropout_p) + " hvg=" + std::to_string(t.hvg) +
         " hidden=" + std::to_string(c.hidden) + " feature_dim=" + std::to_string(c.feature_dim) +
         " disc_hidden=" + std::to_string(c.disc_hidden);
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ValidationError(std::string("missing required flag ") + flag);
}

void require_file(const std::string& path, const char* flag) {
  require(path, flag);
  if (!fs::is_regular_file(path)) throw ValidationError(std::string(flag) + ": file not found: " + path);
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      seeds.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError("--seeds: invalid seed \"" + item + "\"");
    }
  }
  if (seeds.size() < 2) throw ValidationError("--seeds: need at least 2 seeds");
  return seeds;
}

Dataset load_dataset(const std::string& expr, const std::string& meta) {
  return join(load_expression(expr), load_metadata(meta));
}

// --- subcommands -------------------------------------------------------------

int cmd_synth(Invocation& inv, std::ostream& out) {
  SynthConfig cfg;
  if (!inv.paths.config.empty()) {
    require_file(inv.paths.config, "--config");
    std::ifstream in(inv.paths.config);
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = synth_config_from_json(ss.str());
  }
  if (inv.seed_opt->count() > 0) cfg.seed = inv.seed;
  out << "config: command=synth " << synth_config_to_json(cfg) << "\n";
  if (inv.dry_run) return kOk;
  require(inv.paths.out_expr, "--out-expr");
  require(inv.paths.out_meta, "--out-meta");
  const SynthData data = generate(cfg);
  write_expression(data.expr, inv.paths.out_expr);
  write_metadata(data.meta, inv.paths.out_meta);
  out << "wrote " << data.expr.samples() << " samples x " << data.expr.genes() << " genes\n";
  return kOk;
}

std::size_t effective_hvg(std::size_t requested, std::size_t genes, std::ostream& out) {
  if (requested > genes) {
    out << "note: --hvg " << requested << " exceeds " << genes << " available genes; using all\n";
    return genes;
  }
  return requested;
}

int cmd_train(Invocation& inv, std::ostream& out) {
  TrainFlags& t = inv.train;
  out << "config: command=train " << train_config_str(t) << "\n";
  t.cfg.validate();
  if (inv.dry_run) return kOk;
  require_file(inv.paths.expr, "--expr");
  require_file(inv.paths.meta, "--meta");
  if (!inv.paths.val_expr.empty() || !inv.paths.val_meta.empty()) {
    require_file(inv.paths.val_expr, "--val-expr");
    require_file(inv.paths.val_meta, "--val-meta");
  }

  const Dataset ds = load_dataset(inv.paths.expr, inv.paths.meta);
  const std::size_t k = effective_hvg(t.hvg, ds.expr.genes(), out);
  Standardized st = zscore_fit_apply(select_hvg(ds.expr, k));
  const LabeledData labeled = make_labeled(Dataset{st.data, ds.meta});

  std::optional<LabeledData> validation;
  if (!inv.paths.val_expr.empty()) {
    const Dataset val = load_dataset(inv.paths.val_expr, inv.paths.val_meta);
    const GeneMatrix vx = apply_zscore(align_genes(val.expr, st.data.gene_names), st.stats);
    validation = LabeledData{vx.values, responses(val.meta), {}, {}};
  }

  FitOptions opts;
  opts.gene_list = st.data.gene_names;
  if (validation) opts.validation = &*validation;
  opts.on_epoch = [&out](const EpochLog& e) {
    out << "epoch " << e.epoch << " l_asy=" << format_number(e.losses.l_asy)
        << " l_adv=" << format_number(e.losses.l_adv) << " l_cls=" << format_number(e.losses.l_cls)
        << " total=" << format_number(e.losses.total) << " train_auc=" << format_number(e.train_auc);
    if (e.val_auc) out << " val_auc=" << format_number(*e.val_auc);
    out << "\n";
  };
  FitResult fitted = fit(labeled, t.cfg, opts);

  if (!inv.paths.out_embedding.empty()) {
    const ForwardOutputs fwd = forward_full(st.data.values, fitted.params);
    write_text(inv.paths.out_embedding,
               embedding_csv(st.data.sample_ids, embed_2d(fwd.z), labeled.response));
    bool all_ic50 = true;
    std::vector<double> ic50;
    for (const auto& m : ds.meta) {
      all_ic50 = all_ic50 && m.ic50.has_value();
      if (m.ic50) ic50.push_back(*m.ic50);
    }
    if (all_ic50) {
      try {
        out << "feature_ic50_r2=" << format_number(feature_ic50_r2(embed_2d(fwd.z), ic50)) << "\n";
      } catch (const MetricError& e) {
        out << "note: " << e.what() << "\n";
      }
    }
  }
  if (!inv.paths.out_log.empty()) write_training_log(fitted.log, inv.paths.out_log);
  if (!inv.paths.out_checkpoint.empty()) {
    Checkpoint ckpt{std::move(fitted.params), std::move(st.stats),
                    GrlConfig{t.cfg.grl_coefficient}, t.cfg, labeled.domain_names};
    save_checkpoint(ckpt, inv.paths.out_checkpoint);
  }
  return kOk;
}

int cmd_predict(Invocation& inv, std::ostream& out) {
  out << "config: command=predict expr=" << inv.paths.expr << " checkpoint=" << inv.paths.checkpoint
      << " out_scores=" << inv.paths.out_scores << "\n";
  if (inv.dry_run) return kOk;
  require_file(inv.paths.expr, "--expr");
  require_file(inv.paths.checkpoint, "--checkpoint");
  require(inv.paths.out_scores, "--out-scores");
  const GeneMatrix raw = load_expression(inv.paths.expr);
  const Checkpoint ckpt = load_checkpoint(inv.paths.checkpoint);
  const Vector scores = predict(raw, ckpt);
  std::string csv = "sample_id,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i)
    csv += raw.sample_ids[i] + "," + format_number(scores[i]) + "\n";
  write_text(inv.paths.out_scores, csv);
  out << "scored " << scores.size() << " samples\n";
  return kOk;
}

LodoOptions lodo_options(const Invocation& inv) {
  LodoOptions o;
  o.min_test_per_class = inv.min_test_per_class;
  o.hvg = inv.train.hvg;
  o.jobs = inv.jobs;
  return o;
}

int cmd_lodo(Invocation& inv, std::ostream& out) {
  out << "config: command=lodo " << train_config_str(inv.train)
      << " min_test_per_class=" << inv.min_test_per_class << " jobs=" << inv.jobs << "\n";
  inv.train.cfg.validate();
  if (inv.dry_run) return kOk;
  require_file(inv.paths.expr, "--expr");
  require_file(inv.paths.meta, "--meta");
  const Dataset ds = load_dataset(inv.paths.expr, inv.paths.meta);
  const LodoReport report = lodo_run(ds, inv.train.cfg, lodo_options(inv));
  for (const auto& f : report.folds)
    out << "held_out=" << f.domain << " n=" << f.n_test << " auroc=" << format_number(f.roc.auroc) << "\n";
  out << "mean_auroc=" << format_number(report.mean_auroc) << "\n";
  if (!inv.paths.out_report.empty()) write_text(inv.paths.out_report, lodo_report_csv(report));
  if (!inv.paths.out_roc.empty()) write_text(inv.paths.out_roc, lodo_roc_csv(report));
  return kOk;
}

int cmd_ablate(Invocation& inv, std::ostream& out) {
  const auto seeds = parse_seeds(inv.seeds);
  out << "config: command=ablate " << train_config_str(inv.train)
      << " min_test_per_class=" << inv.min_test_per_class << " seeds=" << inv.seeds << "\n";
  inv.train.cfg.validate();
  if (inv.dry_run) return kOk;
  require_file(inv.paths.expr, "--expr");
  require_file(inv.paths.meta, "--meta");
  const Dataset ds = load_dataset(inv.paths.expr, inv.paths.meta);
  const AblationTable table = ablate_faac(ds, inv.train.cfg, lodo_options(inv), seeds);
  out << "mean_auroc_on=" << format_number(table.mean_on) << " mean_auroc_off="
      << format_number(table.mean_off) << " delta=" << format_number(table.mean_delta()) << "\n";
  if (!inv.paths.out_table.empty()) write_text(inv.paths.out_table, ablation_csv(table));
  if (!inv.paths.out_summary.empty()) write_text(inv.paths.out_summary, ablation_summary_csv(table));
  return kOk;
}

int cmd_gradcheck(Invocation& inv, std::ostream& out) {
  out << "config: command=gradcheck seed=" << inv.seed << "\n";
  if (inv.dry_run) return kOk;
  const GradCheckReport report = gradient_suite(inv.seed);
  for (const auto& c : report.cases) out << c.name << " max_rel_err=" << format_number(c.max_rel_err) << "\n";
  out << "parameters=" << report.parameters << "\n";
  out << "max_rel_err=" << format_number(report.max_rel_err) << "\n";
  return report.max_rel_err < 1e-4 ? kOk : kRuntime;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  Invocation inv;
  inv.seed = 0;
  CLI::App app{"Domain-generalized drug response prediction"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic multi-domain dataset");
  synth->add_option("--config", inv.paths.config, "Synthetic generator config (JSON)");
  synth->add_option("--out-expr", inv.paths.out_expr, "Expression CSV to write");
  synth->add_option("--out-meta", inv.paths.out_meta, "Metadata CSV to write");

  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--expr", inv.paths.expr, "Expression CSV/TSV");
  train->add_option("--meta", inv.paths.meta, "Metadata CSV");
  train->add_option("--val-expr", inv.paths.val_expr, "Validation expression for per-epoch AUROC");
  train->add_option("--val-meta", inv.paths.val_meta, "Validation metadata");
  train->add_option("--out-checkpoint", inv.paths.out_checkpoint, "Checkpoint JSON to write");
  train->add_option("--out-log", inv.paths.out_log, "Per-epoch training log CSV");
  train->add_option("--out-embedding", inv.paths.out_embedding, "2-D embedding CSV of learned features");
  add_train_flags(train, inv);

  auto* predict_cmd = app.add_subcommand("predict", "Score samples with a checkpoint");
  predict_cmd->add_option("--expr", inv.paths.expr, "Expression CSV/TSV");
  predict_cmd->add_option("--checkpoint", inv.paths.checkpoint, "Checkpoint JSON");
  predict_cmd->add_option("--out-scores", inv.paths.out_scores, "Scores CSV to write");

  auto* lodo = app.add_subcommand("lodo", "Leave-one-domain-out evaluation");
  auto* ablate = app.add_subcommand("ablate", "FAAC on/off comparison over seeds");
  for (auto* sub : {lodo, ablate}) {
    sub->add_option("--expr", inv.paths.expr, "Expression CSV/TSV");
    sub->add_option("--meta", inv.paths.meta, "Metadata CSV");
    sub->add_option("--min-test-per-class", inv.min_test_per_class,
                    "Minimum samples per class for a domain to be tested")
        ->capture_default_str();
    sub->add_option("--jobs", inv.jobs, "Folds trained concurrently")->capture_default_str();
    add_train_flags(sub, inv);
  }
  lodo->add_option("--out-report", inv.paths.out_report, "Per-domain report CSV");
  lodo->add_option("--out-roc", inv.paths.out_roc, "ROC points CSV");
  ablate->add_option("--seeds", inv.seeds, "Comma-separated seeds")->capture_default_str();
  ablate->add_option("--out-table", inv.paths.out_table, "Per-seed ablation CSV");
  ablate->add_option("--out-summary", inv.paths.out_summary, "Per-domain delta CSV");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");

  for (auto* sub : {synth, train, predict_cmd, lodo, ablate, gradcheck}) {
    add_seed(sub, inv);
    sub->add_flag("--dry-run", inv.dry_run, "Print the resolved config and exit");
  }

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("fourierdg");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  inv.train.cfg.seed = inv.seed;
  inv.train.cfg.faac_enabled = !inv.train.no_faac;

  try {
    if (synth->parsed()) return cmd_synth(inv, out);
    if (train->parsed()) return cmd_train(inv, out);
    if (predict_cmd->parsed()) return cmd_predict(inv, out);
    if (lodo->parsed()) return cmd_lodo(inv, out);
    if (ablate->parsed()) return cmd_ablate(inv, out);
    if (gradcheck->parsed()) return cmd_gradcheck(inv, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kValidation;
}

}  // namespace fourierdg::cli
