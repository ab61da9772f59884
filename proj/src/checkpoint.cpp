#include <fstream>
#include <sstream>

#include "fourierdg/error.hpp"
#include "fourierdg/train.hpp"
#include "json.hpp"

namespace fourierdg {

namespace {

using json = nlohmann::ordered_json;

json to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(json(std::vector<double>(row.begin(), row.end())));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, std::size_t rows, std::size_t cols, const char* what) {
  if (!j.is_array() || j.size() != rows) {
    throw ParseError(std::string("checkpoint: ") + what + " must have " + std::to_string(rows) + " rows");
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != cols) {
      throw ParseError(std::string("checkpoint: ") + what + " rows must have " +
                       std::to_string(cols) + " entries");
    }
    for (const auto& v : row) data.push_back(v.get<double>());
  }
  return Matrix(rows, cols, std::move(data));
}

Vector vector_from_json(const json& j, std::size_t n, const char* what) {
  if (!j.is_array() || j.size() != n) {
    throw ParseError(std::string("checkpoint: ") + what + " must have " + std::to_string(n) + " entries");
  }
  return j.get<Vector>();
}

json dense_json(const Dense& d) { return {{"weight", to_json(d.weight)}, {"bias", d.bias}}; }

Dense dense_from_json(const json& j, std::size_t in, std::size_t out, const char* what) {
  return {matrix_from_json(j.at("weight"), in, out, what), vector_from_json(j.at("bias"), out, what)};
}

json bn_json(const BatchNormAffine& bn, const BatchNormState& state) {
  return {{"gamma", bn.gamma},
          {"beta", bn.beta},
          {"running_mean", state.running_mean},
          {"running_var", state.running_var}};
}

void bn_from_json(const json& j, std::size_t width, BatchNormAffine& bn, BatchNormState& state,
                  const char* what) {
  bn.gamma = vector_from_json(j.at("gamma"), width, what);
  bn.beta = vector_from_json(j.at("beta"), width, what);
  state.running_mean = vector_from_json(j.at("running_mean"), width, what);
  state.running_var = vector_from_json(j.at("running_var"), width, what);
}

json config_json(const TrainConfig& c) {
  return {{"lambda1", c.lambda1},         {"lambda2", c.lambda2},
          {"lr", c.lr},                   {"batch_size", c.batch_size},
          {"epochs", c.epochs},           {"seed", c.seed},
          {"faac_enabled", c.faac_enabled}, {"grl_coefficient", c.grl_coefficient},
          {"dropout_p", c.dropout_p},     {"hidden", c.hidden},
          {"feature_dim", c.feature_dim}, {"disc_hidden", c.disc_hidden}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.lambda1 = j.at("lambda1").get<double>();
  c.lambda2 = j.at("lambda2").get<double>();
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.faac_enabled = j.at("faac_enabled").get<bool>();
  c.grl_coefficient = j.at("grl_coefficient").get<double>();
  c.dropout_p = j.at("dropout_p").get<double>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.feature_dim = j.at("feature_dim").get<std::size_t>();
  c.disc_hidden = j.at("disc_hidden").get<std::size_t>();
  return c;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  const ModelParams& p = ckpt.params;
  const ModelShape& s = p.shape;
  const Weights& w = p.weights;
  json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["d"] = s.feature_dim;
  j["M"] = s.domains;
  j["shape"] = {{"genes", s.genes},
                {"hidden", s.hidden},
                {"feature_dim", s.feature_dim},
                {"disc_hidden", s.disc_hidden},
                {"domains", s.domains}};
  j["gene_list"] = p.gene_list;
  j["domain_names"] = ckpt.domain_names;
  j["normalization"] = {{"genes", ckpt.norm.genes}, {"mean", ckpt.norm.mean}, {"std", ckpt.norm.std}};
  j["grl"] = {{"coefficient", ckpt.grl.coefficient}};
  j["train_config"] = config_json(ckpt.config);
  j["parameters"] = {{"enc1", dense_json(w.enc1)},
                     {"bn1", bn_json(w.bn1, p.bn1_state)},
                     {"enc2", dense_json(w.enc2)},
                     {"bn2", bn_json(w.bn2, p.bn2_state)},
                     {"classifier", dense_json(w.classifier)},
                     {"disc_hidden", dense_json(w.disc_hidden)},
                     {"disc_out", dense_json(w.disc_out)}};
  return j.dump() + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw ParseError("checkpoint: unsupported format_version " + std::to_string(version));
    }
    Checkpoint ckpt;
    ModelShape& s = ckpt.params.shape;
    const json& shape = j.at("shape");
    s.genes = shape.at("genes").get<std::size_t>();
    s.hidden = shape.at("hidden").get<std::size_t>();
    s.feature_dim = shape.at("feature_dim").get<std::size_t>();
    s.disc_hidden = shape.at("disc_hidden").get<std::size_t>();
    s.domains = shape.at("domains").get<std::size_t>();
    if (j.at("d").get<std::size_t>() != s.feature_dim || j.at("M").get<std::size_t>() != s.domains) {
      throw ParseError("checkpoint: d/M disagree with shape");
    }
    ckpt.params.gene_list = j.at("gene_list").get<std::vector<std::string>>();
    if (ckpt.params.gene_list.size() != s.genes) {
      throw ParseError("checkpoint: gene_list length does not match input width");
    }
    ckpt.domain_names = j.at("domain_names").get<std::vector<std::string>>();
    const json& norm = j.at("normalization");
    ckpt.norm.genes = norm.at("genes").get<std::vector<std::string>>();
    ckpt.norm.mean = vector_from_json(norm.at("mean"), ckpt.norm.genes.size(), "normalization mean");
    ckpt.norm.std = vector_from_json(norm.at("std"), ckpt.norm.genes.size(), "normalization std");
    ckpt.grl.coefficient = j.at("grl").at("coefficient").get<double>();
    ckpt.config = config_from_json(j.at("train_config"));

    const json& pj = j.at("parameters");
    Weights& w = ckpt.params.weights;
    w.enc1 = dense_from_json(pj.at("enc1"), s.genes, s.hidden, "enc1");
    bn_from_json(pj.at("bn1"), s.hidden, w.bn1, ckpt.params.bn1_state, "bn1");
    w.enc2 = dense_from_json(pj.at("enc2"), s.hidden, s.feature_dim, "enc2");
    bn_from_json(pj.at("bn2"), s.feature_dim, w.bn2, ckpt.params.bn2_state, "bn2");
    w.classifier = dense_from_json(pj.at("classifier"), s.feature_dim, 1, "classifier");
    w.disc_hidden = dense_from_json(pj.at("disc_hidden"), s.feature_dim, s.disc_hidden, "disc_hidden");
    w.disc_out = dense_from_json(pj.at("disc_out"), s.disc_hidden, s.domains, "disc_out");
    ckpt.params.basis = std::make_shared<const FourierBasis>(s.feature_dim);
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << checkpoint_to_json(ckpt);
  if (!out) throw Error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace fourierdg
