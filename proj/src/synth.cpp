#include "fourierdg/synth.hpp"

#include <cmath>
#include <cstdio>

#include "fourierdg/error.hpp"
#include "json.hpp"

namespace fourierdg {

namespace {

Vector unit_vector(std::size_t dim, Rng rng) {
  Vector v(dim);
  double sq = 0.0;
  for (double& x : v) {
    x = rng.normal();
    sq += x * x;
  }
  const double norm = std::sqrt(sq);
  for (double& x : v) x /= norm;
  return v;
}

// Stream keys for the generator's independent random draws.
enum : std::uint64_t {
  kSignatureStream = 1,
  kMechanismStream = 1000,
  kShiftStream = 2000,
  kSampleStream = 3000,
};

}  // namespace

void SynthConfig::validate() const {
  if (domains < 2) throw ParameterError("synth: domains must be >= 2");
  if (mechanisms < 2) throw ParameterError("synth: mechanisms must be >= 2");
  if (genes < 1) throw ParameterError("synth: genes must be >= 1");
  if (samples_per_domain < 1) throw ParameterError("synth: samples_per_domain must be >= 1");
  if (!(sensitive_fraction > 0.0 && sensitive_fraction < 1.0)) {
    throw ParameterError("synth: sensitive_fraction must be in (0, 1)");
  }
  for (double s : {signature_strength, mechanism_strength, shift_strength, noise}) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ParameterError("synth: strengths must be >= 0");
  }
}

std::string synth_domain_name(std::size_t m) { return "D" + std::to_string(m); }

SynthData generate(const SynthConfig& cfg) {
  cfg.validate();
  const Rng root(cfg.seed);
  const Vector signature = unit_vector(cfg.genes, root.fork(kSignatureStream));
  std::vector<Vector> mechanisms, shifts;
  for (std::size_t c = 0; c < cfg.mechanisms; ++c)
    mechanisms.push_back(unit_vector(cfg.genes, root.fork(kMechanismStream + c)));
  for (std::size_t m = 0; m < cfg.domains; ++m)
    shifts.push_back(unit_vector(cfg.genes, root.fork(kShiftStream + m)));

  const std::size_t n = cfg.samples_per_domain;
  const auto sensitive_count = static_cast<std::size_t>(
      std::llround(cfg.sensitive_fraction * static_cast<double>(n)));

  SynthData out;
  out.expr.gene_names.reserve(cfg.genes);
  for (std::size_t g = 0; g < cfg.genes; ++g) {
    char name[16];
    std::snprintf(name, sizeof(name), "g%04zu", g);
    out.expr.gene_names.emplace_back(name);
  }
  out.expr.values = Matrix(cfg.domains * n, cfg.genes);

  std::size_t row = 0;
  for (std::size_t m = 0; m < cfg.domains; ++m) {
    Rng rng = root.fork(kSampleStream + m);
    const std::vector<std::size_t> order = permutation(n, rng);
    for (std::size_t i = 0; i < n; ++i, ++row) {
      const bool sensitive = order[i] < sensitive_count;
      int mechanism = -1;
      const Vector* pattern = &signature;
      double strength = cfg.signature_strength;
      if (!sensitive) {
        mechanism = static_cast<int>(rng.below(cfg.mechanisms));
        pattern = &mechanisms[static_cast<std::size_t>(mechanism)];
        strength = cfg.mechanism_strength;
      }
      auto x = out.expr.values.row(row);
      for (std::size_t g = 0; g < cfg.genes; ++g) {
        x[g] = cfg.shift_strength * shifts[m][g] + strength * (*pattern)[g];
        if (cfg.noise > 0.0) x[g] += cfg.noise * rng.normal();
      }

      char id[48];
      std::snprintf(id, sizeof(id), "D%zu_s%04zu", m, i);
      out.expr.sample_ids.emplace_back(id);
      SampleMeta meta;
      meta.sample_id = id;
      meta.domain = synth_domain_name(m);
      meta.response = sensitive ? 1 : 0;
      // Log-IC50 proxy: lower for sensitive samples.
      meta.ic50 = (sensitive ? -1.0 : 1.0) + 0.25 * rng.normal();
      out.meta.push_back(std::move(meta));
      out.mechanism.push_back(mechanism);
    }
  }
  return out;
}

SynthConfig synth_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("synth config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("synth config: expected a JSON object");
  SynthConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "domains") cfg.domains = value.get<std::size_t>();
      else if (key == "genes") cfg.genes = value.get<std::size_t>();
      else if (key == "samples_per_domain") cfg.samples_per_domain = value.get<std::size_t>();
      else if (key == "sensitive_fraction") cfg.sensitive_fraction = value.get<double>();
      else if (key == "mechanisms") cfg.mechanisms = value.get<std::size_t>();
      else if (key == "signature_strength") cfg.signature_strength = value.get<double>();
      else if (key == "mechanism_strength") cfg.mechanism_strength = value.get<double>();
      else if (key == "shift_strength") cfg.shift_strength = value.get<double>();
      else if (key == "noise") cfg.noise = value.get<double>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else throw ParseError("synth config: unknown key \"" + key + "\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("synth config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string synth_config_to_json(const SynthConfig& cfg) {
  nlohmann::ordered_json j;
  j["domains"] = cfg.domains;
  j["genes"] = cfg.genes;
  j["samples_per_domain"] = cfg.samples_per_domain;
  j["sensitive_fraction"] = cfg.sensitive_fraction;
  j["mechanisms"] = cfg.mechanisms;
  j["signature_strength"] = cfg.signature_strength;
  j["mechanism_strength"] = cfg.mechanism_strength;
  j["shift_strength"] = cfg.shift_strength;
  j["noise"] = cfg.noise;
  j["seed"] = cfg.seed;
  return j.dump();
}

}  // namespace fourierdg
