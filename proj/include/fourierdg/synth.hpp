#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fourierdg/data.hpp"

namespace fourierdg {

// Multi-domain benchmark in which sensitive samples share one signature and
// resistant samples carry one of several unrelated mechanisms:
//   sensitive = shift_strength * delta_m + signature_strength * s   + noise * eps
//   resistant = shift_strength * delta_m + mechanism_strength * r_c + noise * eps
// s, r_c and delta_m are random unit vectors; eps is standard normal per gene.
struct SynthConfig {
  std::size_t domains = 6;
  std::size_t genes = 200;
  std::size_t samples_per_domain = 100;
  double sensitive_fraction = 0.5;
  std::size_t mechanisms = 4;
  double signature_strength = 3.0;
  double mechanism_strength = 3.0;
  double shift_strength = 2.0;
  double noise = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthData {
  GeneMatrix expr;
  std::vector<SampleMeta> meta;
  // Ground truth, for tests: mechanism index per sample (-1 for sensitive).
  std::vector<int> mechanism;
};

SynthData generate(const SynthConfig& cfg);

// Domain names are "D0", "D1", ...
std::string synth_domain_name(std::size_t m);

SynthConfig synth_config_from_json(const std::string& text);
std::string synth_config_to_json(const SynthConfig& cfg);

}  // namespace fourierdg
