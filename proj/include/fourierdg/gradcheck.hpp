#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fourierdg {

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double max_rel_err = 0.0;
  std::size_t parameters = 0;
};

// Central-difference check of every trainable parameter of a reduced network
// (12 -> 10 -> 8 genes/hidden/features, 3 domains, batch of 6, dropout off)
// for the asymmetric, domain and classification losses separately and for
// the weighted total. Encoder parameters are compared against the GRL
// surrogate objective, in which the domain term enters with weight
// -coefficient; head parameters against the plain objective.
GradCheckReport gradient_suite(std::uint64_t seed = 7, double h = 1e-5);

}  // namespace fourierdg
