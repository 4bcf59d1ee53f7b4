#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "catn/gradcheck.hpp"

namespace catn {

// Named finite-difference checks over every op, the conditioning maps, each
// loss term, and the full objective on a seeded 4-sample batch.
struct ComponentResult {
  std::string component;
  GradCheckReport report;
};

const std::vector<std::string>& gradcheck_components();

// Empty `components` runs all of them. Unknown names throw ContractError.
std::vector<ComponentResult> run_gradcheck_suite(const std::vector<std::string>& components,
                                                 const GradCheckOptions& options = {}, std::uint64_t seed = 0);

}  // namespace catn
