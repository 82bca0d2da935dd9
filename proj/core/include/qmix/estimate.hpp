#pragma once

#include <cstdint>

namespace qmix {

// How a moment value was produced.
enum class Method {
  kDenseMc,         // Monte Carlo over coupling draws, exact trace per draw
  kReducedMc,       // Monte Carlo over random subsets inside the pair formula
  kExactSmall,      // exhaustive enumeration over subset tuples
  kLimitFormula,    // large-n limit via the pair-partition moment formula
  kFiniteNFormula,  // pair formula with exact sign expectations at finite n
};

const char* method_name(Method m);

// A moment value with its statistical provenance; exact methods carry
// std_err = 0 and samples = 0.
struct MomentEstimate {
  double value = 0.0;
  double std_err = 0.0;
  std::uint64_t samples = 0;
  Method method = Method::kExactSmall;
};

}  // namespace qmix
