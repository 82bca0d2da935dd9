#include "qmix/estimate.hpp"

namespace qmix {

const char* method_name(Method m) {
  switch (m) {
    case Method::kDenseMc:
      return "dense-mc";
    case Method::kReducedMc:
      return "reduced-mc";
    case Method::kExactSmall:
      return "exact-small";
    case Method::kLimitFormula:
      return "limit-formula";
    case Method::kFiniteNFormula:
      return "finite-n-formula";
  }
  return "unknown";
}

}  // namespace qmix
