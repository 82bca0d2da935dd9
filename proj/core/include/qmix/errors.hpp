#pragma once

#include <stdexcept>
#include <string>

namespace qmix {

// Thrown when a computation would exceed a configured resource cap
// (enumeration size, matrix dimension, index width).  Distinct from
// std::invalid_argument so callers can map it to a dedicated exit code.
class CapExceeded : public std::runtime_error {
 public:
  explicit CapExceeded(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qmix
