#pragma once

#include <stdexcept>
#include <string>

namespace cslr {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape disagreement between operands or against a declared contract.
struct DimensionError : Error {
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// NaN/Inf surfaced by a forward op, or training divergence.
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Malformed dataset files, vocabulary mismatches, record-level problems.
struct DataError : Error {
  explicit DataError(const std::string& msg) : Error(msg) {}
};

// Bad CLI arguments, config files, checkpoint/config mismatches.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Target cannot be aligned within the available frames. Distinct from
// NumericError so callers can report the offending sample.
struct InfeasibleAlignmentError : Error {
  explicit InfeasibleAlignmentError(const std::string& msg) : Error(msg) {}
};

}  // namespace cslr
