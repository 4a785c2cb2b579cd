#pragma once

#include <stdexcept>
#include <string>

namespace dgseq {

// Error taxonomy. The CLI maps ConfigError/DataError/DimensionError/
// ContractError/DomainError to exit code 2 and NumericError to exit code 3.

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a loss, gradient or parameter becomes non-finite.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dgseq
