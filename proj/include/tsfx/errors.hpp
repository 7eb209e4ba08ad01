#pragma once

#include <stdexcept>
#include <string>

namespace tsfx {

// Tensor shapes do not conform for an operation.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Scalar argument outside its admissible range.
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Inconsistent dataset / effect / experiment specification.
struct SpecError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A call-contract violation (non-scalar loss, prediction coverage gap, ...).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Math domain violation (formula pole, undefined correlation).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Training diverged; message carries epoch/batch/loss diagnostics.
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tsfx
