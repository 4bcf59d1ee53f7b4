#pragma once

#include <stdexcept>
#include <string>

namespace catn {

// Shapes that do not line up for an operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller broke a documented precondition (non-scalar loss, label out of
// range, missing evaluation labels, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// An operation produced NaN or Inf. The message names the operation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or mismatched files: CSV datasets, checkpoints, configs.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace catn
