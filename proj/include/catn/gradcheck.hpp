#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "catn/tensor.hpp"

namespace catn {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradCheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
  // Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 5e-5;
  // The analytic gradient is expected to equal expected_scale * numeric.
  // -coeff checks gradients that pass through a reversal node.
  double expected_scale = 1.0;
};

struct TensorCheck {
  std::string name;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0.0;
  // "<tensor name>[<flat index>]" of the worst entry.
  std::string worst_location;
  bool passed = false;
  // Set when evaluation itself failed (non-finite value, shape error).
  std::optional<std::string> failure;
};

double relative_error(double analytic, double numeric, double floor);

// Compares precomputed analytic gradients (one buffer per input, same order)
// against central differences of `value`, which must re-evaluate the
// function from the current contents of the inputs.
GradCheckReport compare_gradients(const std::function<double()>& value,
                                  const std::vector<std::vector<double>>& analytic,
                                  std::span<const NamedTensor> inputs, const GradCheckOptions& options = {});

// Builds the graph with `fn`, runs backward, and checks every element of
// every input against central differences.
GradCheckReport finite_diff_check(const std::function<Tensor()>& fn, std::span<const NamedTensor> inputs,
                                  const GradCheckOptions& options = {});

}  // namespace catn
