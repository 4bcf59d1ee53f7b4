#include "catn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "catn/errors.hpp"

namespace catn {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

std::string location(const std::string& name, std::size_t index) { return name + "[" + std::to_string(index) + "]"; }

}  // namespace

GradCheckReport compare_gradients(const std::function<double()>& value,
                                  const std::vector<std::vector<double>>& analytic,
                                  std::span<const NamedTensor> inputs, const GradCheckOptions& options) {
  if (!(options.eps > 0.0 && options.eps <= 1e-2)) throw ContractError("gradient check eps must lie in (0, 1e-2]");
  if (analytic.size() != inputs.size()) throw ContractError("one analytic gradient buffer per input is required");

  GradCheckReport report;
  report.passed = true;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto tensor = inputs[t].tensor;
    if (!tensor.is_leaf()) throw ContractError("gradient check inputs must be leaf tensors: " + inputs[t].name);
    if (analytic[t].size() != tensor.numel())
      throw ContractError("analytic gradient size mismatch for " + inputs[t].name);
    auto values = tensor.mutable_data();
    TensorCheck check{.name = inputs[t].name};
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      double plus = 0.0;
      double minus = 0.0;
      try {
        values[i] = original + options.eps;
        plus = value();
        values[i] = original - options.eps;
        minus = value();
        values[i] = original;
      } catch (const std::exception& e) {
        values[i] = original;
        report.passed = false;
        report.failure = "evaluation failed while perturbing " + location(inputs[t].name, i) + ": " + e.what();
        report.worst_location = location(inputs[t].name, i);
        return report;
      }
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        report.passed = false;
        report.failure = "non-finite function value while perturbing " + location(inputs[t].name, i);
        report.worst_location = location(inputs[t].name, i);
        return report;
      }
      const double numeric = options.expected_scale * (plus - minus) / (2.0 * options.eps);
      const double err = relative_error(analytic[t][i], numeric, options.floor);
      if (err > check.max_rel_error || i == 0) {
        check.max_rel_error = err;
        check.worst_index = i;
        check.analytic = analytic[t][i];
        check.numeric = numeric;
      }
    }
    if (check.max_rel_error > report.max_rel_error || t == 0) {
      report.max_rel_error = check.max_rel_error;
      report.worst_location = location(check.name, check.worst_index);
    }
    report.tensors.push_back(std::move(check));
  }
  report.passed = report.max_rel_error < options.tol;
  return report;
}

GradCheckReport finite_diff_check(const std::function<Tensor()>& fn, std::span<const NamedTensor> inputs,
                                  const GradCheckOptions& options) {
  std::vector<std::vector<double>> analytic;
  try {
    for (const auto& in : inputs) {
      auto t = in.tensor;
      if (!t.requires_grad()) throw ContractError("gradient check input does not require grad: " + in.name);
      t.clear_grad();
    }
    const Tensor loss = fn();
    if (!loss.is_scalar()) throw ContractError("gradient check function must return a scalar");
    loss.backward();
    for (const auto& in : inputs) {
      if (in.tensor.has_grad()) {
        const auto g = in.tensor.grad();
        analytic.emplace_back(g.begin(), g.end());
      } else {
        analytic.emplace_back(in.tensor.numel(), 0.0);
      }
    }
  } catch (const NumericError& e) {
    GradCheckReport report;
    report.failure = std::string("analytic pass failed: ") + e.what();
    return report;
  }
  auto value = [&fn] { return fn().item(); };
  return compare_gradients(value, analytic, inputs, options);
}

}  // namespace catn
