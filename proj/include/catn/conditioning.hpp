#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "catn/tensor.hpp"

namespace catn {

// Fixed Gaussian projections for the randomized multilinear map. Built once
// from a seed and never trained.
struct RandomizedMaps {
  Tensor feature_map;     // [d, df]
  Tensor prediction_map;  // [d, dp]
  std::size_t dim = 0;
  std::uint64_t seed = 0;

  std::size_t feature_dim() const { return feature_map.dim(1); }
  std::size_t prediction_dim() const { return prediction_map.dim(1); }
};

RandomizedMaps make_randomized_maps(std::size_t feature_dim, std::size_t prediction_dim, std::size_t dim,
                                    std::uint64_t seed);

enum class ConditioningBranch { multilinear, randomized };

std::string_view to_string(ConditioningBranch branch);

struct ConditioningPolicy {
  // Exact map when feature_dim * prediction_dim <= threshold.
  std::size_t threshold = 4096;
  // Output width of the randomized branch.
  std::size_t random_dim = 1024;
  // Refuse exact outer products wider than this.
  std::size_t max_exact_dim = std::size_t{1} << 20;
  // Stop gradients from the conditioning path reaching the predictor.
  bool detach_prediction = false;

  bool operator==(const ConditioningPolicy&) const = default;
};

ConditioningBranch select_branch(std::size_t feature_dim, std::size_t prediction_dim,
                                 const ConditioningPolicy& policy);
std::size_t conditioned_width(std::size_t feature_dim, std::size_t prediction_dim, const ConditioningPolicy& policy);

// Row-wise flattened outer product f[batch,df] x p[batch,dp] -> [batch, df*dp].
Tensor multilinear_condition(const Tensor& f, const Tensor& p, std::size_t max_dim = std::size_t{1} << 20);

// (1/sqrt(d)) * (f R_f^T) .* (p R_p^T) -> [batch, d].
Tensor randomized_condition(const Tensor& f, const Tensor& p, const RandomizedMaps& maps);

// Dispatches on the policy threshold. `maps` must be non-null when the
// randomized branch is selected.
Tensor condition(const Tensor& f, const Tensor& p, const ConditioningPolicy& policy, const RandomizedMaps* maps);

}  // namespace catn
