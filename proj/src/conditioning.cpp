#include "catn/conditioning.hpp"

#include <cmath>
#include <string>

#include "catn/errors.hpp"
#include "catn/ops.hpp"
#include "catn/rng.hpp"

namespace catn {

namespace {

Tensor gaussian_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> values(rows * cols);
  for (auto& v : values) v = rng.normal();
  return Tensor::from({rows, cols}, std::move(values), false);
}

void check_pair(const Tensor& f, const Tensor& p, const char* op) {
  if (f.rank() != 2 || p.rank() != 2 || f.dim(0) != p.dim(0))
    throw DimensionError(std::string(op) + ": expected f[batch,df] and p[batch,dp], got " + shape_str(f.shape()) +
                         " and " + shape_str(p.shape()));
}

}  // namespace

RandomizedMaps make_randomized_maps(std::size_t feature_dim, std::size_t prediction_dim, std::size_t dim,
                                    std::uint64_t seed) {
  if (feature_dim == 0 || prediction_dim == 0 || dim == 0)
    throw DimensionError("randomized maps need positive dimensions");
  Rng rng(seed);
  RandomizedMaps maps;
  maps.feature_map = gaussian_matrix(dim, feature_dim, rng);
  maps.prediction_map = gaussian_matrix(dim, prediction_dim, rng);
  maps.dim = dim;
  maps.seed = seed;
  return maps;
}

std::string_view to_string(ConditioningBranch branch) {
  return branch == ConditioningBranch::multilinear ? "multilinear" : "randomized";
}

ConditioningBranch select_branch(std::size_t feature_dim, std::size_t prediction_dim,
                                 const ConditioningPolicy& policy) {
  return feature_dim * prediction_dim <= policy.threshold ? ConditioningBranch::multilinear
                                                          : ConditioningBranch::randomized;
}

std::size_t conditioned_width(std::size_t feature_dim, std::size_t prediction_dim, const ConditioningPolicy& policy) {
  return select_branch(feature_dim, prediction_dim, policy) == ConditioningBranch::multilinear
             ? feature_dim * prediction_dim
             : policy.random_dim;
}

Tensor multilinear_condition(const Tensor& f, const Tensor& p, std::size_t max_dim) {
  check_pair(f, p, "multilinear_condition");
  if (f.dim(1) * p.dim(1) > max_dim)
    throw DimensionError("multilinear_condition: output width " + std::to_string(f.dim(1) * p.dim(1)) +
                         " exceeds the cap " + std::to_string(max_dim));
  return row_outer(f, p);
}

Tensor randomized_condition(const Tensor& f, const Tensor& p, const RandomizedMaps& maps) {
  check_pair(f, p, "randomized_condition");
  if (f.dim(1) != maps.feature_dim() || p.dim(1) != maps.prediction_dim())
    throw DimensionError("randomized_condition: maps built for (" + std::to_string(maps.feature_dim()) + ", " +
                         std::to_string(maps.prediction_dim()) + "), inputs are (" + std::to_string(f.dim(1)) +
                         ", " + std::to_string(p.dim(1)) + ")");
  const Tensor projected_f = matmul(f, transpose(maps.feature_map));
  const Tensor projected_p = matmul(p, transpose(maps.prediction_map));
  return scale(mul(projected_f, projected_p), 1.0 / std::sqrt(static_cast<double>(maps.dim)));
}

Tensor condition(const Tensor& f, const Tensor& p, const ConditioningPolicy& policy, const RandomizedMaps* maps) {
  check_pair(f, p, "condition");
  const Tensor prediction = policy.detach_prediction ? p.detach() : p;
  if (select_branch(f.dim(1), p.dim(1), policy) == ConditioningBranch::multilinear)
    return multilinear_condition(f, prediction, policy.max_exact_dim);
  if (maps == nullptr) throw ContractError("condition: randomized branch selected but no maps were supplied");
  return randomized_condition(f, prediction, *maps);
}

}  // namespace catn
