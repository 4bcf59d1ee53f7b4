#include <gtest/gtest.h>

#include <cmath>

#include "catn/conditioning.hpp"
#include "catn/errors.hpp"
#include "catn/ops.hpp"
#include "test_util.hpp"

using namespace catn;
using testutil::to_vec;

TEST(Multilinear, Examples) {
  auto out = multilinear_condition(Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(1, 2, {0.75, 0.25}));
  EXPECT_EQ(to_vec(out.data()), (std::vector<double>{0.75, 0.25, 1.5, 0.5}));

  // one-hot p at class 1 places f in block 1
  auto f = Tensor::matrix(1, 3, {4, 5, 6});
  auto onehot = multilinear_condition(f, Tensor::matrix(1, 2, {0, 1}));
  EXPECT_EQ(to_vec(onehot.data()), (std::vector<double>{0, 4, 0, 5, 0, 6}));

  Rng rng(1);
  auto batch = multilinear_condition(testutil::random_tensor({3, 4}, rng), testutil::random_tensor({3, 5}, rng));
  EXPECT_EQ(batch.shape(), (Shape{3, 20}));
}

TEST(Multilinear, CapGuard) {
  EXPECT_THROW(multilinear_condition(Tensor::zeros({1, 10}), Tensor::zeros({1, 10}), 99), DimensionError);
  EXPECT_NO_THROW(multilinear_condition(Tensor::zeros({1, 10}), Tensor::zeros({1, 10}), 100));
}

TEST(Multilinear, InnerProductIdentityAndBilinearity) {
  Rng rng(42);
  for (int pair = 0; pair < 100; ++pair) {
    const std::size_t df = 1 + rng.below(16), dp = 2 + rng.below(8);
    auto f = testutil::random_vector(df, rng), f2 = testutil::random_vector(df, rng);
    auto p = testutil::random_vector(dp, rng), p2 = testutil::random_vector(dp, rng);
    auto a = multilinear_condition(Tensor::matrix(1, df, f), Tensor::matrix(1, dp, p));
    auto b = multilinear_condition(Tensor::matrix(1, df, f2), Tensor::matrix(1, dp, p2));
    ASSERT_EQ(a.numel(), df * dp);
    EXPECT_NEAR(testutil::dot(to_vec(a.data()), to_vec(b.data())), testutil::dot(f, f2) * testutil::dot(p, p2), 1e-9);

    const double alpha = rng.uniform(-2, 2);
    auto scaled = multilinear_condition(scale(Tensor::matrix(1, df, f), alpha), Tensor::matrix(1, dp, p));
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(scaled.at(i), alpha * a.at(i), 1e-12);
  }
}

TEST(Randomized, Examples) {
  auto maps = make_randomized_maps(3, 2, 8, 5);
  auto zero = randomized_condition(Tensor::zeros({2, 3}), Tensor::matrix(2, 2, {0.5, 0.5, 1, 0}), maps);
  EXPECT_EQ(zero.shape(), (Shape{2, 8}));
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);

  RandomizedMaps ones{Tensor::matrix(1, 3, {1, 1, 1}), Tensor::matrix(1, 2, {1, 1}), 1, 0};
  auto out = randomized_condition(Tensor::matrix(1, 3, {1, 2, 3}), Tensor::matrix(1, 2, {0.25, 0.5}), ones);
  EXPECT_NEAR(out.item(), 6.0 * 0.75, 1e-15);
}

TEST(Randomized, DimensionMismatch) {
  auto maps = make_randomized_maps(3, 2, 8, 5);
  EXPECT_THROW(randomized_condition(Tensor::zeros({1, 4}), Tensor::zeros({1, 2}), maps), DimensionError);
  EXPECT_THROW(randomized_condition(Tensor::zeros({1, 3}), Tensor::zeros({1, 3}), maps), DimensionError);
}

TEST(Randomized, MapsAreFixedAndSeeded) {
  auto a = make_randomized_maps(16, 8, 64, 99);
  auto b = make_randomized_maps(16, 8, 64, 99);
  auto c = make_randomized_maps(16, 8, 64, 100);
  EXPECT_EQ(to_vec(a.feature_map.data()), to_vec(b.feature_map.data()));
  EXPECT_EQ(to_vec(a.prediction_map.data()), to_vec(b.prediction_map.data()));
  EXPECT_NE(to_vec(a.feature_map.data()), to_vec(c.feature_map.data()));
  EXPECT_FALSE(a.feature_map.requires_grad());
  EXPECT_FALSE(a.prediction_map.requires_grad());
  EXPECT_EQ(a.feature_map.shape(), (Shape{64, 16}));
  EXPECT_EQ(a.prediction_map.shape(), (Shape{64, 8}));
}

namespace {

// Mean and variance over map draws of <rand(f,p), rand(f',p')>.
std::pair<double, double> randomized_inner_product_stats(const std::vector<double>& f, const std::vector<double>& p,
                                                         const std::vector<double>& f2, const std::vector<double>& p2,
                                                         std::size_t d, int draws) {
  const auto df = f.size(), dp = p.size();
  auto tf = Tensor::matrix(2, df, [&] {
    auto v = f;
    v.insert(v.end(), f2.begin(), f2.end());
    return v;
  }());
  auto tp = Tensor::matrix(2, dp, [&] {
    auto v = p;
    v.insert(v.end(), p2.begin(), p2.end());
    return v;
  }());
  double sum = 0.0, sum_sq = 0.0;
  for (int k = 0; k < draws; ++k) {
    auto maps = make_randomized_maps(df, dp, d, derive_seed(1000 + d, k));
    auto out = randomized_condition(tf, tp, maps);
    double ip = 0.0;
    for (std::size_t j = 0; j < d; ++j) ip += out.at(0, j) * out.at(1, j);
    sum += ip;
    sum_sq += ip * ip;
  }
  const double mean = sum / draws;
  return {mean, sum_sq / draws - mean * mean};
}

}  // namespace

// The expectation over Gaussian maps equals the exact outer-product inner
// product <f,f'><p,p'>.
TEST(Randomized, MonteCarloUnbiased) {
  Rng rng(2024);
  auto f = testutil::random_vector(16, rng), f2 = testutil::random_vector(16, rng);
  auto p = testutil::random_vector(8, rng), p2 = testutil::random_vector(8, rng);
  for (auto& v : p) v = std::abs(v);
  for (auto& v : p2) v = std::abs(v);
  const double exact = testutil::dot(f, f2) * testutil::dot(p, p2);
  const auto [mean, var] = randomized_inner_product_stats(f, p, f2, p2, 64, 10000);
  EXPECT_LT(std::abs(mean - exact) / std::abs(exact), 0.05) << "mean " << mean << " exact " << exact;
}

TEST(Randomized, VarianceShrinksWithDimension) {
  Rng rng(7);
  auto f = testutil::random_vector(16, rng), f2 = testutil::random_vector(16, rng);
  auto p = testutil::random_vector(8, rng), p2 = testutil::random_vector(8, rng);
  double prev = INFINITY;
  for (std::size_t d : {16, 64, 256}) {
    const auto [mean, var] = randomized_inner_product_stats(f, p, f2, p2, d, 2000);
    EXPECT_LT(var, prev) << "d=" << d;
    prev = var;
  }
}

TEST(Dispatch, ThresholdRule) {
  ConditioningPolicy policy;
  EXPECT_EQ(select_branch(64, 10, policy), ConditioningBranch::multilinear);
  EXPECT_EQ(conditioned_width(64, 10, policy), 640u);
  EXPECT_EQ(select_branch(512, 31, policy), ConditioningBranch::randomized);
  EXPECT_EQ(conditioned_width(512, 31, policy), policy.random_dim);
  EXPECT_EQ(select_branch(64, 64, policy), ConditioningBranch::multilinear);
  EXPECT_EQ(select_branch(64, 65, policy), ConditioningBranch::randomized);

  ConditioningPolicy small;
  small.threshold = 10;
  EXPECT_EQ(select_branch(4, 2, small), ConditioningBranch::multilinear);
  EXPECT_EQ(select_branch(4, 3, small), ConditioningBranch::randomized);
}

TEST(Dispatch, ConditionRoutesAndRequiresMaps) {
  ConditioningPolicy policy;
  policy.threshold = 10;
  policy.random_dim = 7;
  Rng rng(3);
  auto f = testutil::random_tensor({2, 4}, rng), p = testutil::random_tensor({2, 3}, rng);
  EXPECT_THROW(condition(f, p, policy, nullptr), ContractError);
  auto maps = make_randomized_maps(4, 3, 7, 1);
  EXPECT_EQ(condition(f, p, policy, &maps).shape(), (Shape{2, 7}));
  auto p2 = testutil::random_tensor({2, 2}, rng);
  EXPECT_EQ(condition(f, p2, policy, nullptr).shape(), (Shape{2, 8}));
}

// Same dims always take the same branch; the width never depends on values.
TEST(Dispatch, PureFunctionOfDims) {
  Rng rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t df = 1 + rng.below(200), dp = 2 + rng.below(60);
    ConditioningPolicy policy;
    policy.threshold = 1 + rng.below(8192);
    const auto branch = select_branch(df, dp, policy);
    EXPECT_EQ(branch, select_branch(df, dp, policy));
    EXPECT_EQ(branch == ConditioningBranch::multilinear, df * dp <= policy.threshold);
    EXPECT_EQ(conditioned_width(df, dp, policy), branch == ConditioningBranch::multilinear ? df * dp : policy.random_dim);
  }
}
