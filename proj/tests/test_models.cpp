#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "catn/errors.hpp"
#include "catn/models.hpp"
#include "catn/ops.hpp"
#include "test_util.hpp"

using namespace catn;
using testutil::to_vec;

namespace {

std::vector<double> flat_params(const ModelSuite& suite) {
  std::vector<double> out;
  for (const auto& p : collect_params(suite)) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

}  // namespace

TEST(BuildSuite, DefaultWidths) {
  ArchConfig arch;
  auto suite = build_suite(arch);
  EXPECT_EQ(suite.conditioned_width(), 32u);
  EXPECT_EQ(suite.domain_disc->in_dim(), 32u);
  EXPECT_FALSE(suite.maps.has_value());
  EXPECT_EQ(suite.s2t->in_dim(), 16u);
  EXPECT_EQ(suite.s2t->out_dim(), 16u);
  EXPECT_EQ(suite.t2s->out_dim(), 16u);
  EXPECT_EQ(suite.predictor.in_dim(), suite.feature.out_dim());
  EXPECT_EQ(suite.source_disc->in_dim(), 16u);
  EXPECT_EQ(suite.target_disc->in_dim(), 16u);
}

TEST(BuildSuite, Depths) {
  auto suite = build_suite(ArchConfig{});
  EXPECT_EQ(suite.feature.layers().size(), 3u);  // two hidden layers
  EXPECT_EQ(suite.predictor.layers().size(), 1u);
  EXPECT_EQ(suite.domain_disc->layers().size(), 3u);
  EXPECT_EQ(suite.s2t->layers().size(), 4u);
  EXPECT_EQ(suite.t2s->layers().size(), 4u);
  EXPECT_EQ(suite.source_disc->layers().size(), 3u);
  EXPECT_EQ(suite.target_disc->layers().size(), 3u);
  EXPECT_EQ(suite.predictor.spec().output_activation, OutputActivation::log_softmax);
  EXPECT_EQ(suite.domain_disc->spec().output_activation, OutputActivation::sigmoid);
}

TEST(BuildSuite, SameSeedSameBytes) {
  ArchConfig arch;
  arch.seed = 17;
  auto a = flat_params(build_suite(arch));
  auto b = flat_params(build_suite(arch));
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
  arch.seed = 18;
  EXPECT_NE(a, flat_params(build_suite(arch)));
}

// A network's initial weights do not depend on which other networks exist.
TEST(BuildSuite, NetworkInitIndependentOfOptionalParts) {
  ArchConfig full;
  ArchConfig bare = full;
  bare.domain_discriminator = false;
  bare.translation = false;
  auto a = build_suite(full);
  auto b = build_suite(bare);
  EXPECT_EQ(to_vec(a.feature.layers()[0].weight.data()), to_vec(b.feature.layers()[0].weight.data()));
  EXPECT_FALSE(b.domain_disc.has_value());
  EXPECT_FALSE(b.s2t.has_value());
  EXPECT_EQ(collect_params(b).size(), 8u);
}

TEST(BuildSuite, RandomizedBranchBuildsMaps) {
  ArchConfig arch;
  arch.feature_dim = 64;
  arch.num_classes = 65;
  arch.conditioning.random_dim = 48;
  auto suite = build_suite(arch);
  ASSERT_TRUE(suite.maps.has_value());
  EXPECT_EQ(suite.domain_disc->in_dim(), 48u);
  // maps are not parameters
  for (const auto& p : collect_params(suite)) {
    EXPECT_FALSE(p.tensor.same_node(suite.maps->feature_map));
    EXPECT_FALSE(p.tensor.same_node(suite.maps->prediction_map));
  }
}

TEST(BuildSuite, InvalidArch) {
  ArchConfig arch;
  arch.num_classes = 1;
  EXPECT_THROW(build_suite(arch), ContractError);
  arch = ArchConfig{};
  arch.feature_dim = 0;
  EXPECT_THROW(build_suite(arch), ContractError);
}

TEST(CollectParams, StableOrder) {
  auto a = collect_params(build_suite(ArchConfig{}));
  auto b = collect_params(build_suite(ArchConfig{}));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].name, b[i].name);
  EXPECT_EQ(a.front().name, "F.0.weight");
  EXPECT_EQ(a.back().name, "D_t.2.bias");
  EXPECT_EQ(generator_params(build_suite(ArchConfig{})).size() + discriminator_params(build_suite(ArchConfig{})).size(),
            a.size());
}

TEST(ForwardPass, AllNetworksFiniteAndDiscriminatorsInOpenInterval) {
  Rng rng(12);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ArchConfig arch;
    arch.seed = seed;
    auto suite = build_suite(arch);
    auto x = testutil::random_tensor({8, 2}, rng, false, 3.0);
    auto pred = predict(suite, x);
    auto h = condition(pred.features, pred.probs, arch.conditioning, nullptr);
    auto fs2t = translate(suite, pred.features, Direction::s2t);
    auto ft2s = translate(suite, pred.features, Direction::t2s);
    for (const auto& out : {suite.domain_disc->forward(h), suite.source_disc->forward(ft2s),
                            suite.target_disc->forward(fs2t)})
      for (double v : out.data()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
      }
    auto back = translate(suite, fs2t, Direction::t2s);
    for (double v : back.data()) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Predict, ProbabilityRowsAndShapes) {
  Rng rng(2);
  auto suite = build_suite(ArchConfig{});
  auto x = testutil::random_tensor({7, 2}, rng, false);
  auto pred = predict(suite, x);
  EXPECT_EQ(pred.features.shape(), (Shape{7, 16}));
  EXPECT_EQ(pred.probs.shape(), (Shape{7, 2}));
  for (std::size_t r = 0; r < 7; ++r) EXPECT_NEAR(pred.probs.at(r, 0) + pred.probs.at(r, 1), 1.0, 1e-12);
  auto again = predict(suite, x);
  EXPECT_EQ(to_vec(again.probs.data()), to_vec(pred.probs.data()));
}

TEST(Argmax, TiesGoToLowestIndex) {
  auto s = Tensor::matrix(3, 3, {0.2, 0.5, 0.5, 1, 1, 1, 0, 0, 0.1});
  EXPECT_EQ(argmax_rows(s), (std::vector<std::size_t>{1, 0, 2}));
}

TEST(Translate, ShapesAndCycleDiffers) {
  Rng rng(4);
  auto suite = build_suite(ArchConfig{});
  for (std::size_t batch : {1, 5, 33}) {
    auto f = testutil::random_tensor({batch, 16}, rng, false);
    auto round_trip = translate(suite, translate(suite, f, Direction::s2t), Direction::t2s);
    EXPECT_EQ(round_trip.shape(), f.shape());
    double diff = 0.0;
    for (std::size_t i = 0; i < f.numel(); ++i) diff += std::abs(round_trip.at(i) - f.at(i));
    EXPECT_GT(diff, 0.0);
  }
  EXPECT_THROW(translate(suite, Tensor::zeros({2, 15}), Direction::s2t), DimensionError);
}

TEST(Graph, NoCyclesInFullForward) {
  Rng rng(1);
  auto suite = build_suite(ArchConfig{});
  auto x = testutil::random_tensor({4, 2}, rng, false);
  auto pred = predict(suite, x);
  auto fwd = translate(suite, translate(suite, pred.features, Direction::s2t), Direction::t2s);
  auto loss = add(sum(fwd), sum(suite.domain_disc->forward(condition(pred.features, pred.probs, {}, nullptr))));
  auto order = topological_order(loss);
  // topological_order throws or loops on a cycle; reaching the root proves acyclicity
  EXPECT_TRUE(order.back().same_node(loss));
}
