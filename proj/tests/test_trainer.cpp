#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "catn/errors.hpp"
#include "catn/trainer.hpp"
#include "test_util.hpp"

using namespace catn;
using testutil::TempDir;

namespace {

DomainPair small_moons(std::size_t n = 120, std::uint64_t seed = 0) {
  return gen_two_moons_pair(n, ShiftSpec{.rotation_deg = 45.0, .noise_std = 0.1}, seed);
}

TrainConfig short_config(AblationMode mode, std::size_t steps) {
  TrainConfig cfg;
  cfg.ablation_mode = mode;
  cfg.total_steps = steps;
  cfg.eval_every = 10;
  return cfg;
}

// Single linear predictor whose logit is +-x0, so the label of a row is
// fixed by the sign of its first feature.
ModelSuite sign_classifier() {
  ArchConfig arch;
  arch.domain_discriminator = false;
  arch.translation = false;
  auto suite = build_suite(arch);
  auto zero_all = [](const Mlp& m) {
    for (const auto& layer : m.layers()) {
      auto w = layer.weight, b = layer.bias;
      std::fill(w.mutable_data().begin(), w.mutable_data().end(), 0.0);
      std::fill(b.mutable_data().begin(), b.mutable_data().end(), 0.0);
    }
  };
  zero_all(suite.feature);
  zero_all(suite.predictor);
  // F passes x0 and -x0 through relu; P reads class 1 from the first unit.
  const auto& f = suite.feature.layers();
  auto w0 = f[0].weight;
  w0.mutable_data()[0] = 1.0;
  w0.mutable_data()[2] = -1.0;
  auto w1 = f[1].weight;
  w1.mutable_data()[0] = 1.0;
  w1.mutable_data()[64 + 1] = 1.0;
  auto w2 = f[2].weight;
  w2.mutable_data()[0] = 1.0;
  w2.mutable_data()[64 + 1] = 1.0;
  auto p = suite.predictor.layers()[0].weight;
  p.mutable_data()[1] = 1.0;        // class 0 <- negative part
  p.mutable_data()[16 + 0] = 1.0;  // class 1 <- positive part
  return suite;
}

}  // namespace

TEST(Schedules, ConstantByDefault) {
  TrainConfig cfg;
  EXPECT_EQ(learning_rate(cfg, 0), 1e-3);
  EXPECT_EQ(learning_rate(cfg, 4999), 1e-3);
  cfg.lr_decay = true;
  EXPECT_EQ(learning_rate(cfg, 0), 1e-3);
  EXPECT_NEAR(learning_rate(cfg, cfg.total_steps), 1e-3 * std::pow(11.0, -0.75), 1e-18);
  cfg.grl_warmup = true;
  EXPECT_EQ(reversal_coefficient(cfg, 0), 0.0);
  EXPECT_NEAR(reversal_coefficient(cfg, cfg.total_steps / 2), 2.0 / (1.0 + std::exp(-5.0)) - 1.0, 1e-15);
  cfg.grl_warmup = false;
  EXPECT_EQ(reversal_coefficient(cfg, 0), 1.0);
}

TEST(Modes, WeightAndNetworkMapping) {
  const LossWeights base;
  EXPECT_EQ(weights_for_mode(base, AblationMode::S0), (LossWeights{.lambda = 0, .beta = 1, .eta1 = 0, .eta2 = 0}));
  EXPECT_EQ(weights_for_mode(base, AblationMode::S1), (LossWeights{.lambda = 1, .beta = 1, .eta1 = 0, .eta2 = 0}));
  EXPECT_EQ(weights_for_mode(base, AblationMode::S2), (LossWeights{.lambda = 1, .beta = 1, .eta1 = 0.01, .eta2 = 0}));
  EXPECT_EQ(weights_for_mode(base, AblationMode::S3), base);
  EXPECT_EQ(weights_for_mode(base, AblationMode::S4), (LossWeights{.lambda = 0, .beta = 1, .eta1 = 0.01, .eta2 = 0.1}));
  const ArchConfig arch;
  auto a0 = arch_for_mode(arch, AblationMode::S0);
  EXPECT_FALSE(a0.domain_discriminator || a0.translation);
  EXPECT_TRUE(arch_for_mode(arch, AblationMode::S1).domain_discriminator);
  EXPECT_FALSE(arch_for_mode(arch, AblationMode::S1).translation);
  EXPECT_TRUE(arch_for_mode(arch, AblationMode::S3).translation);
  EXPECT_FALSE(arch_for_mode(arch, AblationMode::S4).domain_discriminator);
  EXPECT_THROW(ablation_mode_from_string("S5"), ContractError);
  EXPECT_THROW(minimax_mode_from_string("joint"), ContractError);
}

TEST(Train, ZeroStepsReturnsInitialSuite) {
  auto data = small_moons();
  auto cfg = short_config(AblationMode::S3, 0);
  auto result = train(cfg, data);
  EXPECT_TRUE(result.history.empty());
  EXPECT_EQ(result.stats.steps, 0u);
  auto fresh = build_suite(result.config.arch);
  auto a = collect_params(result.suite), b = collect_params(fresh);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_EQ(testutil::to_vec(a[i].tensor.data()), testutil::to_vec(b[i].tensor.data()));
}

TEST(Train, DeterministicMetricsFiles) {
  TempDir dir("train");
  auto data = small_moons();
  for (auto minimax : {MinimaxMode::grl, MinimaxMode::alternating}) {
    auto cfg = short_config(AblationMode::S3, 40);
    cfg.minimax_mode = minimax;
    write_metrics_csv(dir / "a.csv", train(cfg, data).history);
    write_metrics_csv(dir / "b.csv", train(cfg, data).history);
    EXPECT_EQ(testutil::read_file(dir / "a.csv"), testutil::read_file(dir / "b.csv"));
    cfg.seed = 1;
    write_metrics_csv(dir / "c.csv", train(cfg, data).history);
    EXPECT_NE(testutil::read_file(dir / "a.csv"), testutil::read_file(dir / "c.csv"));
  }
}

// Two well separated Gaussian blobs: a linear boundary classifies every
// sample. The first logged step at or above 0.99 is pinned in the fixture.
TEST(Train, SourceOnlyFitsSeparableSource) {
  GaussianMixtureSpec blobs{.means = {{-1.5, 0.0}, {1.5, 0.0}},
                            .covariances = {{0.1, 0.0, 0.0, 0.1}, {0.1, 0.0, 0.0, 0.1}}};
  auto data = gen_gaussian_shift_pair(500, blobs, ShiftSpec{.rotation_deg = 45.0}, 0);
  auto cfg = short_config(AblationMode::S0, 2000);
  cfg.eval_every = 100;
  auto result = train(cfg, data);
  std::size_t first = 0;
  for (const auto& r : result.history)
    if (first == 0 && r.source_acc >= 0.99) first = r.step;
  std::cout << "source accuracy reached 0.99 at step " << first << "\n";
  EXPECT_GE(result.history.back().source_acc, 0.99);
  EXPECT_GT(first, 0u);
  EXPECT_EQ(first, testutil::load_fixture("source_only_separable.json").at("first_step_at_0_99").get<std::size_t>());
  EXPECT_EQ(result.stats.target_batches, 0u);
  EXPECT_EQ(result.stats.source_batches, 2000u);
  EXPECT_TRUE(std::isnan(result.history.back().d_d_mean_out));
}

TEST(Train, HistoryCadenceAndLossIdentities) {
  auto data = small_moons();
  auto cfg = short_config(AblationMode::S3, 95);
  auto result = train(cfg, data);
  ASSERT_EQ(result.history.size(), 10u);
  EXPECT_EQ(result.history.back().step, 95u);
  const auto& w = result.config.weights;
  for (const auto& r : result.history) {
    EXPECT_EQ(r.l_con, r.l_cls + w.lambda * r.l_dom);
    EXPECT_EQ(r.l_total, r.l_con + w.eta1 * (r.l_s2t + r.l_t2s) + w.eta2 * r.l_cyc);
    EXPECT_GE(r.d_d_mean_out, 0.0);
    EXPECT_LE(r.d_d_mean_out, 1.0);
  }
  EXPECT_EQ(result.stats.target_batches, 95u);
}

TEST(Train, UnequalDomainSizesUseFullBatches) {
  auto data = small_moons(100);
  auto target = gen_two_moons_pair(37, ShiftSpec{}, 9);
  data.x_t = target.x_t;
  data.y_t_eval = target.y_t_eval;
  auto cfg = short_config(AblationMode::S1, 20);
  std::size_t steps = 0;
  auto result = train(cfg, data, [&](std::size_t, const LossBreakdown& b) {
    ++steps;
    EXPECT_TRUE(std::isfinite(b.l_dom));
  });
  EXPECT_EQ(steps, 20u);
  EXPECT_EQ(result.stats.target_batches, 20u);
}

TEST(Train, RejectsMismatchedData) {
  auto data = small_moons();
  auto cfg = short_config(AblationMode::S0, 1);
  cfg.arch.num_classes = 3;
  EXPECT_THROW(train(cfg, data), ContractError);
  cfg = short_config(AblationMode::S0, 1);
  cfg.batch_size = 0;
  EXPECT_THROW(train(cfg, data), ContractError);
}

TEST(Train, DivergenceAbortsWithBreakdown) {
  auto data = small_moons();
  auto cfg = short_config(AblationMode::S3, 500);
  cfg.lr = 1e6;
  cfg.momentum = 0.0;
  try {
    train(cfg, data);
    FAIL() << "expected divergence";
  } catch (const TrainingAborted& e) {
    EXPECT_GE(e.step(), 1u);
    EXPECT_NE(std::string(e.what()).find("l_total="), std::string::npos);
  }
}

TEST(BatchSampler, EveryIndexOncePerEpoch) {
  for (std::size_t n : {7u, 32u, 100u}) {
    BatchSampler sampler(n, 32, 5);
    std::vector<std::size_t> stream;
    while (stream.size() < 3 * n + 5) {
      auto b = sampler.next();
      EXPECT_EQ(b.size(), 32u);
      stream.insert(stream.end(), b.begin(), b.end());
    }
    for (std::size_t e = 0; e < 3; ++e) {
      std::set<std::size_t> seen(stream.begin() + e * n, stream.begin() + (e + 1) * n);
      EXPECT_EQ(seen.size(), n);
      EXPECT_EQ(*seen.rbegin(), n - 1);
    }
  }
  EXPECT_THROW(BatchSampler(0, 4, 0), ContractError);
}

TEST(Evaluate, HandCountedExamples) {
  auto suite = sign_classifier();
  Matrix x{.rows = 4, .cols = 2, .values = {1, 0, 2, 5, -1, 0, -3, 1}};
  EXPECT_EQ(evaluate(suite, x, Labels{1, 1, 0, 0}), 1.0);
  EXPECT_EQ(evaluate(suite, x, Labels{1, 1, 0, 1}), 0.75);
  EXPECT_EQ(evaluate(suite, x, Labels{0, 0, 1, 1}), 0.0);
  EXPECT_THROW(evaluate(suite, x, Labels{1}), ContractError);
}

TEST(Evaluate, MatchesBruteForceRecount) {
  auto data = small_moons(200);
  auto result = train(short_config(AblationMode::S1, 30), data);
  auto logp = predict(result.suite, data.x_t.to_tensor()).log_probs;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.x_t.rows; ++r) {
    const std::size_t guess = logp.at(r, 1) > logp.at(r, 0) ? 1 : 0;
    correct += guess == (*data.y_t_eval)[r];
  }
  EXPECT_EQ(evaluate_target(result.suite, data), static_cast<double>(correct) / 200.0);
  EXPECT_EQ(result.history.back().target_acc, evaluate_target(result.suite, data));
}

// Labels drawn independently of the inputs: accuracy is binomial(n, 1/2) / n.
TEST(Evaluate, RandomPredictorNearChance) {
  auto suite = build_suite(ArchConfig{.seed = 3});
  auto x = sample_two_moons(10000, 0.1, 1).x;
  auto y = balanced_labels(10000, 2, 77);
  EXPECT_NEAR(evaluate(suite, x, y), 0.5, 0.02);
}

TEST(Ablation, RowsInModeOrderWithSeedStatistics) {
  auto data = small_moons(80);
  auto cfg = short_config(AblationMode::S3, 15);
  const std::vector<std::uint64_t> seeds{0, 1};
  auto result = ablation_run(cfg, data, seeds, 2);
  ASSERT_EQ(result.rows.size(), 5u);
  ASSERT_EQ(result.runs.size(), 10u);
  for (std::size_t m = 0; m < 5; ++m) {
    const auto& row = result.rows[m];
    EXPECT_EQ(row.mode, kAllModes[m]);
    ASSERT_EQ(row.target_accs.size(), 2u);
    EXPECT_NEAR(row.mean, (row.target_accs[0] + row.target_accs[1]) / 2.0, 1e-15);
    EXPECT_NEAR(row.stddev, std::abs(row.target_accs[0] - row.target_accs[1]) / std::sqrt(2.0), 1e-15);
    for (std::size_t s = 0; s < 2; ++s) {
      auto single = cfg;
      single.ablation_mode = kAllModes[m];
      single.seed = seeds[s];
      EXPECT_EQ(row.target_accs[s], train(single, data).history.back().target_acc);
      EXPECT_EQ(result.run(kAllModes[m], seeds[s]).target_acc, row.target_accs[s]);
    }
  }
  TempDir dir("ablation");
  write_ablation_csv(dir / "a.csv", result);
  auto text = testutil::read_file(dir / "a.csv");
  EXPECT_LT(text.find("S0"), text.find("S1"));
  EXPECT_LT(text.find("S3"), text.find("S4"));
}

TEST(Ablation, NeedsTwoSeeds) {
  auto data = small_moons(80);
  const std::vector<std::uint64_t> one{0};
  EXPECT_THROW(ablation_run(short_config(AblationMode::S3, 5), data, one, 1), ContractError);
}
