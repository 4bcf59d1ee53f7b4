#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "catn/data.hpp"
#include "catn/errors.hpp"
#include "catn/losses.hpp"
#include "catn/models.hpp"

namespace catn {

// S0: classification only. S1: + conditional domain loss. S2: + translation
// losses. S3: + cycle loss (full model). S4: S3 without the conditional loss.
enum class AblationMode { S0, S1, S2, S3, S4 };
inline constexpr AblationMode kAllModes[] = {AblationMode::S0, AblationMode::S1, AblationMode::S2, AblationMode::S3,
                                             AblationMode::S4};

std::string_view to_string(AblationMode mode);
AblationMode ablation_mode_from_string(std::string_view name);

// grl: one backward pass with reversal nodes. alternating: a discriminator
// ascent step followed by a generator descent step on the plain objective.
enum class MinimaxMode { grl, alternating };

std::string_view to_string(MinimaxMode mode);
MinimaxMode minimax_mode_from_string(std::string_view name);

struct TrainConfig {
  ArchConfig arch;
  LossWeights weights;
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t batch_size = 32;
  std::size_t total_steps = 5000;
  std::uint64_t seed = 0;
  AblationMode ablation_mode = AblationMode::S3;
  MinimaxMode minimax_mode = MinimaxMode::grl;
  std::size_t eval_every = 50;
  // Reversal coefficient ramp 2/(1+exp(-10q))-1 over progress q.
  bool grl_warmup = false;
  // lr * (1 + 10q)^-0.75 instead of a constant rate.
  bool lr_decay = false;

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& cfg);

// Loss weights and networks that a mode switches on, starting from the
// base config's values.
LossWeights weights_for_mode(const LossWeights& base, AblationMode mode);
ArchConfig arch_for_mode(const ArchConfig& base, AblationMode mode);

double reversal_coefficient(const TrainConfig& cfg, std::size_t step);
double learning_rate(const TrainConfig& cfg, std::size_t step);

struct MetricsRow {
  std::size_t step = 0;
  double l_cls = 0.0;
  double l_dom = 0.0;
  double l_con = 0.0;
  double l_s2t = 0.0;
  double l_t2s = 0.0;
  double l_cyc = 0.0;
  double l_total = 0.0;
  double source_acc = 0.0;
  double target_acc = 0.0;    // NaN without target labels
  double d_d_mean_out = 0.0;  // NaN without a domain discriminator
};

std::string_view metrics_header();
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows);

// Epoch-shuffled index stream: every index is visited once per epoch; a
// batch that runs past the end continues into a freshly shuffled epoch.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::size_t> next();
  std::size_t epoch() const { return epoch_; }

 private:
  void reshuffle();

  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
  Rng rng_;
};

struct TrainStats {
  std::size_t steps = 0;
  std::size_t source_batches = 0;
  // Target batches that entered a loss graph; stays 0 in S0.
  std::size_t target_batches = 0;
};

struct TrainResult {
  ModelSuite suite;
  TrainConfig config;  // effective config (mode-adjusted arch and weights)
  std::vector<MetricsRow> history;
  TrainStats stats;
};

// Raised when a step produces a non-finite loss or gradient.
class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string& what, std::size_t step, LossBreakdown last)
      : NumericError(what), step_(step), last_(last) {}
  std::size_t step() const { return step_; }
  const LossBreakdown& last_breakdown() const { return last_; }

 private:
  std::size_t step_;
  LossBreakdown last_;
};

using StepCallback = std::function<void(std::size_t step, const LossBreakdown&)>;

TrainResult train(const TrainConfig& cfg, const DomainPair& data, const StepCallback& on_step = {});

// Fraction of rows whose argmax prediction equals the label.
double evaluate(const ModelSuite& suite, const Matrix& x, std::span<const std::size_t> y);
// Accuracy on the target domain; throws ContractError when it is unlabelled.
double evaluate_target(const ModelSuite& suite, const DomainPair& data);

// Mean D_d output over the first min(n_s, n_t, cap) samples of each domain.
double balanced_domain_output(const ModelSuite& suite, const DomainPair& data, std::size_t cap = 256);

struct AblationRun {
  AblationMode mode;
  std::uint64_t seed;
  double target_acc;
  double source_acc;
  std::vector<MetricsRow> history;
};

struct AblationRow {
  AblationMode mode;
  std::vector<double> target_accs;  // one per seed, in seed order
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
};

struct AblationResult {
  std::vector<AblationRow> rows;  // S0..S4
  std::vector<AblationRun> runs;  // mode-major, then seed order

  const AblationRow& row(AblationMode mode) const;
  const AblationRun& run(AblationMode mode, std::uint64_t seed) const;
};

// Trains every mode for every seed; `threads` = 0 picks the hardware count.
AblationResult ablation_run(const TrainConfig& base, const DomainPair& data, std::span<const std::uint64_t> seeds,
                            std::size_t threads = 0);

void write_ablation_csv(const std::filesystem::path& path, const AblationResult& result);

}  // namespace catn
