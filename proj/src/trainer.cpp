#include "catn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace catn {

namespace {

enum Stream : std::uint64_t {
  kSourceBatches = 201,
  kTargetBatches = 202,
};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string describe(const LossBreakdown& b) {
  std::ostringstream os;
  os.precision(17);
  os << "l_cls=" << b.l_cls << " l_dom=" << b.l_dom << " l_con=" << b.l_con << " l_s2t=" << b.l_s2t
     << " l_t2s=" << b.l_t2s << " l_cyc=" << b.l_cyc << " l_total=" << b.l_total;
  return os.str();
}

void flip_grads(const std::vector<NamedTensor>& params) {
  for (auto p : params) {
    auto t = p.tensor;
    if (!t.has_grad()) continue;
    for (auto& g : t.mutable_grad()) g = -g;
  }
}

}  // namespace

std::string_view to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::S0: return "S0";
    case AblationMode::S1: return "S1";
    case AblationMode::S2: return "S2";
    case AblationMode::S3: return "S3";
    case AblationMode::S4: return "S4";
  }
  return "S3";
}

AblationMode ablation_mode_from_string(std::string_view name) {
  for (auto mode : kAllModes)
    if (name == to_string(mode)) return mode;
  throw ContractError("unknown ablation mode '" + std::string(name) + "' (expected S0..S4)");
}

std::string_view to_string(MinimaxMode mode) { return mode == MinimaxMode::grl ? "grl" : "alternating"; }

MinimaxMode minimax_mode_from_string(std::string_view name) {
  if (name == "grl") return MinimaxMode::grl;
  if (name == "alternating") return MinimaxMode::alternating;
  throw ContractError("unknown minimax mode '" + std::string(name) + "' (expected grl or alternating)");
}

void validate(const TrainConfig& cfg) {
  validate(cfg.arch);
  validate(cfg.weights);
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) throw ContractError("lr must be finite and nonnegative");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw ContractError("momentum must lie in [0, 1)");
  if (!(cfg.weight_decay >= 0.0)) throw ContractError("weight_decay must be nonnegative");
  if (cfg.batch_size == 0) throw ContractError("batch_size must be positive");
  if (cfg.eval_every == 0) throw ContractError("eval_every must be positive");
}

LossWeights weights_for_mode(const LossWeights& base, AblationMode mode) {
  LossWeights w = base;
  switch (mode) {
    case AblationMode::S0: w.lambda = 0.0; w.eta1 = 0.0; w.eta2 = 0.0; break;
    case AblationMode::S1: w.eta1 = 0.0; w.eta2 = 0.0; break;
    case AblationMode::S2: w.eta2 = 0.0; break;
    case AblationMode::S3: break;
    case AblationMode::S4: w.lambda = 0.0; break;
  }
  return w;
}

ArchConfig arch_for_mode(const ArchConfig& base, AblationMode mode) {
  ArchConfig a = base;
  a.domain_discriminator = mode == AblationMode::S1 || mode == AblationMode::S2 || mode == AblationMode::S3;
  a.translation = mode == AblationMode::S2 || mode == AblationMode::S3 || mode == AblationMode::S4;
  return a;
}

double reversal_coefficient(const TrainConfig& cfg, std::size_t step) {
  if (!cfg.grl_warmup || cfg.total_steps == 0) return 1.0;
  const double q = static_cast<double>(step) / static_cast<double>(cfg.total_steps);
  return 2.0 / (1.0 + std::exp(-10.0 * q)) - 1.0;
}

double learning_rate(const TrainConfig& cfg, std::size_t step) {
  if (!cfg.lr_decay || cfg.total_steps == 0) return cfg.lr;
  const double q = static_cast<double>(step) / static_cast<double>(cfg.total_steps);
  return cfg.lr * std::pow(1.0 + 10.0 * q, -0.75);
}

std::string_view metrics_header() {
  return "step,l_cls,l_dom,l_con,l_s2t,l_t2s,l_cyc,l_total,source_acc,target_acc,d_d_mean_out";
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << metrics_header() << '\n';
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << ',' << buf;
  };
  for (const auto& r : rows) {
    out << r.step;
    for (double v : {r.l_cls, r.l_dom, r.l_con, r.l_s2t, r.l_t2s, r.l_cyc, r.l_total, r.source_acc, r.target_acc,
                     r.d_d_mean_out})
      put(v);
    out << '\n';
  }
  if (!out) throw FormatError("failed writing " + path.string());
}

BatchSampler::BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed)
    : order_(n), batch_size_(batch_size), rng_(seed) {
  if (n == 0 || batch_size == 0) throw ContractError("batch sampler needs samples and a positive batch size");
  for (std::size_t i = 0; i < n; ++i) order_[i] = i;
  reshuffle();
}

void BatchSampler::reshuffle() {
  rng_.shuffle(order_.begin(), order_.end());
  cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next() {
  std::vector<std::size_t> batch;
  batch.reserve(batch_size_);
  while (batch.size() < batch_size_) {
    if (cursor_ == order_.size()) {
      ++epoch_;
      reshuffle();
    }
    batch.push_back(order_[cursor_++]);
  }
  return batch;
}

double evaluate(const ModelSuite& suite, const Matrix& x, std::span<const std::size_t> y) {
  if (y.size() != x.rows)
    throw ContractError("evaluate: " + std::to_string(y.size()) + " labels for " + std::to_string(x.rows) + " samples");
  if (x.rows == 0) throw ContractError("evaluate: no samples");
  const auto predicted = argmax_rows(predict(suite, x.to_tensor()).log_probs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) correct += predicted[i] == y[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

double evaluate_target(const ModelSuite& suite, const DomainPair& data) {
  return evaluate(suite, data.x_t, data.target_labels());
}

double balanced_domain_output(const ModelSuite& suite, const DomainPair& data, std::size_t cap) {
  if (!suite.has_domain_discriminator()) return kNaN;
  const std::size_t k = std::min({data.x_s.rows, data.x_t.rows, cap});
  Matrix batch{.rows = 2 * k, .cols = data.x_s.cols, .values = {}};
  batch.values.reserve(2 * k * batch.cols);
  batch.values.insert(batch.values.end(), data.x_s.values.begin(), data.x_s.values.begin() + k * batch.cols);
  batch.values.insert(batch.values.end(), data.x_t.values.begin(), data.x_t.values.begin() + k * batch.cols);
  return domain_output_mean(suite, batch.to_tensor());
}

namespace {

struct StepInputs {
  Tensor x_s;
  std::vector<std::size_t> y_s;
  Tensor x_t;
};

class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const DomainPair& data)
      : cfg_(effective(cfg, data)),
        data_(data),
        suite_(build_suite(cfg_.arch)),
        needs_target_(suite_.has_domain_discriminator() || suite_.has_translation()),
        source_batches_(data.x_s.rows, cfg_.batch_size, derive_seed(cfg_.seed, kSourceBatches)),
        target_batches_(data.x_t.rows, cfg_.batch_size, derive_seed(cfg_.seed, kTargetBatches)) {}

  TrainResult run(const StepCallback& on_step) {
    const SgdOptions options{.lr = cfg_.lr, .momentum = cfg_.momentum, .weight_decay = cfg_.weight_decay};
    if (cfg_.minimax_mode == MinimaxMode::grl) {
      joint_.emplace(collect_params(suite_), options);
    } else {
      generators_.emplace(generator_params(suite_), options);
      discriminators_.emplace(discriminator_params(suite_), options);
    }

    TrainResult result;
    for (std::size_t step = 1; step <= cfg_.total_steps; ++step) {
      const LossBreakdown b = step_once(step, draw(data_.training_view()), result.stats);
      ++result.stats.steps;
      if (on_step) on_step(step, b);
      if (step % cfg_.eval_every == 0 || step == cfg_.total_steps) result.history.push_back(metrics(step, b));
    }
    result.suite = std::move(suite_);
    result.config = cfg_;
    return result;
  }

 private:
  static TrainConfig effective(const TrainConfig& cfg, const DomainPair& data) {
    validate(cfg);
    validate(data);
    if (data.num_classes != cfg.arch.num_classes)
      throw ContractError("data has " + std::to_string(data.num_classes) + " classes, arch expects " +
                          std::to_string(cfg.arch.num_classes));
    if (data.input_dim() != cfg.arch.input_dim)
      throw ContractError("data has " + std::to_string(data.input_dim()) + " features, arch expects " +
                          std::to_string(cfg.arch.input_dim));
    TrainConfig out = cfg;
    out.arch = arch_for_mode(cfg.arch, cfg.ablation_mode);
    out.arch.seed = cfg.seed;
    out.weights = weights_for_mode(cfg.weights, cfg.ablation_mode);
    return out;
  }

  // Training steps see only the view: target labels are not reachable here.
  StepInputs draw(const TrainingView& view) {
    StepInputs in;
    const auto s = source_batches_.next();
    in.x_s = view.x_s.gather(s).to_tensor();
    in.y_s.reserve(s.size());
    for (auto i : s) in.y_s.push_back(view.y_s[i]);
    if (needs_target_) in.x_t = view.x_t.gather(target_batches_.next()).to_tensor();
    return in;
  }

  LossBreakdown step_once(std::size_t step, const StepInputs& in, TrainStats& stats) {
    const double lr = learning_rate(cfg_, step - 1);
    ++stats.source_batches;
    if (in.x_t.defined()) ++stats.target_batches;
    LossBreakdown last;
    try {
      if (joint_) {
        joint_->set_lr(lr);
        const Reversal reversal{.enabled = true, .coeff = reversal_coefficient(cfg_, step - 1)};
        const LossGraph graph = total_loss(suite_, in.x_s, in.y_s, in.x_t, cfg_.weights, reversal);
        last = graph.breakdown;
        graph.total.backward();
        joint_->step();
        return last;
      }
      generators_->set_lr(lr);
      discriminators_->set_lr(lr);
      // Discriminators ascend the plain objective...
      const LossGraph d_graph = total_loss(suite_, in.x_s, in.y_s, in.x_t, cfg_.weights, Reversal::plain());
      last = d_graph.breakdown;
      d_graph.total.backward();
      flip_grads(discriminators_->params());
      discriminators_->step();
      generators_->zero_grad();
      // ...then the rest descend it against the updated discriminators.
      const LossGraph g_graph = total_loss(suite_, in.x_s, in.y_s, in.x_t, cfg_.weights, Reversal::plain());
      g_graph.total.backward();
      generators_->step();
      discriminators_->zero_grad();
      return last;
    } catch (const NumericError& e) {
      throw TrainingAborted("training aborted at step " + std::to_string(step) + ": " + e.what() +
                                "; last breakdown: " + describe(last),
                            step, last);
    }
  }

  MetricsRow metrics(std::size_t step, const LossBreakdown& b) const {
    MetricsRow row;
    row.step = step;
    row.l_cls = b.l_cls;
    row.l_dom = b.l_dom;
    row.l_con = b.l_con;
    row.l_s2t = b.l_s2t;
    row.l_t2s = b.l_t2s;
    row.l_cyc = b.l_cyc;
    row.l_total = b.l_total;
    row.source_acc = evaluate(suite_, data_.x_s, data_.y_s);
    row.target_acc = data_.has_target_labels() ? evaluate_target(suite_, data_) : kNaN;
    row.d_d_mean_out = balanced_domain_output(suite_, data_);
    return row;
  }

  TrainConfig cfg_;
  const DomainPair& data_;
  ModelSuite suite_;
  bool needs_target_;
  BatchSampler source_batches_;
  BatchSampler target_batches_;
  std::optional<Sgd> joint_;
  std::optional<Sgd> generators_;
  std::optional<Sgd> discriminators_;
};

}  // namespace

TrainResult train(const TrainConfig& cfg, const DomainPair& data, const StepCallback& on_step) {
  Trainer trainer(cfg, data);
  return trainer.run(on_step);
}

}  // namespace catn
