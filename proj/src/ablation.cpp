#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "catn/trainer.hpp"

namespace catn {

const AblationRow& AblationResult::row(AblationMode mode) const {
  for (const auto& r : rows)
    if (r.mode == mode) return r;
  throw ContractError("ablation result has no row for " + std::string(to_string(mode)));
}

const AblationRun& AblationResult::run(AblationMode mode, std::uint64_t seed) const {
  for (const auto& r : runs)
    if (r.mode == mode && r.seed == seed) return r;
  throw ContractError("ablation result has no run for " + std::string(to_string(mode)) + " seed " +
                      std::to_string(seed));
}

AblationResult ablation_run(const TrainConfig& base, const DomainPair& data, std::span<const std::uint64_t> seeds,
                            std::size_t threads) {
  if (seeds.size() < 2) throw ContractError("ablation needs at least 2 seeds");
  if (!data.has_target_labels()) throw ContractError("ablation needs target labels to score runs");

  struct Job {
    AblationMode mode;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (auto mode : kAllModes)
    for (auto seed : seeds) jobs.push_back({mode, seed});

  AblationResult result;
  result.runs.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        TrainConfig cfg = base;
        cfg.ablation_mode = jobs[i].mode;
        cfg.seed = jobs[i].seed;
        auto trained = train(cfg, data);
        result.runs[i] = AblationRun{.mode = jobs[i].mode,
                                     .seed = jobs[i].seed,
                                     .target_acc = evaluate_target(trained.suite, data),
                                     .source_acc = evaluate(trained.suite, data.x_s, data.y_s),
                                     .history = std::move(trained.history)};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
      }
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, jobs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (auto mode : kAllModes) {
    AblationRow row{.mode = mode, .target_accs = {}};
    for (const auto& run : result.runs)
      if (run.mode == mode) row.target_accs.push_back(run.target_acc);
    const auto n = static_cast<double>(row.target_accs.size());
    for (double a : row.target_accs) row.mean += a;
    row.mean /= n;
    double ss = 0.0;
    for (double a : row.target_accs) ss += (a - row.mean) * (a - row.mean);
    row.stddev = std::sqrt(ss / (n - 1.0));
    result.rows.push_back(std::move(row));
  }
  return result;
}

void write_ablation_csv(const std::filesystem::path& path, const AblationResult& result) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out << "mode,mean_target_acc,std_target_acc,runs\n";
  char buf[96];
  for (const auto& row : result.rows) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%zu\n", std::string(to_string(row.mode)).c_str(), row.mean,
                  row.stddev, row.target_accs.size());
    out << buf;
  }
  if (!out) throw FormatError("failed writing " + path.string());
}

}  // namespace catn
