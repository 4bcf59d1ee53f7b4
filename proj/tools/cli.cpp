#include "catn/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "catn/checkpoint.hpp"
#include "catn/config.hpp"
#include "catn/gradcheck_suite.hpp"
#include "catn/trainer.hpp"

#ifndef CATN_VERSION
#define CATN_VERSION "0.1.0"
#endif

namespace catn {

namespace fs = std::filesystem;
using nlohmann::json;

const char* version_string() { return CATN_VERSION; }

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_atomic(const fs::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write " + tmp.string());
    out << text;
    if (!out) throw UsageError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

// Written when a command starts and rewritten when it ends.
class Manifest {
 public:
  Manifest(fs::path path, std::string command, json config, std::uint64_t seed)
      : path_(std::move(path)) {
    doc_["command"] = std::move(command);
    doc_["config"] = std::move(config);
    doc_["seed"] = seed;
    doc_["version"] = version_string();
    doc_["started_at"] = utc_now();
    doc_["finished_at"] = nullptr;
    doc_["status"] = "running";
    doc_["outputs"] = json::object();
    flush();
  }

  void output(const std::string& key, const fs::path& p) { doc_["outputs"][key] = p.string(); }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }

  void finish(const std::string& status) {
    doc_["status"] = status;
    doc_["finished_at"] = utc_now();
    flush();
  }

 private:
  void flush() { write_atomic(path_, doc_.dump(2) + "\n"); }

  fs::path path_;
  json doc_;
};

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory " + dir.string());
  const auto probe = dir / ".catn-write-probe";
  {
    std::ofstream out(probe);
    if (!out) throw UsageError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

void require_file(const std::string& flag, const std::string& path) {
  if (path.empty()) throw UsageError(flag + " is required");
  if (!fs::is_regular_file(path)) throw UsageError(flag + ": no such file " + path);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config " + path + " is not valid JSON: " + e.what());
  }
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// Training options shared by train and ablate. Values left unset keep the
// config-file or built-in value.
struct TrainFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr, momentum, weight_decay, lambda, beta, eta1, eta2;
  std::optional<std::size_t> batch_size, steps, eval_every;
  std::optional<std::string> ablation, minimax;
  std::optional<bool> grl_warmup, lr_decay;

  void add_to(CLI::App* cmd, bool with_mode) {
    cmd->add_option("--config", config_path, "Flat JSON config; keys mirror TrainConfig fields");
    cmd->add_option("--lr", lr, "Learning rate (default 1e-3)");
    cmd->add_option("--momentum", momentum, "SGD momentum (default 0.9)");
    cmd->add_option("--weight-decay", weight_decay, "L2 weight decay (default 5e-4)");
    cmd->add_option("--batch-size", batch_size, "Mini-batch size per domain (default 32)");
    cmd->add_option("--steps", steps, "Training iterations (default 5000)");
    cmd->add_option("--eval-every", eval_every, "Metrics interval in steps (default 50)");
    cmd->add_option("--lambda", lambda, "Conditional domain loss weight (default 1)");
    cmd->add_option("--beta", beta, "Translated-feature classification weight (default 1)");
    cmd->add_option("--eta1", eta1, "Translation loss weight (default 0.01)");
    cmd->add_option("--eta2", eta2, "Cycle loss weight (default 0.1)");
    if (with_mode) cmd->add_option("--ablation", ablation, "Ablation mode S0..S4 (default S3)");
    cmd->add_option("--minimax", minimax, "grl or alternating (default grl)");
    cmd->add_option("--grl-warmup", grl_warmup, "Ramp the reversal coefficient from 0 to 1");
    cmd->add_option("--lr-decay", lr_decay, "Anneal the learning rate as (1+10q)^-0.75");
  }

  json overrides() const {
    json j = json::object();
    if (seed) j["seed"] = *seed;
    if (lr) j["lr"] = *lr;
    if (momentum) j["momentum"] = *momentum;
    if (weight_decay) j["weight_decay"] = *weight_decay;
    if (batch_size) j["batch_size"] = *batch_size;
    if (steps) j["total_steps"] = *steps;
    if (eval_every) j["eval_every"] = *eval_every;
    if (lambda) j["lambda"] = *lambda;
    if (beta) j["beta"] = *beta;
    if (eta1) j["eta1"] = *eta1;
    if (eta2) j["eta2"] = *eta2;
    if (ablation) j["ablation_mode"] = *ablation;
    if (minimax) j["minimax_mode"] = *minimax;
    if (grl_warmup) j["grl_warmup"] = *grl_warmup;
    if (lr_decay) j["lr_decay"] = *lr_decay;
    return j;
  }

  // Defaults, then the config file, then flags.
  TrainConfig resolve(json* explicit_keys) const {
    TrainConfig cfg;
    json keys = json::object();
    try {
      if (!config_path.empty()) {
        auto file = read_json_file(config_path);
        apply_json(cfg, file);
        keys.update(file);
      }
      auto flags = overrides();
      apply_json(cfg, flags);
      keys.update(flags);
      validate(cfg);
    } catch (const FormatError& e) {
      throw UsageError(e.what());
    } catch (const ContractError& e) {
      throw UsageError(e.what());
    }
    if (explicit_keys) *explicit_keys = std::move(keys);
    return cfg;
  }
};

DomainPair load_data(const std::string& source, const std::string& target) {
  require_file("--source", source);
  require_file("--target", target);
  try {
    return load_pair_csv(source, target);
  } catch (const FormatError& e) {
    throw UsageError(e.what());
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
}

// Input width and class count follow the data unless the config pins them.
void fit_to_data(TrainConfig& cfg, const json& explicit_keys, const DomainPair& data) {
  const auto check = [&](const char* key, std::size_t& field, std::size_t actual) {
    if (explicit_keys.contains(key) && field != actual)
      throw UsageError(std::string(key) + " is " + std::to_string(field) + " but the data has " +
                       std::to_string(actual));
    field = actual;
  };
  check("input_dim", cfg.arch.input_dim, data.input_dim());
  check("num_classes", cfg.arch.num_classes, data.num_classes);
}

int cmd_gen(const std::string& kind, std::size_t n, std::size_t classes, double rotation, double noise,
            const std::vector<double>& translate, std::uint64_t seed, const fs::path& out_dir, std::ostream& out) {
  ShiftSpec shift;
  shift.rotation_deg = rotation;
  shift.noise_std = noise;
  if (!translate.empty()) {
    shift.kind = ShiftSpec::Kind::both;
    shift.translate = translate;
  }
  DomainPair pair;
  try {
    validate(shift);
    if (kind == "two-moons") {
      if (classes != 2) throw UsageError("two-moons has exactly 2 classes");
      pair = gen_two_moons_pair(n, shift, seed);
    } else if (kind == "gaussian") {
      GaussianMixtureSpec mix;
      for (std::size_t c = 0; c < classes; ++c) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(classes);
        mix.means.push_back({2.0 * std::cos(a), 2.0 * std::sin(a)});
        mix.covariances.push_back({0.25, 0.0, 0.0, 0.25});
      }
      pair = gen_gaussian_shift_pair(n, mix, shift, seed);
    } else {
      throw UsageError("unknown --kind '" + kind + "' (expected two-moons or gaussian)");
    }
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  } catch (const DimensionError& e) {
    throw UsageError(e.what());
  }

  prepare_out_dir(out_dir);
  json params{{"kind", kind},           {"n", n},
              {"classes", classes},     {"rotation_deg", rotation},
              {"noise_std", noise},     {"translate", translate}};
  Manifest manifest(out_dir / "manifest.json", "gen", params, seed);
  const auto src = out_dir / "source.csv";
  const auto tgt = out_dir / "target.csv";
  try {
    save_pair_csv(pair, src, tgt);
  } catch (const FormatError& e) {
    throw UsageError(e.what());
  }
  manifest.output("source", src);
  manifest.output("target", tgt);
  manifest.finish("ok");
  out << "wrote " << src.string() << " and " << tgt.string() << ": n=" << n << " per domain, C="
      << pair.num_classes << ", shift " << to_string(shift.kind) << " rotation=" << rotation << "deg noise=" << noise
      << "\n";
  return kExitOk;
}

void write_abort_dump(const fs::path& path, const TrainingAborted& e) {
  const auto& b = e.last_breakdown();
  json j{{"error", e.what()},
         {"step", e.step()},
         {"last_breakdown",
          {{"l_cls", b.l_cls},
           {"l_dom", b.l_dom},
           {"l_con", b.l_con},
           {"l_s2t", b.l_s2t},
           {"l_t2s", b.l_t2s},
           {"l_cyc", b.l_cyc},
           {"l_total", b.l_total}}}};
  write_atomic(path, j.dump(2) + "\n");
}

int cmd_train(const TrainFlags& flags, bool print_config, const std::string& source, const std::string& target,
              const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  json keys;
  auto cfg = flags.resolve(&keys);
  if (print_config) {
    out << to_json(cfg).dump(2) << "\n";
    return kExitOk;
  }
  const auto data = load_data(source, target);
  fit_to_data(cfg, keys, data);
  prepare_out_dir(out_dir);

  Manifest manifest(out_dir / "manifest.json", "train", to_json(cfg), cfg.seed);
  manifest.set("inputs", {{"source", source}, {"target", target}});
  const auto metrics_path = out_dir / "metrics.csv";
  const auto ckpt_path = out_dir / "checkpoint.bin";
  TrainResult result;
  try {
    result = train(cfg, data);
  } catch (const TrainingAborted& e) {
    const auto dump = out_dir / "abort.json";
    write_abort_dump(dump, e);
    manifest.output("abort", dump);
    manifest.finish("aborted");
    err << "training aborted at step " << e.step() << ": " << e.what() << "\ndiagnostics: " << dump.string() << "\n";
    return kExitAbort;
  }
  write_metrics_csv(metrics_path, result.history);
  save_checkpoint(result.suite, result.config, cfg.total_steps, ckpt_path);
  manifest.output("metrics", metrics_path);
  manifest.output("checkpoint", ckpt_path);

  const double src_acc = evaluate(result.suite, data.x_s, data.y_s);
  out << "source_acc " << fixed(src_acc, 4) << "\n";
  if (data.has_target_labels()) {
    const double tgt_acc = evaluate_target(result.suite, data);
    out << "target_acc " << fixed(tgt_acc, 4) << "\n";
    manifest.set("final", {{"source_acc", src_acc}, {"target_acc", tgt_acc}});
  } else {
    out << "target_acc n/a (target set unlabeled)\n";
    manifest.set("final", {{"source_acc", src_acc}, {"target_acc", nullptr}});
  }
  manifest.finish("ok");
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& target, std::ostream& out) {
  require_file("--checkpoint", checkpoint);
  require_file("--target", target);
  bool has_labels = false;
  LabeledSamples samples;
  try {
    samples = load_domain_csv(target, &has_labels);
  } catch (const FormatError& e) {
    throw UsageError(e.what());
  }
  if (!has_labels)
    throw UsageError("target file " + target + " has no label column; accuracy needs ground-truth labels");
  // A corrupt checkpoint surfaces as FormatError and exits 3.
  const auto ck = load_checkpoint(checkpoint);
  if (samples.x.cols != ck.suite.arch.input_dim)
    throw UsageError("target has " + std::to_string(samples.x.cols) + " features, model expects " +
                     std::to_string(ck.suite.arch.input_dim));
  for (auto y : samples.y)
    if (y >= ck.suite.arch.num_classes) throw UsageError("target label " + std::to_string(y) + " out of range");
  out << fixed(evaluate(ck.suite, samples.x, samples.y), 4) << "\n";
  return kExitOk;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    try {
      if (dash != std::string::npos && dash > 0) {
        const auto lo = std::stoull(item.substr(0, dash));
        const auto hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw UsageError("bad seed range " + item);
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
      } else {
        seeds.push_back(std::stoull(item));
      }
    } catch (const std::logic_error&) {
      throw UsageError("bad seed list '" + text + "'");
    }
  }
  return seeds;
}

int cmd_ablate(const TrainFlags& flags, const std::string& source, const std::string& target,
               const std::string& seed_text, std::size_t threads, bool assert_trend, const fs::path& out_dir,
               std::ostream& out, std::ostream& err) {
  const auto seeds = parse_seeds(seed_text);
  if (seeds.size() < 2) throw UsageError("ablate needs at least 2 seeds");
  json keys;
  auto cfg = flags.resolve(&keys);
  const auto data = load_data(source, target);
  if (!data.has_target_labels()) throw UsageError("ablate reports target accuracy; the target file needs labels");
  fit_to_data(cfg, keys, data);
  prepare_out_dir(out_dir);

  Manifest manifest(out_dir / "manifest.json", "ablate", to_json(cfg), cfg.seed);
  manifest.set("seeds", seeds);
  AblationResult result;
  try {
    result = ablation_run(cfg, data, seeds, threads);
  } catch (const TrainingAborted& e) {
    manifest.finish("aborted");
    err << "ablation run aborted at step " << e.step() << ": " << e.what() << "\n";
    return kExitAbort;
  }
  const auto csv = out_dir / "ablation.csv";
  write_ablation_csv(csv, result);
  manifest.output("ablation", csv);

  out << "mode  target_acc\n";
  json table = json::array();
  for (const auto& row : result.rows) {
    out << to_string(row.mode) << "    " << fixed(100.0 * row.mean, 2) << " +- " << fixed(100.0 * row.stddev, 2)
        << "\n";
    table.push_back({{"mode", to_string(row.mode)}, {"mean", row.mean}, {"std", row.stddev}});
  }
  manifest.set("table", table);

  int code = kExitOk;
  if (assert_trend) {
    const double s0 = result.row(AblationMode::S0).mean;
    const double s3 = result.row(AblationMode::S3).mean;
    if (s3 < s0) {
      err << "trend check failed: mean(S3) " << fixed(s3, 4) << " < mean(S0) " << fixed(s0, 4) << "\n";
      code = kExitCheckFailed;
    } else {
      out << "trend check passed: mean(S3) >= mean(S0)\n";
    }
  }
  manifest.finish(code == kExitOk ? "ok" : "check_failed");
  return code;
}

int cmd_gradcheck(const std::vector<std::string>& components, const GradCheckOptions& opts, std::uint64_t seed,
                  std::ostream& out, std::ostream& err) {
  std::vector<ComponentResult> results;
  try {
    results = run_gradcheck_suite(components, opts, seed);
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  bool ok = true;
  for (const auto& r : results) {
    const auto& rep = r.report;
    out << (rep.passed ? "ok   " : "FAIL ") << std::left << std::setw(18) << r.component << " max_rel_error "
        << std::scientific << std::setprecision(3) << rep.max_rel_error << std::defaultfloat << "  at "
        << rep.worst_location;
    for (const auto& t : rep.tensors)
      if (rep.worst_location == t.name + "[" + std::to_string(t.worst_index) + "]")
        out << " (analytic " << std::setprecision(6) << t.analytic << ", numeric " << t.numeric << ")"
            << std::defaultfloat;
    out << "\n";
    if (!rep.passed) {
      ok = false;
      err << "gradcheck " << r.component << " failed at " << rep.worst_location;
      if (rep.failure) err << ": " << *rep.failure;
      err << "\n";
    }
  }
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional adversarial domain adaptation with feature translation"};
  app.name("catn");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version_string()));

  std::uint64_t seed = 0;
  std::string out_dir = "out";

  auto* gen = app.add_subcommand("gen", "Generate a source/target CSV pair");
  std::string kind = "two-moons";
  std::size_t n = 500;
  std::size_t classes = 2;
  double rotation = 45.0;
  double noise = 0.1;
  std::vector<double> translate;
  gen->add_option("--kind", kind, "two-moons or gaussian")->capture_default_str();
  gen->add_option("--n", n, "Samples per domain")->capture_default_str();
  gen->add_option("--classes", classes, "Class count (gaussian only)")->capture_default_str();
  gen->add_option("--rotation", rotation, "Target rotation in degrees, about the centroid")->capture_default_str();
  gen->add_option("--noise", noise, "Gaussian noise std (two-moons)")->capture_default_str();
  gen->add_option("--translate", translate, "Per-feature target translation")->delimiter(',');
  gen->add_option("--seed", seed, "Random seed")->capture_default_str();
  gen->add_option("--out", out_dir, "Output directory")->capture_default_str();

  TrainFlags train_flags;
  bool print_config = false;
  std::string source, target;
  auto* train_cmd = app.add_subcommand(
      "train", "Train one model; precedence: built-in defaults < --config file < individual flags");
  train_flags.add_to(train_cmd, true);
  train_cmd->add_option("--seed", train_flags.seed, "Training seed (default 0)");
  train_cmd->add_option("--source", source, "Labeled source CSV");
  train_cmd->add_option("--target", target, "Target CSV (label column optional)");
  train_cmd->add_option("--out", out_dir, "Output directory")->capture_default_str();
  train_cmd->add_flag("--print-config", print_config, "Print the resolved JSON config and exit");

  std::string checkpoint;
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy of a checkpoint on a labeled CSV");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file");
  eval_cmd->add_option("--target", target, "Labeled CSV to score");

  TrainFlags ablate_flags;
  std::string seed_text = "1-5";
  std::size_t threads = 0;
  bool assert_trend = false;
  auto* ablate = app.add_subcommand(
      "ablate", "Train modes S0..S4 over several seeds; precedence: defaults < --config < flags");
  ablate_flags.add_to(ablate, false);
  ablate->add_option("--seeds", seed_text, "Seed list, e.g. 1,2,3 or 1-5")->capture_default_str();
  ablate->add_option("--threads", threads, "Worker threads (0 = hardware count)")->capture_default_str();
  ablate->add_option("--source", source, "Labeled source CSV");
  ablate->add_option("--target", target, "Labeled target CSV");
  ablate->add_option("--out", out_dir, "Output directory")->capture_default_str();
  ablate->add_flag("--assert-trend", assert_trend, "Exit 1 when mean(S3) < mean(S0)");

  std::vector<std::string> components;
  GradCheckOptions gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference checks of every op and loss");
  gradcheck->add_option("--component", components, "Restrict to these components (repeatable)");
  gradcheck->add_option("--tol", gc.tol, "Maximum relative error")->capture_default_str();
  gradcheck->add_option("--eps", gc.eps, "Central-difference step")->capture_default_str();
  gradcheck->add_option("--floor", gc.floor, "Denominator floor of the relative error")->capture_default_str();
  gradcheck->add_option("--seed", seed, "Random seed")->capture_default_str();
  gradcheck->footer("Components: " + [] {
    std::string s;
    for (const auto& c : gradcheck_components()) s += (s.empty() ? "" : ", ") + c;
    return s;
  }());

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(kind, n, classes, rotation, noise, translate, seed, out_dir, out);
    if (*train_cmd) return cmd_train(train_flags, print_config, source, target, out_dir, out, err);
    if (*eval_cmd) return cmd_eval(checkpoint, target, out);
    if (*ablate) {
      ablate_flags.seed.reset();
      return cmd_ablate(ablate_flags, source, target, seed_text, threads, assert_trend, out_dir, out, err);
    }
    if (*gradcheck) return cmd_gradcheck(components, gc, seed, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitAbort;
  }
  return kExitUsage;
}

}  // namespace catn
