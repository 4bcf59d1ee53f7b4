#include "catn/config.hpp"

#include <functional>
#include <map>
#include <string>
#include <type_traits>

namespace catn {

using nlohmann::json;

namespace {

void arch_fields(json& j, const ArchConfig& a) {
  j["input_dim"] = a.input_dim;
  j["feature_dim"] = a.feature_dim;
  j["num_classes"] = a.num_classes;
  j["feature_hidden"] = a.feature_hidden;
  j["domain_hidden"] = a.domain_hidden;
  j["translator_hidden"] = a.translator_hidden;
  j["sample_hidden"] = a.sample_hidden;
  j["feature_activation"] = std::string(to_string(a.feature_activation));
  j["feature_output"] = std::string(to_string(a.feature_output));
  j["discriminator_activation"] = std::string(to_string(a.discriminator_activation));
  j["translator_activation"] = std::string(to_string(a.translator_activation));
  j["conditioning_threshold"] = a.conditioning.threshold;
  j["random_dim"] = a.conditioning.random_dim;
  j["max_exact_dim"] = a.conditioning.max_exact_dim;
  j["detach_prediction"] = a.conditioning.detach_prediction;
  j["domain_discriminator"] = a.domain_discriminator;
  j["translation"] = a.translation;
}

using Setter = std::function<void(TrainConfig&, const json&)>;

template <typename T>
T as(const json& v) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw json::type_error::create(302, "expected a boolean", &v);
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_unsigned()) throw json::type_error::create(302, "expected a nonnegative integer", &v);
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw json::type_error::create(302, "expected a number", &v);
  }
  return v.get<T>();
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"lr", [](TrainConfig& c, const json& v) { c.lr = as<double>(v); }},
      {"momentum", [](TrainConfig& c, const json& v) { c.momentum = as<double>(v); }},
      {"weight_decay", [](TrainConfig& c, const json& v) { c.weight_decay = as<double>(v); }},
      {"batch_size", [](TrainConfig& c, const json& v) { c.batch_size = as<std::size_t>(v); }},
      {"total_steps", [](TrainConfig& c, const json& v) { c.total_steps = as<std::size_t>(v); }},
      {"seed",
       [](TrainConfig& c, const json& v) {
         c.seed = as<std::uint64_t>(v);
         c.arch.seed = c.seed;
       }},
      {"ablation_mode", [](TrainConfig& c, const json& v) { c.ablation_mode = ablation_mode_from_string(as<std::string>(v)); }},
      {"minimax_mode", [](TrainConfig& c, const json& v) { c.minimax_mode = minimax_mode_from_string(as<std::string>(v)); }},
      {"eval_every", [](TrainConfig& c, const json& v) { c.eval_every = as<std::size_t>(v); }},
      {"grl_warmup", [](TrainConfig& c, const json& v) { c.grl_warmup = as<bool>(v); }},
      {"lr_decay", [](TrainConfig& c, const json& v) { c.lr_decay = as<bool>(v); }},
      {"lambda", [](TrainConfig& c, const json& v) { c.weights.lambda = as<double>(v); }},
      {"beta", [](TrainConfig& c, const json& v) { c.weights.beta = as<double>(v); }},
      {"eta1", [](TrainConfig& c, const json& v) { c.weights.eta1 = as<double>(v); }},
      {"eta2", [](TrainConfig& c, const json& v) { c.weights.eta2 = as<double>(v); }},
      {"input_dim", [](TrainConfig& c, const json& v) { c.arch.input_dim = as<std::size_t>(v); }},
      {"feature_dim", [](TrainConfig& c, const json& v) { c.arch.feature_dim = as<std::size_t>(v); }},
      {"num_classes", [](TrainConfig& c, const json& v) { c.arch.num_classes = as<std::size_t>(v); }},
      {"feature_hidden", [](TrainConfig& c, const json& v) { c.arch.feature_hidden = as<std::size_t>(v); }},
      {"domain_hidden", [](TrainConfig& c, const json& v) { c.arch.domain_hidden = as<std::size_t>(v); }},
      {"translator_hidden", [](TrainConfig& c, const json& v) { c.arch.translator_hidden = as<std::size_t>(v); }},
      {"sample_hidden", [](TrainConfig& c, const json& v) { c.arch.sample_hidden = as<std::size_t>(v); }},
      {"feature_activation",
       [](TrainConfig& c, const json& v) { c.arch.feature_activation = activation_from_string(as<std::string>(v)); }},
      {"feature_output",
       [](TrainConfig& c, const json& v) {
         c.arch.feature_output = output_activation_from_string(as<std::string>(v));
       }},
      {"discriminator_activation",
       [](TrainConfig& c, const json& v) {
         c.arch.discriminator_activation = activation_from_string(as<std::string>(v));
       }},
      {"translator_activation",
       [](TrainConfig& c, const json& v) {
         c.arch.translator_activation = activation_from_string(as<std::string>(v));
       }},
      {"conditioning_threshold",
       [](TrainConfig& c, const json& v) { c.arch.conditioning.threshold = as<std::size_t>(v); }},
      {"random_dim", [](TrainConfig& c, const json& v) { c.arch.conditioning.random_dim = as<std::size_t>(v); }},
      {"max_exact_dim", [](TrainConfig& c, const json& v) { c.arch.conditioning.max_exact_dim = as<std::size_t>(v); }},
      {"detach_prediction",
       [](TrainConfig& c, const json& v) { c.arch.conditioning.detach_prediction = as<bool>(v); }},
      {"domain_discriminator", [](TrainConfig& c, const json& v) { c.arch.domain_discriminator = as<bool>(v); }},
      {"translation", [](TrainConfig& c, const json& v) { c.arch.translation = as<bool>(v); }},
  };
  return table;
}

}  // namespace

json to_json(const TrainConfig& cfg) {
  json j = json::object();
  j["lr"] = cfg.lr;
  j["momentum"] = cfg.momentum;
  j["weight_decay"] = cfg.weight_decay;
  j["batch_size"] = cfg.batch_size;
  j["total_steps"] = cfg.total_steps;
  j["seed"] = cfg.seed;
  j["ablation_mode"] = std::string(to_string(cfg.ablation_mode));
  j["minimax_mode"] = std::string(to_string(cfg.minimax_mode));
  j["eval_every"] = cfg.eval_every;
  j["grl_warmup"] = cfg.grl_warmup;
  j["lr_decay"] = cfg.lr_decay;
  j["lambda"] = cfg.weights.lambda;
  j["beta"] = cfg.weights.beta;
  j["eta1"] = cfg.weights.eta1;
  j["eta2"] = cfg.weights.eta2;
  arch_fields(j, cfg.arch);
  return j;
}

void apply_json(TrainConfig& cfg, const json& j) {
  if (!j.is_object()) throw FormatError("config must be a JSON object");
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    const auto it = table.find(key);
    if (it == table.end()) throw FormatError("unknown config key '" + key + "'");
    try {
      it->second(cfg, value);
    } catch (const json::exception& e) {
      throw FormatError("config key '" + key + "': " + e.what());
    } catch (const ContractError& e) {
      throw FormatError("config key '" + key + "': " + e.what());
    }
  }
}

TrainConfig config_from_json(const json& j) {
  TrainConfig cfg;
  apply_json(cfg, j);
  return cfg;
}

json to_json(const ArchConfig& arch) {
  json j = json::object();
  arch_fields(j, arch);
  j["seed"] = arch.seed;
  return j;
}

ArchConfig arch_from_json(const json& j) {
  TrainConfig cfg;
  apply_json(cfg, j);
  return cfg.arch;
}

}  // namespace catn
