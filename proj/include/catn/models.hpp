#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "catn/conditioning.hpp"
#include "catn/nn.hpp"

namespace catn {

// Dimensions and layer shapes of the seven networks. Depths are fixed:
// F has two hidden layers, P is a single classifier layer, D_d has three
// layers, each translator four, each sample discriminator three.
struct ArchConfig {
  std::size_t input_dim = 2;
  std::size_t feature_dim = 16;
  std::size_t num_classes = 2;

  std::size_t feature_hidden = 64;
  std::size_t domain_hidden = 64;
  std::size_t translator_hidden = 32;
  std::size_t sample_hidden = 32;

  Activation feature_activation = Activation::relu;
  OutputActivation feature_output = OutputActivation::none;
  Activation discriminator_activation = Activation::relu;
  Activation translator_activation = Activation::relu;

  ConditioningPolicy conditioning;

  // Which adversarial parts exist. F and P always do.
  bool domain_discriminator = true;
  bool translation = true;

  std::uint64_t seed = 0;

  bool operator==(const ArchConfig&) const = default;
};

// Throws ContractError when dims or class count are invalid.
void validate(const ArchConfig& arch);

MlpSpec feature_spec(const ArchConfig& arch);
MlpSpec predictor_spec(const ArchConfig& arch);
MlpSpec domain_discriminator_spec(const ArchConfig& arch);
MlpSpec translator_spec(const ArchConfig& arch);
MlpSpec sample_discriminator_spec(const ArchConfig& arch);

struct ModelSuite {
  ArchConfig arch;
  Mlp feature;     // F
  Mlp predictor;   // P, log_softmax head
  std::optional<Mlp> domain_disc;  // D_d, sigmoid head
  std::optional<Mlp> s2t;          // T_s2t
  std::optional<Mlp> t2s;          // T_t2s
  std::optional<Mlp> source_disc;  // D_s, sigmoid head
  std::optional<Mlp> target_disc;  // D_t, sigmoid head
  std::optional<RandomizedMaps> maps;

  bool has_domain_discriminator() const { return domain_disc.has_value(); }
  bool has_translation() const { return s2t.has_value(); }
  std::size_t conditioned_width() const;
};

ModelSuite build_suite(const ArchConfig& arch);

// F, P, D_d, T_s2t, T_t2s, D_s, D_t in that order, skipping absent networks.
// The randomized maps are not parameters.
std::vector<NamedTensor> collect_params(const ModelSuite& suite);
std::vector<NamedTensor> collect_params(const Mlp& mlp, const std::string& prefix);

// Min-side (F, P, translators) and max-side (discriminators) parameters.
std::vector<NamedTensor> generator_params(const ModelSuite& suite);
std::vector<NamedTensor> discriminator_params(const ModelSuite& suite);

struct Prediction {
  Tensor features;   // [batch, feature_dim]
  Tensor log_probs;  // [batch, C]
  Tensor probs;      // [batch, C], rows sum to 1
};

Prediction predict(const ModelSuite& suite, const Tensor& x);

// Predicted class per row; ties go to the lowest class index.
std::vector<std::size_t> argmax_rows(const Tensor& scores);

enum class Direction { s2t, t2s };

std::string_view to_string(Direction direction);

Tensor translate(const ModelSuite& suite, const Tensor& f, Direction direction);

}  // namespace catn
