#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "catn/gradcheck.hpp"
#include "catn/ops.hpp"
#include "catn/rng.hpp"
#include "catn/tensor.hpp"

namespace catn {

enum class InitScheme { glorot_uniform, he_uniform };

std::string_view to_string(InitScheme scheme);
InitScheme init_scheme_from_string(std::string_view name);

// Half-width of the uniform sampling range for a layer.
double init_bound(InitScheme scheme, std::size_t in_dim, std::size_t out_dim);

// Glorot for tanh/sigmoid/identity networks, He for relu networks.
InitScheme default_init_for(Activation hidden);

struct Linear {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  std::size_t in_dim() const { return weight.dim(1); }
  std::size_t out_dim() const { return weight.dim(0); }
  Tensor forward(const Tensor& x) const { return linear(x, weight, bias); }
};

Linear init_linear(std::size_t in_dim, std::size_t out_dim, InitScheme scheme, Rng& rng);

enum class OutputActivation { none, relu, tanh, sigmoid, log_softmax };

std::string_view to_string(OutputActivation kind);
OutputActivation output_activation_from_string(std::string_view name);

struct MlpSpec {
  std::size_t in_dim = 1;
  std::vector<std::size_t> hidden;
  std::size_t out_dim = 1;
  Activation hidden_activation = Activation::tanh;
  OutputActivation output_activation = OutputActivation::none;

  std::size_t layer_count() const { return hidden.size() + 1; }
  // Sum of in*out + out over layers.
  std::size_t parameter_count() const;

  bool operator==(const MlpSpec&) const = default;
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(MlpSpec spec, std::vector<Linear> layers);

  const MlpSpec& spec() const { return spec_; }
  const std::vector<Linear>& layers() const { return layers_; }
  std::size_t in_dim() const { return spec_.in_dim; }
  std::size_t out_dim() const { return spec_.out_dim; }

  // Output before the head activation (logits for sigmoid/log_softmax heads).
  Tensor pre_activation(const Tensor& x) const;
  Tensor forward(const Tensor& x) const;

  // Parameters in layer order, weight before bias, named "<prefix>.<i>.weight".
  std::vector<NamedTensor> parameters(const std::string& prefix) const;

 private:
  MlpSpec spec_;
  std::vector<Linear> layers_;
};

Mlp make_mlp(const MlpSpec& spec, InitScheme scheme, Rng& rng);
Mlp make_mlp(const MlpSpec& spec, Rng& rng);

std::size_t scalar_count(std::span<const NamedTensor> params);

struct SgdOptions {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

// Mini-batch SGD with heavy-ball momentum and L2 weight decay:
//   v <- momentum * v + grad + weight_decay * param
//   param <- param - lr * v
class Sgd {
 public:
  Sgd(std::vector<NamedTensor> params, SgdOptions options);

  // Applies one update from the populated grads, then clears them. Params
  // without a grad buffer are treated as having zero gradient.
  void step();
  void zero_grad();

  void set_lr(double lr);
  const SgdOptions& options() const { return options_; }
  const std::vector<NamedTensor>& params() const { return params_; }
  std::span<const double> velocity(std::size_t i) const { return velocity_.at(i); }

 private:
  std::vector<NamedTensor> params_;
  std::vector<std::vector<double>> velocity_;
  SgdOptions options_;
};

}  // namespace catn
