#include "catn/nn.hpp"

#include <cmath>

#include "catn/errors.hpp"

namespace catn {

std::string_view to_string(InitScheme scheme) {
  return scheme == InitScheme::he_uniform ? "he_uniform" : "glorot_uniform";
}

InitScheme init_scheme_from_string(std::string_view name) {
  if (name == "glorot_uniform") return InitScheme::glorot_uniform;
  if (name == "he_uniform") return InitScheme::he_uniform;
  throw ContractError("unknown init scheme '" + std::string(name) + "'");
}

double init_bound(InitScheme scheme, std::size_t in_dim, std::size_t out_dim) {
  const auto fan_in = static_cast<double>(in_dim);
  const auto fan_out = static_cast<double>(out_dim);
  switch (scheme) {
    case InitScheme::glorot_uniform: return std::sqrt(6.0 / (fan_in + fan_out));
    case InitScheme::he_uniform: return std::sqrt(6.0 / fan_in);
  }
  return 0.0;
}

InitScheme default_init_for(Activation hidden) {
  return hidden == Activation::relu ? InitScheme::he_uniform : InitScheme::glorot_uniform;
}

Linear init_linear(std::size_t in_dim, std::size_t out_dim, InitScheme scheme, Rng& rng) {
  if (in_dim == 0 || out_dim == 0) throw DimensionError("linear layer dimensions must be at least 1");
  const double bound = init_bound(scheme, in_dim, out_dim);
  std::vector<double> w(in_dim * out_dim);
  for (auto& v : w) v = rng.uniform(-bound, bound);
  return Linear{
      .weight = Tensor::from({out_dim, in_dim}, std::move(w), true),
      .bias = Tensor::zeros({out_dim}, true),
  };
}

std::string_view to_string(OutputActivation kind) {
  switch (kind) {
    case OutputActivation::none: return "none";
    case OutputActivation::relu: return "relu";
    case OutputActivation::tanh: return "tanh";
    case OutputActivation::sigmoid: return "sigmoid";
    case OutputActivation::log_softmax: return "log_softmax";
  }
  return "none";
}

OutputActivation output_activation_from_string(std::string_view name) {
  if (name == "none" || name == "identity") return OutputActivation::none;
  if (name == "relu") return OutputActivation::relu;
  if (name == "tanh") return OutputActivation::tanh;
  if (name == "sigmoid") return OutputActivation::sigmoid;
  if (name == "log_softmax") return OutputActivation::log_softmax;
  throw ContractError("unknown output activation '" + std::string(name) + "'");
}

std::size_t MlpSpec::parameter_count() const {
  std::size_t total = 0;
  std::size_t prev = in_dim;
  for (auto h : hidden) {
    total += prev * h + h;
    prev = h;
  }
  return total + prev * out_dim + out_dim;
}

Mlp::Mlp(MlpSpec spec, std::vector<Linear> layers) : spec_(std::move(spec)), layers_(std::move(layers)) {
  if (layers_.size() != spec_.layer_count())
    throw DimensionError("mlp: expected " + std::to_string(spec_.layer_count()) + " layers, got " +
                         std::to_string(layers_.size()));
  std::size_t prev = spec_.in_dim;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::size_t expected_out = i < spec_.hidden.size() ? spec_.hidden[i] : spec_.out_dim;
    if (layers_[i].in_dim() != prev || layers_[i].out_dim() != expected_out || layers_[i].bias.dim(0) != expected_out)
      throw DimensionError("mlp: layer " + std::to_string(i) + " does not chain");
    prev = expected_out;
  }
}

Tensor Mlp::pre_activation(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != spec_.in_dim)
    throw DimensionError("mlp: input " + shape_str(x.shape()) + " does not match in_dim " +
                         std::to_string(spec_.in_dim));
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    if (i + 1 < layers_.size()) h = activation(h, spec_.hidden_activation);
  }
  return h;
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor z = pre_activation(x);
  switch (spec_.output_activation) {
    case OutputActivation::none: return z;
    case OutputActivation::relu: return relu(z);
    case OutputActivation::tanh: return tanh(z);
    case OutputActivation::sigmoid: return sigmoid(z);
    case OutputActivation::log_softmax: return log_softmax(z);
  }
  return z;
}

std::vector<NamedTensor> Mlp::parameters(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  out.reserve(2 * layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    out.push_back({prefix + "." + std::to_string(i) + ".weight", layers_[i].weight});
    out.push_back({prefix + "." + std::to_string(i) + ".bias", layers_[i].bias});
  }
  return out;
}

Mlp make_mlp(const MlpSpec& spec, InitScheme scheme, Rng& rng) {
  if (spec.in_dim == 0 || spec.out_dim == 0) throw DimensionError("mlp dimensions must be at least 1");
  std::vector<Linear> layers;
  std::size_t prev = spec.in_dim;
  for (auto h : spec.hidden) {
    layers.push_back(init_linear(prev, h, scheme, rng));
    prev = h;
  }
  layers.push_back(init_linear(prev, spec.out_dim, scheme, rng));
  return Mlp(spec, std::move(layers));
}

Mlp make_mlp(const MlpSpec& spec, Rng& rng) { return make_mlp(spec, default_init_for(spec.hidden_activation), rng); }

std::size_t scalar_count(std::span<const NamedTensor> params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

Sgd::Sgd(std::vector<NamedTensor> params, SgdOptions options) : params_(std::move(params)), options_(options) {
  if (!(options_.lr >= 0.0)) throw ContractError("sgd: learning rate must be nonnegative");
  if (!(options_.momentum >= 0.0 && options_.momentum < 1.0)) throw ContractError("sgd: momentum must lie in [0, 1)");
  if (!(options_.weight_decay >= 0.0)) throw ContractError("sgd: weight decay must be nonnegative");
  velocity_.reserve(params_.size());
  for (const auto& p : params_) {
    if (!p.tensor.is_leaf()) throw ContractError("sgd: parameter " + p.name + " is not a leaf tensor");
    velocity_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Sgd::step() {
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad())
      if (!std::isfinite(g)) throw NumericError("sgd: non-finite gradient in parameter " + p.name);
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto param = params_[k].tensor;
    auto values = param.mutable_data();
    auto& v = velocity_[k];
    const bool has_grad = param.has_grad();
    std::span<const double> grad = has_grad ? param.grad() : std::span<const double>{};
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = has_grad ? grad[i] : 0.0;
      v[i] = options_.momentum * v[i] + g + options_.weight_decay * values[i];
      values[i] -= options_.lr * v[i];
    }
    param.zero_grad();
  }
}

void Sgd::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void Sgd::set_lr(double lr) {
  if (!(lr >= 0.0)) throw ContractError("sgd: learning rate must be nonnegative");
  options_.lr = lr;
}

}  // namespace catn
