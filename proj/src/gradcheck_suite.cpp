#include "catn/gradcheck_suite.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <map>

#include "catn/conditioning.hpp"
#include "catn/errors.hpp"
#include "catn/losses.hpp"
#include "catn/models.hpp"
#include "catn/ops.hpp"
#include "catn/rng.hpp"

namespace catn {

namespace {

constexpr std::size_t kBatch = 4;
// Every relu pre-activation on a checked batch stays this far from zero.
constexpr double kKinkMargin = 1e-3;
constexpr int kMaxDraws = 500;

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal();
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Values bounded away from zero so kinks stay outside the eps window.
Tensor kink_free_tensor(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) {
    const double m = rng.uniform(0.1, 2.0);
    x = rng.uniform() < 0.5 ? -m : m;
  }
  return Tensor::from(std::move(shape), std::move(v), true);
}

// Reduces an arbitrary-shaped output to a scalar through fixed random weights.
Tensor project(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  auto w = random_tensor(y.shape(), rng, false);
  return sum(mul(y, w));
}

// FNV-1a, so component seeds do not depend on the standard library's hash.
std::uint64_t name_hash(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

struct Case {
  std::vector<NamedTensor> inputs;
  std::function<Tensor()> fn;
};

using CaseBuilder = std::function<Case(Rng&)>;

Case unary_case(Rng& rng, Tensor (*op)(const Tensor&), bool kinked = false) {
  auto x = kinked ? kink_free_tensor({3, 4}, rng) : random_tensor({3, 4}, rng);
  const auto s = rng.next();
  return {{{"x", x}}, [=] { return project(op(x), s); }};
}

Case binary_case(Rng& rng, Tensor (*op)(const Tensor&, const Tensor&)) {
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({3, 4}, rng);
  const auto s = rng.next();
  return {{{"a", a}, {"b", b}}, [=] { return project(op(a, b), s); }};
}

ModelSuite gradcheck_suite_model(std::uint64_t seed) {
  ArchConfig arch;
  arch.seed = seed;
  return build_suite(arch);
}

double mlp_margin(const Mlp& mlp, Tensor x) {
  double margin = std::numeric_limits<double>::infinity();
  const auto& layers = mlp.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const bool last = i + 1 == layers.size();
    auto z = layers[i].forward(x);
    const bool kinked = last ? mlp.spec().output_activation == OutputActivation::relu
                             : mlp.spec().hidden_activation == Activation::relu;
    if (kinked)
      for (double v : z.data()) margin = std::min(margin, std::abs(v));
    if (!last) x = activation(z, mlp.spec().hidden_activation);
  }
  return margin;
}

// Smallest |relu pre-activation| anywhere in the adversarial and cycle terms.
double feature_margin(const ModelSuite& suite, const Tensor& f_s, const Tensor& f_t) {
  double m = std::numeric_limits<double>::infinity();
  if (suite.domain_disc) {
    const auto* maps = suite.maps ? &*suite.maps : nullptr;
    for (const auto& f : {f_s, f_t})
      m = std::min(m, mlp_margin(*suite.domain_disc,
                                 condition(f, exp(suite.predictor.forward(f)), suite.arch.conditioning, maps)));
  }
  if (suite.has_translation()) {
    m = std::min({m, mlp_margin(*suite.s2t, f_s), mlp_margin(*suite.t2s, f_t)});
    const auto fhat_t = suite.s2t->forward(f_s);
    const auto fhat_s = suite.t2s->forward(f_t);
    m = std::min({m, mlp_margin(*suite.t2s, fhat_t), mlp_margin(*suite.s2t, fhat_s)});
    m = std::min({m, mlp_margin(*suite.target_disc, f_t), mlp_margin(*suite.target_disc, fhat_t)});
    m = std::min({m, mlp_margin(*suite.source_disc, f_s), mlp_margin(*suite.source_disc, fhat_s)});
  }
  return m;
}

double input_margin(const ModelSuite& suite, const Tensor& x_s, const Tensor& x_t) {
  const double m = std::min(mlp_margin(suite.feature, x_s), mlp_margin(suite.feature, x_t));
  return std::min(m, feature_margin(suite, suite.feature.forward(x_s), suite.feature.forward(x_t)));
}

struct Batch {
  Tensor x_s, x_t;
  std::vector<std::size_t> y_s;
};

Batch random_batch(const ModelSuite& suite, Rng& rng) {
  const auto& arch = suite.arch;
  for (int draw = 0; draw < kMaxDraws; ++draw) {
    Batch b;
    b.x_s = random_tensor({kBatch, arch.input_dim}, rng, false);
    b.x_t = random_tensor({kBatch, arch.input_dim}, rng, false);
    for (std::size_t i = 0; i < kBatch; ++i) b.y_s.push_back(rng.below(arch.num_classes));
    if (input_margin(suite, b.x_s, b.x_t) >= kKinkMargin) return b;
  }
  throw NumericError("gradcheck: no batch keeps relu inputs away from their kinks");
}

std::vector<NamedTensor> with_features(const ModelSuite& suite, Rng& rng, Tensor& f_s, Tensor& f_t) {
  for (int draw = 0;; ++draw) {
    if (draw == kMaxDraws) throw NumericError("gradcheck: no feature batch keeps relu inputs away from their kinks");
    f_s = random_tensor({kBatch, suite.arch.feature_dim}, rng);
    f_t = random_tensor({kBatch, suite.arch.feature_dim}, rng);
    if (feature_margin(suite, f_s, f_t) >= kKinkMargin) break;
  }
  auto inputs = collect_params(suite);
  inputs.push_back({"f_s", f_s});
  inputs.push_back({"f_t", f_t});
  return inputs;
}

const std::map<std::string, CaseBuilder>& builders() {
  static const std::map<std::string, CaseBuilder> table = {
      {"matmul",
       [](Rng& rng) {
         auto a = random_tensor({3, 4}, rng);
         auto b = random_tensor({4, 2}, rng);
         const auto s = rng.next();
         return Case{{{"a", a}, {"b", b}}, [=] { return project(matmul(a, b), s); }};
       }},
      {"transpose", [](Rng& rng) { return unary_case(rng, transpose); }},
      {"linear",
       [](Rng& rng) {
         auto x = random_tensor({3, 4}, rng);
         auto w = random_tensor({5, 4}, rng);
         auto b = random_tensor({5}, rng);
         const auto s = rng.next();
         return Case{{{"x", x}, {"weight", w}, {"bias", b}}, [=] { return project(linear(x, w, b), s); }};
       }},
      {"add", [](Rng& rng) { return binary_case(rng, add); }},
      {"sub", [](Rng& rng) { return binary_case(rng, sub); }},
      {"mul", [](Rng& rng) { return binary_case(rng, mul); }},
      {"mul_broadcast",
       [](Rng& rng) {
         auto a = random_tensor({3, 4}, rng);
         auto c = random_tensor({1}, rng);
         const auto s = rng.next();
         return Case{{{"a", a}, {"c", c}}, [=] { return project(mul(a, c), s); }};
       }},
      {"scale",
       [](Rng& rng) {
         auto x = random_tensor({3, 4}, rng);
         const auto s = rng.next();
         return Case{{{"x", x}}, [=] { return project(scale(x, -1.7), s); }};
       }},
      {"relu", [](Rng& rng) { return unary_case(rng, relu, true); }},
      {"tanh", [](Rng& rng) { return unary_case(rng, tanh); }},
      {"sigmoid", [](Rng& rng) { return unary_case(rng, sigmoid); }},
      {"exp", [](Rng& rng) { return unary_case(rng, exp); }},
      {"log_softmax", [](Rng& rng) { return unary_case(rng, log_softmax); }},
      {"log_sigmoid",
       [](Rng& rng) {
         auto x = random_tensor({3, 4}, rng);
         const auto s = rng.next();
         return Case{{{"x", x}}, [=] { return project(log_sigmoid(x), s); }};
       }},
      {"outer_product",
       [](Rng& rng) {
         auto f = random_tensor({4}, rng);
         auto p = random_tensor({3}, rng);
         const auto s = rng.next();
         return Case{{{"f", f}, {"p", p}}, [=] { return project(outer_product(f, p), s); }};
       }},
      {"row_outer",
       [](Rng& rng) {
         auto f = random_tensor({3, 4}, rng);
         auto p = random_tensor({3, 2}, rng);
         const auto s = rng.next();
         return Case{{{"f", f}, {"p", p}}, [=] { return project(row_outer(f, p), s); }};
       }},
      {"sum", [](Rng& rng) { return unary_case(rng, sum); }},
      {"mean", [](Rng& rng) { return unary_case(rng, mean); }},
      {"mean_squared_norm", [](Rng& rng) { return unary_case(rng, mean_squared_norm); }},
      {"pick",
       [](Rng& rng) {
         auto x = random_tensor({4, 3}, rng);
         std::vector<std::size_t> idx{2, 0, 1, 2};
         const auto s = rng.next();
         return Case{{{"x", x}}, [=] { return project(pick(x, idx), s); }};
       }},
      {"multilinear",
       [](Rng& rng) {
         auto f = random_tensor({kBatch, 6}, rng);
         auto p = random_tensor({kBatch, 3}, rng);
         const auto s = rng.next();
         return Case{{{"f", f}, {"p", p}}, [=] { return project(multilinear_condition(f, p), s); }};
       }},
      {"randomized",
       [](Rng& rng) {
         auto f = random_tensor({kBatch, 6}, rng);
         auto p = random_tensor({kBatch, 3}, rng);
         auto maps = make_randomized_maps(6, 3, 16, rng.next());
         const auto s = rng.next();
         return Case{{{"f", f}, {"p", p}}, [=] { return project(randomized_condition(f, p, maps), s); }};
       }},
      {"cross_entropy",
       [](Rng& rng) {
         auto z = random_tensor({kBatch, 3}, rng);
         std::vector<std::size_t> y{0, 2, 1, 2};
         return Case{{{"logits", z}}, [=] { return cross_entropy(log_softmax(z), y); }};
       }},
      {"domain",
       [](Rng& rng) {
         auto suite = gradcheck_suite_model(rng.next());
         Tensor f_s, f_t;
         auto inputs = with_features(suite, rng, f_s, f_t);
         return Case{inputs, [=] {
                       auto ps = exp(suite.predictor.forward(f_s));
                       auto pt = exp(suite.predictor.forward(f_t));
                       return domain_adversarial_loss(suite, f_s, ps, f_t, pt, Reversal::plain());
                     }};
       }},
      {"s2t",
       [](Rng& rng) {
         auto suite = gradcheck_suite_model(rng.next());
         Tensor f_s, f_t;
         auto inputs = with_features(suite, rng, f_s, f_t);
         std::vector<std::size_t> y{0, 1, 1, 0};
         return Case{inputs, [=] { return translation_loss_s2t(suite, f_s, y, f_t, 1.0, Reversal::plain()); }};
       }},
      {"t2s",
       [](Rng& rng) {
         auto suite = gradcheck_suite_model(rng.next());
         Tensor f_s, f_t;
         auto inputs = with_features(suite, rng, f_s, f_t);
         return Case{inputs, [=] { return translation_loss_t2s(suite, f_s, f_t, Reversal::plain()); }};
       }},
      {"cycle",
       [](Rng& rng) {
         auto suite = gradcheck_suite_model(rng.next());
         Tensor f_s, f_t;
         auto inputs = with_features(suite, rng, f_s, f_t);
         return Case{inputs, [=] { return cycle_loss(suite, f_s, f_t); }};
       }},
      {"total",
       [](Rng& rng) {
         auto suite = gradcheck_suite_model(rng.next());
         auto b = random_batch(suite, rng);
         return Case{collect_params(suite),
                     [=] { return total_loss(suite, b.x_s, b.y_s, b.x_t, LossWeights{}, Reversal::plain()).total; }};
       }},
  };
  return table;
}

// The reversed graph against the plain objective: discriminator gradients
// must be the negated plain gradient, everything else the plain gradient
// scaled by the reversal coefficient.
ComponentResult check_total_reversed(Rng& rng, const GradCheckOptions& options) {
  auto suite = gradcheck_suite_model(rng.next());
  auto b = random_batch(suite, rng);
  const Reversal reversal{.enabled = true, .coeff = 1.0};
  auto params = collect_params(suite);
  for (auto& p : params) p.tensor.clear_grad();
  total_loss(suite, b.x_s, b.y_s, b.x_t, LossWeights{}, reversal).total.backward();

  const auto value = [&] { return total_loss(suite, b.x_s, b.y_s, b.x_t, LossWeights{}, Reversal::plain()).total.item(); };
  const auto run_group = [&](const std::vector<NamedTensor>& group, double expected) {
    std::vector<std::vector<double>> analytic;
    for (const auto& p : group) {
      const auto g = p.tensor.grad();
      analytic.emplace_back(g.begin(), g.end());
    }
    auto opts = options;
    opts.expected_scale = expected;
    return compare_gradients(value, analytic, group, opts);
  };
  auto gen = run_group(generator_params(suite), reversal.coeff);
  auto disc = run_group(discriminator_params(suite), -1.0);
  for (auto& p : params) p.tensor.clear_grad();

  GradCheckReport merged = gen;
  for (auto& t : disc.tensors) merged.tensors.push_back(t);
  if (disc.max_rel_error > merged.max_rel_error) {
    merged.max_rel_error = disc.max_rel_error;
    merged.worst_location = disc.worst_location;
  }
  merged.passed = gen.passed && disc.passed;
  if (!merged.failure) merged.failure = disc.failure;
  return {"total_reversed", merged};
}

}  // namespace

const std::vector<std::string>& gradcheck_components() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, builder] : builders()) out.push_back(name);
    out.push_back("grad_reversal");
    out.push_back("total_reversed");
    std::sort(out.begin(), out.end());
    return out;
  }();
  return names;
}

std::vector<ComponentResult> run_gradcheck_suite(const std::vector<std::string>& components,
                                                 const GradCheckOptions& options, std::uint64_t seed) {
  const auto& all = gradcheck_components();
  const auto& selected = components.empty() ? all : components;
  for (const auto& name : selected)
    if (std::find(all.begin(), all.end(), name) == all.end())
      throw ContractError("unknown gradcheck component '" + name + "'");

  std::vector<ComponentResult> results;
  for (const auto& name : all) {
    if (std::find(selected.begin(), selected.end(), name) == selected.end()) continue;
    Rng rng(derive_seed(seed, name_hash(name)));
    if (name == "total_reversed") {
      results.push_back(check_total_reversed(rng, options));
    } else if (name == "grad_reversal") {
      // Forward is the identity, so the numeric gradient is that of the
      // plain projection and the analytic one is -coeff times it.
      auto x = random_tensor({3, 4}, rng);
      const auto s = rng.next();
      const double coeff = 0.7;
      auto opts = options;
      opts.expected_scale = -coeff;
      results.push_back(
          {name, finite_diff_check([=] { return project(grad_reversal(x, coeff), s); }, {{{"x", x}}}, opts)});
    } else {
      auto c = builders().at(name)(rng);
      results.push_back({name, finite_diff_check(c.fn, c.inputs, options)});
    }
  }
  return results;
}

}  // namespace catn
