#include "catn/models.hpp"

#include <string>

#include "catn/errors.hpp"
#include "catn/rng.hpp"

namespace catn {

namespace {

// Stream ids for derive_seed; fixed so that a network's initial weights do
// not depend on which other networks are built.
enum Stream : std::uint64_t {
  kFeatureStream = 1,
  kPredictorStream,
  kDomainStream,
  kS2tStream,
  kT2sStream,
  kSourceDiscStream,
  kTargetDiscStream,
  kMapsStream,
};

Mlp build(const MlpSpec& spec, std::uint64_t seed, Stream stream) {
  Rng rng(derive_seed(seed, stream));
  return make_mlp(spec, rng);
}

void append(std::vector<NamedTensor>& out, const std::optional<Mlp>& mlp, const char* prefix) {
  if (!mlp) return;
  auto params = mlp->parameters(prefix);
  out.insert(out.end(), params.begin(), params.end());
}

}  // namespace

void validate(const ArchConfig& arch) {
  if (arch.num_classes < 2) throw ContractError("arch: num_classes must be at least 2");
  if (arch.input_dim == 0 || arch.feature_dim == 0 || arch.feature_hidden == 0 || arch.domain_hidden == 0 ||
      arch.translator_hidden == 0 || arch.sample_hidden == 0)
    throw ContractError("arch: all dimensions must be at least 1");
  if (arch.conditioning.threshold == 0 || arch.conditioning.random_dim == 0)
    throw ContractError("arch: conditioning threshold and random_dim must be positive");
}

MlpSpec feature_spec(const ArchConfig& arch) {
  return {.in_dim = arch.input_dim,
          .hidden = {arch.feature_hidden, arch.feature_hidden},
          .out_dim = arch.feature_dim,
          .hidden_activation = arch.feature_activation,
          .output_activation = arch.feature_output};
}

MlpSpec predictor_spec(const ArchConfig& arch) {
  return {.in_dim = arch.feature_dim,
          .hidden = {},
          .out_dim = arch.num_classes,
          .hidden_activation = arch.feature_activation,
          .output_activation = OutputActivation::log_softmax};
}

MlpSpec domain_discriminator_spec(const ArchConfig& arch) {
  return {.in_dim = conditioned_width(arch.feature_dim, arch.num_classes, arch.conditioning),
          .hidden = {arch.domain_hidden, arch.domain_hidden},
          .out_dim = 1,
          .hidden_activation = arch.discriminator_activation,
          .output_activation = OutputActivation::sigmoid};
}

MlpSpec translator_spec(const ArchConfig& arch) {
  return {.in_dim = arch.feature_dim,
          .hidden = {arch.translator_hidden, arch.translator_hidden, arch.translator_hidden},
          .out_dim = arch.feature_dim,
          .hidden_activation = arch.translator_activation,
          .output_activation = OutputActivation::none};
}

MlpSpec sample_discriminator_spec(const ArchConfig& arch) {
  return {.in_dim = arch.feature_dim,
          .hidden = {arch.sample_hidden, arch.sample_hidden},
          .out_dim = 1,
          .hidden_activation = arch.discriminator_activation,
          .output_activation = OutputActivation::sigmoid};
}

std::size_t ModelSuite::conditioned_width() const {
  return catn::conditioned_width(arch.feature_dim, arch.num_classes, arch.conditioning);
}

ModelSuite build_suite(const ArchConfig& arch) {
  validate(arch);
  ModelSuite suite;
  suite.arch = arch;
  suite.feature = build(feature_spec(arch), arch.seed, kFeatureStream);
  suite.predictor = build(predictor_spec(arch), arch.seed, kPredictorStream);
  if (arch.domain_discriminator) {
    suite.domain_disc = build(domain_discriminator_spec(arch), arch.seed, kDomainStream);
    if (select_branch(arch.feature_dim, arch.num_classes, arch.conditioning) == ConditioningBranch::randomized) {
      suite.maps = make_randomized_maps(arch.feature_dim, arch.num_classes, arch.conditioning.random_dim,
                                        derive_seed(arch.seed, kMapsStream));
    }
  }
  if (arch.translation) {
    suite.s2t = build(translator_spec(arch), arch.seed, kS2tStream);
    suite.t2s = build(translator_spec(arch), arch.seed, kT2sStream);
    suite.source_disc = build(sample_discriminator_spec(arch), arch.seed, kSourceDiscStream);
    suite.target_disc = build(sample_discriminator_spec(arch), arch.seed, kTargetDiscStream);
  }
  return suite;
}

std::vector<NamedTensor> collect_params(const Mlp& mlp, const std::string& prefix) { return mlp.parameters(prefix); }

std::vector<NamedTensor> collect_params(const ModelSuite& suite) {
  std::vector<NamedTensor> ordered;
  auto f = suite.feature.parameters("F");
  auto p = suite.predictor.parameters("P");
  ordered.insert(ordered.end(), f.begin(), f.end());
  ordered.insert(ordered.end(), p.begin(), p.end());
  append(ordered, suite.domain_disc, "D_d");
  append(ordered, suite.s2t, "T_s2t");
  append(ordered, suite.t2s, "T_t2s");
  append(ordered, suite.source_disc, "D_s");
  append(ordered, suite.target_disc, "D_t");
  return ordered;
}

std::vector<NamedTensor> generator_params(const ModelSuite& suite) {
  auto out = suite.feature.parameters("F");
  auto p = suite.predictor.parameters("P");
  out.insert(out.end(), p.begin(), p.end());
  append(out, suite.s2t, "T_s2t");
  append(out, suite.t2s, "T_t2s");
  return out;
}

std::vector<NamedTensor> discriminator_params(const ModelSuite& suite) {
  std::vector<NamedTensor> out;
  append(out, suite.domain_disc, "D_d");
  append(out, suite.source_disc, "D_s");
  append(out, suite.target_disc, "D_t");
  return out;
}

Prediction predict(const ModelSuite& suite, const Tensor& x) {
  Prediction out;
  out.features = suite.feature.forward(x);
  out.log_probs = suite.predictor.forward(out.features);
  out.probs = exp(out.log_probs);
  return out;
}

std::vector<std::size_t> argmax_rows(const Tensor& scores) {
  if (scores.rank() != 2) throw DimensionError("argmax_rows: expected a matrix, got " + shape_str(scores.shape()));
  const std::size_t rows = scores.dim(0), cols = scores.dim(1);
  const auto d = scores.data();
  std::vector<std::size_t> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < cols; ++j)
      if (d[i * cols + j] > d[i * cols + best]) best = j;
    out[i] = best;
  }
  return out;
}

std::string_view to_string(Direction direction) { return direction == Direction::s2t ? "s2t" : "t2s"; }

Tensor translate(const ModelSuite& suite, const Tensor& f, Direction direction) {
  const auto& net = direction == Direction::s2t ? suite.s2t : suite.t2s;
  if (!net) throw ContractError("translate: suite was built without translators");
  if (f.rank() != 2 || f.dim(1) != suite.arch.feature_dim)
    throw DimensionError("translate: expected [batch, " + std::to_string(suite.arch.feature_dim) + "], got " +
                         shape_str(f.shape()));
  return net->forward(f);
}

}  // namespace catn
