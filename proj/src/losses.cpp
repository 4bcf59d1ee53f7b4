#include "catn/losses.hpp"

#include <cmath>

#include "catn/errors.hpp"

namespace catn {

namespace {

constexpr double kLogFloor = 1e-12;

Tensor discriminator_logits(const Mlp& discriminator, const Tensor& input, const Reversal& reversal) {
  if (!reversal.enabled) return discriminator.pre_activation(input);
  return grad_reversal(discriminator.pre_activation(grad_reversal(input, reversal.coeff)), 1.0);
}

const Mlp& require(const std::optional<Mlp>& net, const char* what) {
  if (!net) throw ContractError(std::string("suite was built without ") + what);
  return *net;
}

Tensor domain_term(const ModelSuite& suite, const Tensor& f_s, const Tensor& p_s, const Tensor& f_t,
                   const Tensor& p_t, const Reversal& reversal) {
  const Mlp& disc = require(suite.domain_disc, "a domain discriminator");
  const RandomizedMaps* maps = suite.maps ? &*suite.maps : nullptr;
  const Tensor h_s = condition(f_s, p_s, suite.arch.conditioning, maps);
  const Tensor h_t = condition(f_t, p_t, suite.arch.conditioning, maps);
  return discriminator_log_likelihood(disc, h_s, h_t, reversal);
}

Tensor s2t_term(const ModelSuite& suite, const Tensor& f_s_translated, std::span<const std::size_t> y_s,
                const Tensor& f_t, double beta, const Reversal& reversal) {
  const Mlp& disc = require(suite.target_disc, "a target sample discriminator");
  const Tensor adversarial = discriminator_log_likelihood(disc, f_t, f_s_translated, reversal);
  const Tensor semantic = cross_entropy(suite.predictor.forward(f_s_translated), y_s);
  return add(adversarial, scale(semantic, beta));
}

Tensor t2s_term(const ModelSuite& suite, const Tensor& f_s, const Tensor& f_t_translated, const Reversal& reversal) {
  const Mlp& disc = require(suite.source_disc, "a source sample discriminator");
  return discriminator_log_likelihood(disc, f_s, f_t_translated, reversal);
}

Tensor cycle_term(const ModelSuite& suite, const Tensor& f_s, const Tensor& f_s_translated, const Tensor& f_t,
                  const Tensor& f_t_translated) {
  const Tensor source_cycle = translate(suite, f_s_translated, Direction::t2s);
  const Tensor target_cycle = translate(suite, f_t_translated, Direction::s2t);
  return add(mean_squared_norm(sub(source_cycle, f_s)), mean_squared_norm(sub(target_cycle, f_t)));
}

}  // namespace

void validate(const LossWeights& weights) {
  for (double w : {weights.lambda, weights.beta, weights.eta1, weights.eta2})
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("loss weights must be finite and nonnegative");
}

Tensor cross_entropy(const Tensor& log_probs, std::span<const std::size_t> labels) {
  return scale(mean(pick(log_probs, labels)), -1.0);
}

Tensor discriminator_log_likelihood(const Mlp& discriminator, const Tensor& real, const Tensor& fake,
                                    const Reversal& reversal) {
  const Tensor real_logits = discriminator_logits(discriminator, real, reversal);
  const Tensor fake_logits = discriminator_logits(discriminator, fake, reversal);
  // log(1 - sigmoid(z)) = log(sigmoid(-z))
  return add(mean(log_sigmoid(real_logits, kLogFloor)), mean(log_sigmoid(scale(fake_logits, -1.0), kLogFloor)));
}

Tensor domain_adversarial_loss(const ModelSuite& suite, const Tensor& f_s, const Tensor& p_s, const Tensor& f_t,
                               const Tensor& p_t, const Reversal& reversal) {
  return domain_term(suite, f_s, p_s, f_t, p_t, reversal);
}

Tensor translation_loss_s2t(const ModelSuite& suite, const Tensor& f_s, std::span<const std::size_t> y_s,
                            const Tensor& f_t, double beta, const Reversal& reversal) {
  return s2t_term(suite, translate(suite, f_s, Direction::s2t), y_s, f_t, beta, reversal);
}

Tensor translation_loss_t2s(const ModelSuite& suite, const Tensor& f_s, const Tensor& f_t, const Reversal& reversal) {
  return t2s_term(suite, f_s, translate(suite, f_t, Direction::t2s), reversal);
}

Tensor cycle_loss(const ModelSuite& suite, const Tensor& f_s, const Tensor& f_t) {
  return cycle_term(suite, f_s, translate(suite, f_s, Direction::s2t), f_t, translate(suite, f_t, Direction::t2s));
}

LossGraph total_loss(const ModelSuite& suite, const Tensor& x_s, std::span<const std::size_t> y_s, const Tensor& x_t,
                     const LossWeights& weights, const Reversal& reversal) {
  validate(weights);
  const bool adversarial = suite.has_domain_discriminator() || suite.has_translation();
  if (adversarial && !x_t.defined()) throw ContractError("total_loss: target batch required by the active networks");

  LossGraph out;
  auto& b = out.breakdown;

  const Prediction source = predict(suite, x_s);
  const Tensor l_cls = cross_entropy(source.log_probs, y_s);
  b.l_cls = l_cls.item();

  Tensor l_con = l_cls;
  Prediction target;
  if (adversarial) target = predict(suite, x_t);

  if (suite.has_domain_discriminator()) {
    const Tensor l_dom = domain_term(suite, source.features, source.probs, target.features, target.probs, reversal);
    b.l_dom = l_dom.item();
    l_con = add(l_cls, scale(l_dom, weights.lambda));
  }
  b.l_con = l_con.item();

  Tensor total = l_con;
  if (suite.has_translation()) {
    const Tensor f_s_translated = translate(suite, source.features, Direction::s2t);
    const Tensor f_t_translated = translate(suite, target.features, Direction::t2s);
    const Tensor l_s2t = s2t_term(suite, f_s_translated, y_s, target.features, weights.beta, reversal);
    const Tensor l_t2s = t2s_term(suite, source.features, f_t_translated, reversal);
    const Tensor l_cyc = cycle_term(suite, source.features, f_s_translated, target.features, f_t_translated);
    b.l_s2t = l_s2t.item();
    b.l_t2s = l_t2s.item();
    b.l_cyc = l_cyc.item();
    total = add(add(l_con, scale(add(l_s2t, l_t2s), weights.eta1)), scale(l_cyc, weights.eta2));
  }
  b.l_total = total.item();
  if (!std::isfinite(b.l_total)) throw NumericError("total_loss: non-finite total");
  out.total = total;
  return out;
}

double domain_output_mean(const ModelSuite& suite, const Tensor& x) {
  const Mlp& disc = require(suite.domain_disc, "a domain discriminator");
  const Tensor input = x.detach();
  const Prediction pred = predict(suite, input);
  const RandomizedMaps* maps = suite.maps ? &*suite.maps : nullptr;
  const Tensor h = condition(pred.features, pred.probs, suite.arch.conditioning, maps);
  return mean(disc.forward(h)).item();
}

}  // namespace catn
