#pragma once

#include <cstddef>
#include <span>

#include "catn/models.hpp"

namespace catn {

struct LossWeights {
  double lambda = 1.0;  // conditional domain-adversarial term
  double beta = 1.0;    // classification of translated source features
  double eta1 = 0.01;   // both translation terms
  double eta2 = 0.1;    // cycle consistency

  bool operator==(const LossWeights&) const = default;
};

void validate(const LossWeights& weights);

// How the min side (F, P, translators) and the max side (discriminators)
// share one backward pass. When enabled, every discriminator sees its input
// through grad_reversal(coeff) and its logit through grad_reversal(1), so
// descending the total loss makes each discriminator ascend it while the
// networks feeding it descend with gradient scaled by `coeff`. When disabled
// the graph is the plain objective and backward yields its true gradient.
struct Reversal {
  bool enabled = true;
  double coeff = 1.0;

  static Reversal plain() { return {.enabled = false, .coeff = 1.0}; }
};

struct LossBreakdown {
  double l_cls = 0.0;
  double l_dom = 0.0;
  double l_con = 0.0;
  double l_s2t = 0.0;
  double l_t2s = 0.0;
  double l_cyc = 0.0;
  double l_total = 0.0;
};

// Mean of -log_probs[i, labels[i]].
Tensor cross_entropy(const Tensor& log_probs, std::span<const std::size_t> labels);

// E[log D(real)] + E[log(1 - D(fake))] for a sigmoid-head discriminator,
// evaluated from its logits with log arguments floored at 1e-12.
Tensor discriminator_log_likelihood(const Mlp& discriminator, const Tensor& real, const Tensor& fake,
                                    const Reversal& reversal);

// Conditional domain term: D_d on condition(f, p), source labelled 1.
Tensor domain_adversarial_loss(const ModelSuite& suite, const Tensor& f_s, const Tensor& p_s, const Tensor& f_t,
                               const Tensor& p_t, const Reversal& reversal);

// D_t log-likelihood on (f_t, T_s2t(f_s)) plus beta * CE(P(T_s2t(f_s)), y_s).
Tensor translation_loss_s2t(const ModelSuite& suite, const Tensor& f_s, std::span<const std::size_t> y_s,
                            const Tensor& f_t, double beta, const Reversal& reversal);

// D_s log-likelihood on (f_s, T_t2s(f_t)).
Tensor translation_loss_t2s(const ModelSuite& suite, const Tensor& f_s, const Tensor& f_t, const Reversal& reversal);

// E||T_t2s(T_s2t(f_s)) - f_s||^2 + E||T_s2t(T_t2s(f_t)) - f_t||^2.
Tensor cycle_loss(const ModelSuite& suite, const Tensor& f_s, const Tensor& f_t);

struct LossGraph {
  Tensor total;
  LossBreakdown breakdown;
};

// Builds every term the suite has networks for and combines them as
//   l_con   = l_cls + lambda * l_dom
//   l_total = l_con + eta1 * (l_s2t + l_t2s) + eta2 * l_cyc
// `x_t` may be undefined only when the suite has no adversarial networks.
LossGraph total_loss(const ModelSuite& suite, const Tensor& x_s, std::span<const std::size_t> y_s, const Tensor& x_t,
                     const LossWeights& weights, const Reversal& reversal);

// Mean D_d probability over a batch, no graph kept.
double domain_output_mean(const ModelSuite& suite, const Tensor& x);

}  // namespace catn
