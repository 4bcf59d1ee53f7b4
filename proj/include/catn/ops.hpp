#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "catn/tensor.hpp"

namespace catn {

enum class Activation { identity, relu, tanh, sigmoid };

std::string_view to_string(Activation kind);
Activation activation_from_string(std::string_view name);

// Dense products.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// x[batch,in] * weight[out,in]^T + bias[out], broadcast over rows.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Elementwise on equal shapes; either side may also be a one-element tensor.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor activation(const Tensor& x, Activation kind);

// Row-wise log-softmax of a [batch, C] tensor, C >= 2.
Tensor log_softmax(const Tensor& x);
// log(sigmoid(x)) computed from logits, bounded below by log(floor).
Tensor log_sigmoid(const Tensor& x, double floor = 1e-12);

// Flattened f p^T for vectors f[df], p[dp]; entry a*dp + c is f[a]*p[c].
Tensor outer_product(const Tensor& f, const Tensor& p);
// Row-wise outer_product of f[batch,df] and p[batch,dp] -> [batch, df*dp].
Tensor row_outer(const Tensor& f, const Tensor& p);

// Identity forward; backward multiplies the upstream gradient by -coeff.
Tensor grad_reversal(const Tensor& x, double coeff);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Per-row squared L2 norm averaged over rows of a [batch, d] tensor.
Tensor mean_squared_norm(const Tensor& x);

// Picks x[i, index[i]] from a [batch, C] tensor -> [batch].
Tensor pick(const Tensor& x, std::span<const std::size_t> index);

}  // namespace catn
