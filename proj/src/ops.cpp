#include "catn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "catn/errors.hpp"

namespace catn {

using detail::Node;

namespace {

using Backward = std::function<void(Node&)>;

Tensor make_result(const char* op, Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   Backward backward) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]))
      throw NumericError(std::string("op '") + op + "' produced a non-finite value at flat index " +
                         std::to_string(i) + " (output shape " + shape_str(shape) + ")");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->op = op;
  for (const auto& in : inputs) node->requires_grad = node->requires_grad || in.requires_grad();
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

// Grad buffer of input `i` if it takes part in backward, else null.
double* grad_of(Node& self, std::size_t i) {
  auto& in = *self.inputs[i];
  if (!in.requires_grad) return nullptr;
  in.ensure_grad();
  return in.grad.data();
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

void require_vector(const Tensor& t, const char* op) {
  if (t.rank() != 1) throw DimensionError(std::string(op) + ": expected a vector, got " + shape_str(t.shape()));
}

// C[m,n] (+)= A[m,k] * B[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C[m,n] (+)= A[m,k] * B[n,k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

// C[k,n] (+)= A[m,k]^T * B[m,n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

enum class Binary { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, Binary kind, const char* op) {
  const bool a_scalar = a.numel() == 1 && b.numel() != 1;
  const bool b_scalar = b.numel() == 1 && a.numel() != 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  const Shape out_shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = shape_numel(out_shape);
  const auto ad = a.data();
  const auto bd = b.data();
  auto av = [&](std::size_t i) { return a_scalar ? ad[0] : ad[i]; };
  auto bv = [&](std::size_t i) { return b_scalar ? bd[0] : bd[i]; };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (kind) {
      case Binary::add: out[i] = av(i) + bv(i); break;
      case Binary::sub: out[i] = av(i) - bv(i); break;
      case Binary::mul: out[i] = av(i) * bv(i); break;
    }
  }
  return make_result(op, out_shape, std::move(out), {a, b}, [kind, a_scalar, b_scalar, n](Node& self) {
    const auto& g = self.grad;
    const auto& ad = self.inputs[0]->data;
    const auto& bd = self.inputs[1]->data;
    if (double* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) {
        const double local = kind == Binary::mul ? (b_scalar ? bd[0] : bd[i]) : 1.0;
        ga[a_scalar ? 0 : i] += g[i] * local;
      }
    }
    if (double* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < n; ++i) {
        double local = 1.0;
        if (kind == Binary::sub) local = -1.0;
        if (kind == Binary::mul) local = a_scalar ? ad[0] : ad[i];
        gb[b_scalar ? 0 : i] += g[i] * local;
      }
    }
  });
}

// Elementwise unary op whose local derivative is a function of (input, output).
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, const char* op, Fwd fwd, Deriv deriv) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = fwd(xd[i]);
  return make_result(op, x.shape(), std::move(out), {x}, [deriv](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    const auto& xd = self.inputs[0]->data;
    for (std::size_t i = 0; i < xd.size(); ++i) gx[i] += self.grad[i] * deriv(xd[i], self.data[i]);
  });
}

}  // namespace

std::string_view to_string(Activation kind) {
  switch (kind) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "identity";
}

Activation activation_from_string(std::string_view name) {
  if (name == "identity" || name == "none") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ContractError("unknown activation '" + std::string(name) + "'");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_result("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const double* g = self.grad.data();
    if (double* ga = grad_of(self, 0)) gemm_nt(g, self.inputs[1]->data.data(), ga, m, n, k);
    if (double* gb = grad_of(self, 1)) gemm_tn(self.inputs[0]->data.data(), g, gb, m, k, n);
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto ad = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = ad[i * n + j];
  return make_result("transpose", {n, m}, std::move(out), {a}, [m, n](Node& self) {
    double* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += self.grad[j * m + i];
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_matrix(x, "linear");
  require_matrix(weight, "linear");
  require_vector(bias, "linear");
  const std::size_t batch = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  if (weight.dim(1) != in)
    throw DimensionError("linear: input width " + std::to_string(in) + " does not match weight " +
                         shape_str(weight.shape()));
  if (bias.dim(0) != out_dim)
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  std::vector<double> out(batch * out_dim);
  const auto bd = bias.data();
  for (std::size_t i = 0; i < batch; ++i) std::copy(bd.begin(), bd.end(), out.begin() + i * out_dim);
  gemm_nt(x.data().data(), weight.data().data(), out.data(), batch, in, out_dim);
  return make_result("linear", {batch, out_dim}, std::move(out), {x, weight, bias},
                     [batch, in, out_dim](Node& self) {
                       const double* g = self.grad.data();
                       if (double* gx = grad_of(self, 0))
                         gemm_nn(g, self.inputs[1]->data.data(), gx, batch, out_dim, in);
                       if (double* gw = grad_of(self, 1))
                         gemm_tn(g, self.inputs[0]->data.data(), gw, batch, out_dim, in);
                       if (double* gb = grad_of(self, 2)) {
                         for (std::size_t i = 0; i < batch; ++i)
                           for (std::size_t j = 0; j < out_dim; ++j) gb[j] += g[i * out_dim + j];
                       }
                     });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::mul, "mul"); }

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, "scale", [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; }, [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor activation(const Tensor& x, Activation kind) {
  switch (kind) {
    case Activation::identity: return x;
    case Activation::relu: return relu(x);
    case Activation::tanh: return tanh(x);
    case Activation::sigmoid: return sigmoid(x);
  }
  return x;
}

Tensor log_softmax(const Tensor& x) {
  require_matrix(x, "log_softmax");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (cols < 2) throw DimensionError("log_softmax: needs at least 2 classes, got " + shape_str(x.shape()));
  const auto xd = x.data();
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = xd.data() + i * cols;
    const double top = *std::max_element(row, row + cols);
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) total += std::exp(row[j] - top);
    const double log_total = top + std::log(total);
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = row[j] - log_total;
  }
  return make_result("log_softmax", x.shape(), std::move(out), {x}, [rows, cols](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < rows; ++i) {
      const double* g = self.grad.data() + i * cols;
      const double* y = self.data.data() + i * cols;
      double gsum = 0.0;
      for (std::size_t j = 0; j < cols; ++j) gsum += g[j];
      for (std::size_t j = 0; j < cols; ++j) gx[i * cols + j] += g[j] - std::exp(y[j]) * gsum;
    }
  });
}

Tensor log_sigmoid(const Tensor& x, double floor) {
  if (!(floor > 0.0 && floor < 1.0)) throw ContractError("log_sigmoid: floor must lie in (0, 1)");
  const double log_floor = std::log(floor);
  return unary(
      x, "log_sigmoid",
      [log_floor](double v) {
        // log(sigmoid(v)) = -softplus(-v)
        const double value = v >= 0.0 ? -std::log1p(std::exp(-v)) : v - std::log1p(std::exp(v));
        return std::max(value, log_floor);
      },
      [log_floor](double v, double y) {
        if (y <= log_floor) return 0.0;
        // d/dv log(sigmoid(v)) = 1 - sigmoid(v)
        return v >= 0.0 ? std::exp(-v) / (1.0 + std::exp(-v)) : 1.0 / (1.0 + std::exp(v));
      });
}

Tensor outer_product(const Tensor& f, const Tensor& p) {
  require_vector(f, "outer_product");
  require_vector(p, "outer_product");
  const std::size_t df = f.dim(0), dp = p.dim(0);
  const auto fd = f.data();
  const auto pd = p.data();
  std::vector<double> out(df * dp);
  for (std::size_t a = 0; a < df; ++a)
    for (std::size_t c = 0; c < dp; ++c) out[a * dp + c] = fd[a] * pd[c];
  return make_result("outer_product", {df * dp}, std::move(out), {f, p}, [df, dp](Node& self) {
    const auto& g = self.grad;
    const auto& fd = self.inputs[0]->data;
    const auto& pd = self.inputs[1]->data;
    double* gf = grad_of(self, 0);
    double* gp = grad_of(self, 1);
    for (std::size_t a = 0; a < df; ++a) {
      for (std::size_t c = 0; c < dp; ++c) {
        if (gf) gf[a] += g[a * dp + c] * pd[c];
        if (gp) gp[c] += g[a * dp + c] * fd[a];
      }
    }
  });
}

Tensor row_outer(const Tensor& f, const Tensor& p) {
  require_matrix(f, "row_outer");
  require_matrix(p, "row_outer");
  if (f.dim(0) != p.dim(0))
    throw DimensionError("row_outer: batch sizes differ, " + shape_str(f.shape()) + " vs " + shape_str(p.shape()));
  const std::size_t batch = f.dim(0), df = f.dim(1), dp = p.dim(1), width = df * dp;
  const auto fd = f.data();
  const auto pd = p.data();
  std::vector<double> out(batch * width);
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t a = 0; a < df; ++a)
      for (std::size_t c = 0; c < dp; ++c) out[i * width + a * dp + c] = fd[i * df + a] * pd[i * dp + c];
  return make_result("row_outer", {batch, width}, std::move(out), {f, p}, [batch, df, dp, width](Node& self) {
    const auto& g = self.grad;
    const auto& fd = self.inputs[0]->data;
    const auto& pd = self.inputs[1]->data;
    double* gf = grad_of(self, 0);
    double* gp = grad_of(self, 1);
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t a = 0; a < df; ++a) {
        for (std::size_t c = 0; c < dp; ++c) {
          const double gi = g[i * width + a * dp + c];
          if (gf) gf[i * df + a] += gi * pd[i * dp + c];
          if (gp) gp[i * dp + c] += gi * fd[i * df + a];
        }
      }
    }
  });
}

Tensor grad_reversal(const Tensor& x, double coeff) {
  if (!(coeff >= 0.0) || !std::isfinite(coeff))
    throw ContractError("grad_reversal: coefficient must be finite and nonnegative");
  const auto xd = x.data();
  return make_result("grad_reversal", x.shape(), std::vector<double>(xd.begin(), xd.end()), {x},
                     [coeff](Node& self) {
                       double* gx = grad_of(self, 0);
                       if (!gx) return;
                       for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += -coeff * self.grad[i];
                     });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result("sum", {1}, {total}, {x}, [](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    const double g = self.grad[0];
    for (std::size_t i = 0; i < self.inputs[0]->data.size(); ++i) gx[i] += g;
  });
}

Tensor mean(const Tensor& x) {
  const auto n = static_cast<double>(x.numel());
  double total = 0.0;
  for (double v : x.data()) total += v;
  return make_result("mean", {1}, {total / n}, {x}, [n](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    const double g = self.grad[0] / n;
    for (std::size_t i = 0; i < self.inputs[0]->data.size(); ++i) gx[i] += g;
  });
}

Tensor mean_squared_norm(const Tensor& x) {
  require_matrix(x, "mean_squared_norm");
  const auto rows = static_cast<double>(x.dim(0));
  double total = 0.0;
  for (double v : x.data()) total += v * v;
  return make_result("mean_squared_norm", {1}, {total / rows}, {x}, [rows](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    const auto& xd = self.inputs[0]->data;
    const double g = 2.0 * self.grad[0] / rows;
    for (std::size_t i = 0; i < xd.size(); ++i) gx[i] += g * xd[i];
  });
}

Tensor pick(const Tensor& x, std::span<const std::size_t> index) {
  require_matrix(x, "pick");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (index.size() != rows)
    throw DimensionError("pick: " + std::to_string(index.size()) + " indices for " + std::to_string(rows) + " rows");
  std::vector<std::size_t> idx(index.begin(), index.end());
  std::vector<double> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    if (idx[i] >= cols)
      throw ContractError("pick: index " + std::to_string(idx[i]) + " out of range [0, " + std::to_string(cols) +
                          ") at row " + std::to_string(i));
    out[i] = x.data()[i * cols + idx[i]];
  }
  return make_result("pick", {rows}, std::move(out), {x}, [idx = std::move(idx), cols](Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    for (std::size_t i = 0; i < idx.size(); ++i) gx[i * cols + idx[i]] += self.grad[i];
  });
}

}  // namespace catn
