// Copyright 2026 The FarNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "farnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "farnet/errors.hpp"

namespace farnet {

namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (Tape::active() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

std::vector<double>& grad_of(TensorImpl& t) {
  if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0);
  return t.grad;
}

// Registers `rule` on the active tape; `rule` runs only when the output received gradient.
template <typename Rule>
void record(Tensor& out, Rule rule) {
  out.set_requires_grad(true);
  std::weak_ptr<TensorImpl> weak_out = out.handle();
  Tape::active()->record([weak_out, rule = std::move(rule)]() {
    auto o = weak_out.lock();
    if (!o || o->grad.empty()) return;
    rule(*o);
  });
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + " needs a matrix, got " + shape_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// C[m×n] += A[m×k] · B[k×n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[m×n] += A[m×k] · B[n×k]ᵀ
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] += s;
    }
  }
}

// C[m×n] += A[k×m]ᵀ · B[k×n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t k, std::size_t m, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a + p * m;
    const double* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = ap[i];
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

double vector_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Tensor out = Tensor::zeros({m, n});
  gemm_nn(a.data().data(), b.data().data(), out.data().data(), m, k, n);
  if (tracking({&a, &b})) {
    record(out, [A = a.handle(), B = b.handle(), m, k, n](TensorImpl& o) {
      if (A->requires_grad) gemm_nt(o.grad.data(), B->data.data(), grad_of(*A).data(), m, n, k);
      if (B->requires_grad) gemm_tn(A->data.data(), o.grad.data(), grad_of(*B).data(), m, k, n);
    });
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw DimensionError("matmul_nt: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()) + "^T");
  }
  Tensor out = Tensor::zeros({m, n});
  gemm_nt(a.data().data(), b.data().data(), out.data().data(), m, k, n);
  if (tracking({&a, &b})) {
    record(out, [A = a.handle(), B = b.handle(), m, k, n](TensorImpl& o) {
      // dA = dO · B, dB = dOᵀ · A
      if (A->requires_grad) gemm_nn(o.grad.data(), B->data.data(), grad_of(*A).data(), m, n, k);
      if (B->requires_grad) gemm_tn(o.grad.data(), A->data.data(), grad_of(*B).data(), m, n, k);
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor out = Tensor::zeros({n, m});
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
  if (tracking({&a})) {
    record(out, [A = a.handle(), m, n](TensorImpl& o) {
      auto& ga = grad_of(*A);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += o.grad[j * m + i];
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  auto x = a.data(), y = b.data();
  auto z = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + y[i];
  if (tracking({&a, &b})) {
    record(out, [A = a.handle(), B = b.handle()](TensorImpl& o) {
      for (auto* t : {A.get(), B.get()}) {
        if (!t->requires_grad) continue;
        auto& g = grad_of(*t);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  auto x = a.data(), y = b.data();
  auto z = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] - y[i];
  if (tracking({&a, &b})) {
    record(out, [A = a.handle(), B = b.handle()](TensorImpl& o) {
      if (A->requires_grad) {
        auto& g = grad_of(*A);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
      }
      if (B->requires_grad) {
        auto& g = grad_of(*B);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o.grad[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  auto x = a.data(), y = b.data();
  auto z = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * y[i];
  if (tracking({&a, &b})) {
    record(out, [A = a.handle(), B = b.handle()](TensorImpl& o) {
      if (A->requires_grad) {
        auto& g = grad_of(*A);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * B->data[i];
      }
      if (B->requires_grad) {
        auto& g = grad_of(*B);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * A->data[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out = Tensor::zeros(a.shape());
  auto x = a.data();
  auto z = out.data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] * factor;
  if (tracking({&a})) {
    record(out, [A = a.handle(), factor](TensorImpl& o) {
      auto& g = grad_of(*A);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * factor;
    });
  }
  return out;
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_row_bias");
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.size() != n) {
    throw DimensionError("add_row_bias: bias " + shape_string(bias.shape()) + " vs input " + shape_string(x.shape()));
  }
  Tensor out = Tensor::zeros(x.shape());
  auto src = x.data(), b = bias.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) dst[i * n + j] = src[i * n + j] + b[j];
  if (tracking({&x, &bias})) {
    record(out, [X = x.handle(), B = bias.handle(), m, n](TensorImpl& o) {
      if (X->requires_grad) {
        auto& g = grad_of(*X);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
      }
      if (B->requires_grad) {
        auto& g = grad_of(*B);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[i * n + j];
      }
    });
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  constexpr double kAlpha = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kCubic = 0.044715;
  Tensor out = Tensor::zeros(x.shape());
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double v = src[i];
    dst[i] = 0.5 * v * (1.0 + std::tanh(kAlpha * (v + kCubic * v * v * v)));
  }
  if (tracking({&x})) {
    record(out, [X = x.handle()](TensorImpl& o) {
      auto& g = grad_of(*X);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double v = X->data[i];
        const double t = std::tanh(kAlpha * (v + kCubic * v * v * v));
        const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kAlpha * (1.0 + 3.0 * kCubic * v * v);
        g[i] += o.grad[i] * d;
      }
    });
  }
  return out;
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_matrix(x, "layer_norm_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (gamma.size() != n || beta.size() != n) {
    throw DimensionError("layer_norm_rows: affine parameters do not match width " + std::to_string(n));
  }
  Tensor out = Tensor::zeros(x.shape());
  std::vector<double> normalized(m * n);
  std::vector<double> inv_std(m);
  auto src = x.data(), gm = gamma.data(), bt = beta.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* r = src.data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += r[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (r[j] - mu) * (r[j] - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (r[j] - mu) * inv_std[i];
      normalized[i * n + j] = h;
      dst[i * n + j] = h * gm[j] + bt[j];
    }
  }
  if (tracking({&x, &gamma, &beta})) {
    record(out, [X = x.handle(), G = gamma.handle(), B = beta.handle(), normalized = std::move(normalized),
                 inv_std = std::move(inv_std), m, n](TensorImpl& o) {
      if (G->requires_grad) {
        auto& gg = grad_of(*G);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gg[j] += o.grad[i * n + j] * normalized[i * n + j];
      }
      if (B->requires_grad) {
        auto& gb = grad_of(*B);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gb[j] += o.grad[i * n + j];
      }
      if (X->requires_grad) {
        auto& gx = grad_of(*X);
        std::vector<double> dh(n);
        for (std::size_t i = 0; i < m; ++i) {
          double mean_dh = 0.0, mean_dh_h = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            dh[j] = o.grad[i * n + j] * G->data[j];
            mean_dh += dh[j];
            mean_dh_h += dh[j] * normalized[i * n + j];
          }
          mean_dh /= static_cast<double>(n);
          mean_dh_h /= static_cast<double>(n);
          for (std::size_t j = 0; j < n; ++j) {
            gx[i * n + j] += inv_std[i] * (dh[j] - mean_dh - normalized[i * n + j] * mean_dh_h);
          }
        }
      }
    });
  }
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  require_matrix(x, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros(x.shape());
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* r = src.data() + i * n;
    double* y = dst.data() + i * n;
    const double mx = *std::max_element(r, r + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(r[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= z;
  }
  if (tracking({&x})) {
    record(out, [X = x.handle(), m, n](TensorImpl& o) {
      auto& g = grad_of(*X);
      for (std::size_t i = 0; i < m; ++i) {
        const double* y = o.data.data() + i * n;
        const double* dy = o.grad.data() + i * n;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += dy[j] * y[j];
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (dy[j] - s);
      }
    });
  }
  return out;
}

Tensor l2_normalize_rows(const Tensor& x) {
  require_matrix(x, "l2_normalize_rows");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros(x.shape());
  std::vector<double> norms(m);
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    norms[i] = vector_norm(src.subspan(i * n, n));
    if (!(norms[i] > kNormEpsilon)) {
      throw DegenerateVectorError("l2_normalize_rows: row " + std::to_string(i) + " has near-zero norm");
    }
    for (std::size_t j = 0; j < n; ++j) dst[i * n + j] = src[i * n + j] / norms[i];
  }
  if (tracking({&x})) {
    record(out, [X = x.handle(), norms = std::move(norms), m, n](TensorImpl& o) {
      auto& g = grad_of(*X);
      for (std::size_t i = 0; i < m; ++i) {
        const double* y = o.data.data() + i * n;
        const double* dy = o.grad.data() + i * n;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += y[j] * dy[j];
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += (dy[j] - y[j] * s) / norms[i];
      }
    });
  }
  return out;
}

Tensor l2_normalize(const Tensor& v) {
  if (v.rank() != 1) throw DimensionError("l2_normalize needs a vector, got " + shape_string(v.shape()));
  return reshape(l2_normalize_rows(reshape(v, {1, v.size()})), {v.size()});
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tensor out = Tensor::scalar(s);
  if (tracking({&x})) {
    record(out, [X = x.handle()](TensorImpl& o) {
      auto& g = grad_of(*X);
      for (auto& gi : g) gi += o.grad[0];
    });
  }
  return out;
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor mean_rows(const Tensor& x) {
  require_matrix(x, "mean_rows");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros({n});
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) dst[j] += src[i * n + j];
  for (auto& d : dst) d /= static_cast<double>(m);
  if (tracking({&x})) {
    record(out, [X = x.handle(), m, n](TensorImpl& o) {
      auto& g = grad_of(*X);
      const double inv = 1.0 / static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += o.grad[j] * inv;
    });
  }
  return out;
}

Tensor dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: size mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  auto x = a.data(), y = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  Tensor out = Tensor::scalar(s);
  if (tracking({&a, &b})) {
    record(out, [A = a.handle(), B = b.handle()](TensorImpl& o) {
      const double g = o.grad[0];
      if (A->requires_grad) {
        auto& ga = grad_of(*A);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * B->data[i];
      }
      if (B->requires_grad) {
        auto& gb = grad_of(*B);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * A->data[i];
      }
    });
  }
  return out;
}

Tensor cosine(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine: size mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  auto x = a.data(), y = b.data();
  const double na = vector_norm(x), nb = vector_norm(y);
  if (!(na > kNormEpsilon) || !(nb > kNormEpsilon)) {
    throw DegenerateVectorError("cosine: input vector has near-zero norm");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  const double c = s / (na * nb);
  Tensor out = Tensor::scalar(c);
  if (tracking({&a, &b})) {
    record(out, [A = a.handle(), B = b.handle(), na, nb, c](TensorImpl& o) {
      const double g = o.grad[0];
      if (A->requires_grad) {
        auto& ga = grad_of(*A);
        for (std::size_t i = 0; i < ga.size(); ++i)
          ga[i] += g * (B->data[i] / (na * nb) - c * A->data[i] / (na * na));
      }
      if (B->requires_grad) {
        auto& gb = grad_of(*B);
        for (std::size_t i = 0; i < gb.size(); ++i)
          gb[i] += g * (A->data[i] / (na * nb) - c * B->data[i] / (nb * nb));
      }
    });
  }
  return out;
}

Tensor log_softmax_nll(const Tensor& logits, std::size_t target_index) {
  const std::size_t n = logits.size();
  if (target_index >= n) {
    throw IndexError("log_softmax_nll: target index " + std::to_string(target_index) + " out of range for " +
                     std::to_string(n) + " logits");
  }
  auto x = logits.data();
  const double mx = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (double v : x) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  Tensor out = Tensor::scalar(lse - x[target_index]);
  if (tracking({&logits})) {
    record(out, [L = logits.handle(), target_index, lse](TensorImpl& o) {
      auto& g = grad_of(*L);
      const double go = o.grad[0];
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double p = std::exp(L->data[i] - lse);
        g[i] += go * (p - (i == target_index ? 1.0 : 0.0));
      }
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_string(x.shape()) + " cannot become " + shape_string(shape));
  }
  Tensor out = Tensor::from(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  if (tracking({&x})) {
    record(out, [X = x.handle()](TensorImpl& o) {
      auto& g = grad_of(*X);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    });
  }
  return out;
}

Tensor row(const Tensor& x, std::size_t i) {
  require_matrix(x, "row");
  const std::size_t m = x.rows(), n = x.cols();
  if (i >= m) throw IndexError("row: index " + std::to_string(i) + " out of range for " + shape_string(x.shape()));
  auto src = x.data().subspan(i * n, n);
  Tensor out = Tensor::vector(std::vector<double>(src.begin(), src.end()));
  if (tracking({&x})) {
    record(out, [X = x.handle(), i, n](TensorImpl& o) {
      auto& g = grad_of(*X);
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += o.grad[j];
    });
  }
  return out;
}

Tensor stack(const std::vector<Tensor>& items) {
  if (items.empty()) throw DimensionError("stack: no inputs");
  const std::size_t n = items.front().size();
  std::vector<double> values;
  values.reserve(items.size() * n);
  bool any_grad = false;
  for (const auto& t : items) {
    if (t.size() != n) throw DimensionError("stack: inputs differ in size");
    values.insert(values.end(), t.data().begin(), t.data().end());
    any_grad = any_grad || t.requires_grad();
  }
  Tensor out = Tensor::matrix(items.size(), n, std::move(values));
  if (any_grad && Tape::active() != nullptr) {
    std::vector<std::shared_ptr<TensorImpl>> parts;
    for (const auto& t : items) parts.push_back(t.handle());
    record(out, [parts = std::move(parts), n](TensorImpl& o) {
      for (std::size_t k = 0; k < parts.size(); ++k) {
        if (!parts[k]->requires_grad) continue;
        auto& g = grad_of(*parts[k]);
        for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[k * n + j];
      }
    });
  }
  return out;
}

Tensor concat_rows(const Tensor& top, const Tensor& bottom) {
  require_matrix(top, "concat_rows");
  require_matrix(bottom, "concat_rows");
  if (top.cols() != bottom.cols()) {
    throw DimensionError("concat_rows: widths differ, " + shape_string(top.shape()) + " vs " +
                         shape_string(bottom.shape()));
  }
  std::vector<double> values(top.data().begin(), top.data().end());
  values.insert(values.end(), bottom.data().begin(), bottom.data().end());
  const std::size_t split = top.size();
  Tensor out = Tensor::matrix(top.rows() + bottom.rows(), top.cols(), std::move(values));
  if (tracking({&top, &bottom})) {
    record(out, [T = top.handle(), B = bottom.handle(), split](TensorImpl& o) {
      if (T->requires_grad) {
        auto& g = grad_of(*T);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
      }
      if (B->requires_grad) {
        auto& g = grad_of(*B);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[split + i];
      }
    });
  }
  return out;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (begin >= end || end > m) {
    throw IndexError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) + ") invalid for " +
                     shape_string(x.shape()));
  }
  auto src = x.data().subspan(begin * n, (end - begin) * n);
  Tensor out = Tensor::matrix(end - begin, n, std::vector<double>(src.begin(), src.end()));
  if (tracking({&x})) {
    record(out, [X = x.handle(), offset = begin * n](TensorImpl& o) {
      auto& g = grad_of(*X);
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[offset + i] += o.grad[i];
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_cols");
  const std::size_t m = x.rows(), n = x.cols();
  if (begin >= end || end > n) {
    throw IndexError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) + ") invalid for " +
                     shape_string(x.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out = Tensor::zeros({m, w});
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) dst[i * w + j] = src[i * n + begin + j];
  if (tracking({&x})) {
    record(out, [X = x.handle(), m, n, w, begin](TensorImpl& o) {
      auto& g = grad_of(*X);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) g[i * n + begin + j] += o.grad[i * w + j];
    });
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts.front().rows();
  std::size_t n = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    if (p.rows() != m) throw DimensionError("concat_cols: row counts differ");
    n += p.cols();
    any_grad = any_grad || p.requires_grad();
  }
  Tensor out = Tensor::zeros({m, n});
  auto dst = out.data();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    auto src = p.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) dst[i * n + offset + j] = src[i * w + j];
    offset += w;
  }
  if (any_grad && Tape::active() != nullptr) {
    std::vector<std::shared_ptr<TensorImpl>> handles;
    for (const auto& p : parts) handles.push_back(p.handle());
    record(out, [handles = std::move(handles), m, n](TensorImpl& o) {
      std::size_t off = 0;
      for (const auto& h : handles) {
        const std::size_t w = h->shape[1];
        if (h->requires_grad) {
          auto& g = grad_of(*h);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j) g[i * w + j] += o.grad[i * n + off + j];
        }
        off += w;
      }
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& indices) {
  require_matrix(table, "gather_rows");
  const std::size_t v = table.rows(), n = table.cols();
  if (indices.empty()) throw DimensionError("gather_rows: empty index list");
  Tensor out = Tensor::zeros({indices.size(), n});
  auto src = table.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= v) {
      throw IndexError("gather_rows: index " + std::to_string(indices[i]) + " out of range for " +
                       std::to_string(v) + " rows");
    }
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(indices[i] * n), n,
                dst.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  if (tracking({&table})) {
    record(out, [T = table.handle(), indices, n](TensorImpl& o) {
      auto& g = grad_of(*T);
      for (std::size_t i = 0; i < indices.size(); ++i)
        for (std::size_t j = 0; j < n; ++j) g[indices[i] * n + j] += o.grad[i * n + j];
    });
  }
  return out;
}

}  // namespace farnet
