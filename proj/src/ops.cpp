#include "cslr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace cslr {

namespace {

bool tracked(Tape* tape, std::initializer_list<TensorPtr> inputs) {
  if (!tape) return false;
  for (const auto& t : inputs)
    if (t && t->requires_grad) return true;
  return false;
}

// Marks the output as differentiable and pre-allocates its grad so backward
// closures can read it even when no downstream op touched this branch.
void track_output(const TensorPtr& out) {
  out->requires_grad = true;
  out->ensure_grad();
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape)
    throw DimensionError("add: shape mismatch " + a->shape_str() + " vs " + b->shape_str());
  auto out = Tensor::zeros(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) out->values[i] = a->values[i] + b->values[i];
  check_finite(*out, "add");
  if (tracked(tape, {a, b})) {
    track_output(out);
    tape->record([a, b, out] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < out->size(); ++i) b->grad[i] += out->grad[i];
      }
    });
  }
  return out;
}

TensorPtr scale(Tape* tape, const TensorPtr& a, double c) {
  auto out = Tensor::zeros(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) out->values[i] = a->values[i] * c;
  check_finite(*out, "scale");
  if (tracked(tape, {a})) {
    track_output(out);
    tape->record([a, out, c] {
      a->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i) a->grad[i] += c * out->grad[i];
    });
  }
  return out;
}

TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape)
    throw DimensionError("mul: shape mismatch " + a->shape_str() + " vs " + b->shape_str());
  auto out = Tensor::zeros(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) out->values[i] = a->values[i] * b->values[i];
  check_finite(*out, "mul");
  if (tracked(tape, {a, b})) {
    track_output(out);
    tape->record([a, b, out] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < out->size(); ++i) a->grad[i] += b->values[i] * out->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < out->size(); ++i) b->grad[i] += a->values[i] * out->grad[i];
      }
    });
  }
  return out;
}

TensorPtr add_row_bias(Tape* tape, const TensorPtr& x, const TensorPtr& bias) {
  const std::size_t rows = x->rows(), cols = x->cols();
  if (bias->size() != cols)
    throw DimensionError("add_row_bias: bias size " + bias->shape_str() + " vs cols");
  auto out = Tensor::zeros(x->shape);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out->at(r, c) = x->at(r, c) + bias->values[c];
  check_finite(*out, "add_row_bias");
  if (tracked(tape, {x, bias})) {
    track_output(out);
    tape->record([x, bias, out, rows, cols] {
      if (x->requires_grad) {
        x->ensure_grad();
        for (std::size_t i = 0; i < out->size(); ++i) x->grad[i] += out->grad[i];
      }
      if (bias->requires_grad) {
        bias->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c)
            bias->grad[c] += out->grad[r * cols + c];
      }
    });
  }
  return out;
}

TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  const std::size_t m = a->rows(), k = a->cols(), n = b->cols();
  if (b->rows() != k)
    throw DimensionError("matmul: inner dims " + a->shape_str() + " vs " + b->shape_str());
  auto out = Tensor::zeros({m, n});
  const double* av = a->values.data();
  const double* bv = b->values.data();
  double* ov = out->values.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = bv + p * n;
      double* orow = ov + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  check_finite(*out, "matmul");
  if (tracked(tape, {a, b})) {
    track_output(out);
    tape->record([a, b, out, m, k, n] {
      if (a->requires_grad) {
        a->ensure_grad();
        // dA = dOut * B^T
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const double g = out->grad[i * n + j];
            if (g == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p)
              a->grad[i * k + p] += g * b->values[p * n + j];
          }
      }
      if (b->requires_grad) {
        b->ensure_grad();
        // dB = A^T * dOut
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double av = a->values[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j)
              b->grad[p * n + j] += av * out->grad[i * n + j];
          }
      }
    });
  }
  return out;
}

TensorPtr transpose(Tape* tape, const TensorPtr& x) {
  const std::size_t m = x->rows(), n = x->cols();
  auto out = Tensor::zeros({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out->values[j * m + i] = x->values[i * n + j];
  if (tracked(tape, {x})) {
    track_output(out);
    tape->record([x, out, m, n] {
      x->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) x->grad[i * n + j] += out->grad[j * m + i];
    });
  }
  return out;
}

TensorPtr softmax_rows(Tape* tape, const TensorPtr& x) {
  const std::size_t rows = x->rows(), cols = x->cols();
  auto out = Tensor::zeros(x->shape);
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, x->at(r, c));
    double denom = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out->at(r, c) = std::exp(x->at(r, c) - mx);
      denom += out->at(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) out->at(r, c) /= denom;
  }
  check_finite(*out, "softmax_rows");
  if (tracked(tape, {x})) {
    track_output(out);
    tape->record([x, out, rows, cols] {
      x->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < cols; ++c) dot += out->grad[r * cols + c] * out->values[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c)
          x->grad[r * cols + c] +=
              out->values[r * cols + c] * (out->grad[r * cols + c] - dot);
      }
    });
  }
  return out;
}

TensorPtr log_softmax_rows(Tape* tape, const TensorPtr& x) {
  const std::size_t rows = x->rows(), cols = x->cols();
  auto out = Tensor::zeros(x->shape);
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, x->at(r, c));
    double denom = 0.0;
    for (std::size_t c = 0; c < cols; ++c) denom += std::exp(x->at(r, c) - mx);
    const double lse = mx + std::log(denom);
    for (std::size_t c = 0; c < cols; ++c) out->at(r, c) = x->at(r, c) - lse;
  }
  check_finite(*out, "log_softmax_rows");
  if (tracked(tape, {x})) {
    track_output(out);
    tape->record([x, out, rows, cols] {
      x->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        double gsum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) gsum += out->grad[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c)
          x->grad[r * cols + c] +=
              out->grad[r * cols + c] - std::exp(out->values[r * cols + c]) * gsum;
      }
    });
  }
  return out;
}

TensorPtr layer_norm(Tape* tape, const TensorPtr& x, const TensorPtr& gain,
                     const TensorPtr& bias, double eps) {
  const std::size_t rows = x->rows(), cols = x->cols();
  if (gain->size() != cols || bias->size() != cols)
    throw DimensionError("layer_norm: gain/bias size must equal feature dim");
  auto out = Tensor::zeros(x->shape);
  std::vector<double> means(rows), inv_stds(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += x->at(r, c);
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = x->at(r, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    means[r] = mean;
    inv_stds[r] = inv_std;
    for (std::size_t c = 0; c < cols; ++c)
      out->at(r, c) = (x->at(r, c) - mean) * inv_std * gain->values[c] + bias->values[c];
  }
  check_finite(*out, "layer_norm");
  if (tracked(tape, {x, gain, bias})) {
    track_output(out);
    tape->record([x, gain, bias, out, rows, cols, means, inv_stds] {
      const double n = static_cast<double>(cols);
      for (std::size_t r = 0; r < rows; ++r) {
        // xhat[c] = (x - mean) * inv_std, dY w.r.t. affine first
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          const double xhat = (x->values[r * cols + c] - means[r]) * inv_stds[r];
          const double g = out->grad[r * cols + c];
          if (gain->requires_grad) {
            gain->ensure_grad();
            gain->grad[c] += g * xhat;
          }
          if (bias->requires_grad) {
            bias->ensure_grad();
            bias->grad[c] += g;
          }
          const double dxhat = g * gain->values[c];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
        }
        if (x->requires_grad) {
          x->ensure_grad();
          for (std::size_t c = 0; c < cols; ++c) {
            const double xhat = (x->values[r * cols + c] - means[r]) * inv_stds[r];
            const double dxhat = out->grad[r * cols + c] * gain->values[c];
            x->grad[r * cols + c] +=
                inv_stds[r] * (dxhat - sum_dxhat / n - xhat * sum_dxhat_xhat / n);
          }
        }
      }
    });
  }
  return out;
}

TensorPtr conv1d(Tape* tape, const TensorPtr& x, const TensorPtr& kernels,
                 const TensorPtr& bias, int stride, Padding padding) {
  if (kernels->shape.size() != 3)
    throw DimensionError("conv1d: kernels must be k x C_in x C_out");
  const std::size_t t_in = x->rows(), c_in = x->cols();
  const std::size_t k = kernels->shape[0], kc_in = kernels->shape[1], c_out = kernels->shape[2];
  if (kc_in != c_in)
    throw DimensionError("conv1d: kernel C_in " + std::to_string(kc_in) + " vs input " +
                         std::to_string(c_in));
  if (stride < 1) throw DimensionError("conv1d: stride must be >= 1");
  if (padding == Padding::Same && k % 2 == 0)
    throw DimensionError("conv1d: same padding requires odd kernel size");
  const std::size_t pad = padding == Padding::Same ? (k - 1) / 2 : 0;
  const std::ptrdiff_t t_span =
      (static_cast<std::ptrdiff_t>(t_in) + 2 * static_cast<std::ptrdiff_t>(pad) -
       static_cast<std::ptrdiff_t>(k)) / stride + 1;
  if (t_span < 1)
    throw DimensionError("conv1d: sequence too short (T=" + std::to_string(t_in) +
                         ", k=" + std::to_string(k) + ")");
  const std::size_t t_out = static_cast<std::size_t>(t_span);
  if (bias && bias->size() != c_out) throw DimensionError("conv1d: bias size mismatch");

  auto out = Tensor::zeros({t_out, c_out});
  for (std::size_t to = 0; to < t_out; ++to) {
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(to) * stride -
                                static_cast<std::ptrdiff_t>(pad);
    double* orow = out->values.data() + to * c_out;
    if (bias)
      for (std::size_t co = 0; co < c_out; ++co) orow[co] = bias->values[co];
    for (std::size_t kk = 0; kk < k; ++kk) {
      const std::ptrdiff_t ti = base + static_cast<std::ptrdiff_t>(kk);
      if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(t_in)) continue;
      const double* xrow = x->values.data() + static_cast<std::size_t>(ti) * c_in;
      const double* krow = kernels->values.data() + kk * c_in * c_out;
      for (std::size_t ci = 0; ci < c_in; ++ci) {
        const double xv = xrow[ci];
        if (xv == 0.0) continue;
        const double* kvec = krow + ci * c_out;
        for (std::size_t co = 0; co < c_out; ++co) orow[co] += xv * kvec[co];
      }
    }
  }
  check_finite(*out, "conv1d");
  if (tracked(tape, {x, kernels, bias})) {
    track_output(out);
    tape->record([x, kernels, bias, out, t_in, c_in, k, c_out, t_out, stride, pad] {
      if (x->requires_grad) x->ensure_grad();
      if (kernels->requires_grad) kernels->ensure_grad();
      if (bias && bias->requires_grad) bias->ensure_grad();
      for (std::size_t to = 0; to < t_out; ++to) {
        const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(to) * stride -
                                    static_cast<std::ptrdiff_t>(pad);
        const double* grow = out->grad.data() + to * c_out;
        if (bias && bias->requires_grad)
          for (std::size_t co = 0; co < c_out; ++co) bias->grad[co] += grow[co];
        for (std::size_t kk = 0; kk < k; ++kk) {
          const std::ptrdiff_t ti = base + static_cast<std::ptrdiff_t>(kk);
          if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(t_in)) continue;
          const std::size_t t = static_cast<std::size_t>(ti);
          for (std::size_t ci = 0; ci < c_in; ++ci) {
            const double xv = x->values[t * c_in + ci];
            const double* kvec = kernels->values.data() + (kk * c_in + ci) * c_out;
            double gx = 0.0;
            for (std::size_t co = 0; co < c_out; ++co) {
              const double g = grow[co];
              gx += g * kvec[co];
              if (kernels->requires_grad)
                kernels->grad[(kk * c_in + ci) * c_out + co] += g * xv;
            }
            if (x->requires_grad) x->grad[t * c_in + ci] += gx;
          }
        }
      }
    });
  }
  return out;
}

TensorPtr depthwise_conv1d(Tape* tape, const TensorPtr& x, const TensorPtr& kernels,
                           const TensorPtr& bias) {
  const std::size_t t = x->rows(), c = x->cols();
  if (kernels->shape.size() != 2 || kernels->shape[1] != c)
    throw DimensionError("depthwise_conv1d: kernels must be k x C");
  const std::size_t k = kernels->shape[0];
  if (k % 2 == 0) throw DimensionError("depthwise_conv1d: kernel size must be odd");
  if (bias && bias->size() != c) throw DimensionError("depthwise_conv1d: bias size mismatch");
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k - 1) / 2;

  auto out = Tensor::zeros({t, c});
  for (std::size_t to = 0; to < t; ++to) {
    double* orow = out->values.data() + to * c;
    if (bias)
      for (std::size_t ci = 0; ci < c; ++ci) orow[ci] = bias->values[ci];
    for (std::size_t kk = 0; kk < k; ++kk) {
      const std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(to) - pad +
                                static_cast<std::ptrdiff_t>(kk);
      if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(t)) continue;
      const double* xrow = x->values.data() + static_cast<std::size_t>(ti) * c;
      const double* krow = kernels->values.data() + kk * c;
      for (std::size_t ci = 0; ci < c; ++ci) orow[ci] += xrow[ci] * krow[ci];
    }
  }
  check_finite(*out, "depthwise_conv1d");
  if (tracked(tape, {x, kernels, bias})) {
    track_output(out);
    tape->record([x, kernels, bias, out, t, c, k, pad] {
      if (x->requires_grad) x->ensure_grad();
      if (kernels->requires_grad) kernels->ensure_grad();
      if (bias && bias->requires_grad) bias->ensure_grad();
      for (std::size_t to = 0; to < t; ++to) {
        const double* grow = out->grad.data() + to * c;
        if (bias && bias->requires_grad)
          for (std::size_t ci = 0; ci < c; ++ci) bias->grad[ci] += grow[ci];
        for (std::size_t kk = 0; kk < k; ++kk) {
          const std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(to) - pad +
                                    static_cast<std::ptrdiff_t>(kk);
          if (ti < 0 || ti >= static_cast<std::ptrdiff_t>(t)) continue;
          const std::size_t tii = static_cast<std::size_t>(ti);
          for (std::size_t ci = 0; ci < c; ++ci) {
            if (x->requires_grad)
              x->grad[tii * c + ci] += grow[ci] * kernels->values[kk * c + ci];
            if (kernels->requires_grad)
              kernels->grad[kk * c + ci] += grow[ci] * x->values[tii * c + ci];
          }
        }
      }
    });
  }
  return out;
}

namespace {

template <typename F, typename DF>
TensorPtr unary_op(Tape* tape, const TensorPtr& x, const char* name, F f, DF df) {
  auto out = Tensor::zeros(x->shape);
  for (std::size_t i = 0; i < x->size(); ++i) out->values[i] = f(x->values[i]);
  check_finite(*out, name);
  if (tracked(tape, {x})) {
    track_output(out);
    tape->record([x, out, df] {
      x->ensure_grad();
      for (std::size_t i = 0; i < x->size(); ++i)
        x->grad[i] += df(x->values[i]) * out->grad[i];
    });
  }
  return out;
}

double sigmoid_scalar(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TensorPtr relu(Tape* tape, const TensorPtr& x) {
  return unary_op(tape, x, "relu",
                  [](double v) { return v > 0.0 ? v : 0.0; },
                  [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

TensorPtr gelu(Tape* tape, const TensorPtr& x) {
  // Exact erf form; derivative Phi(v) + v*phi(v).
  return unary_op(
      tape, x, "gelu",
      [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [](double v) {
        const double phi = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * phi;
      });
}

TensorPtr sigmoid(Tape* tape, const TensorPtr& x) {
  return unary_op(tape, x, "sigmoid", sigmoid_scalar, [](double v) {
    const double s = sigmoid_scalar(v);
    return s * (1.0 - s);
  });
}

TensorPtr swish(Tape* tape, const TensorPtr& x) {
  return unary_op(tape, x, "swish",
                  [](double v) { return v * sigmoid_scalar(v); },
                  [](double v) {
                    const double s = sigmoid_scalar(v);
                    return s + v * s * (1.0 - s);
                  });
}

TensorPtr glu(Tape* tape, const TensorPtr& x) {
  const std::size_t t = x->rows(), c2 = x->cols();
  if (c2 % 2 != 0) throw DimensionError("glu: channel count must be even");
  const std::size_t c = c2 / 2;
  auto out = Tensor::zeros({t, c});
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t ci = 0; ci < c; ++ci)
      out->at(r, ci) = x->at(r, ci) * sigmoid_scalar(x->at(r, c + ci));
  check_finite(*out, "glu");
  if (tracked(tape, {x})) {
    track_output(out);
    tape->record([x, out, t, c] {
      x->ensure_grad();
      for (std::size_t r = 0; r < t; ++r)
        for (std::size_t ci = 0; ci < c; ++ci) {
          const double a = x->values[r * 2 * c + ci];
          const double s = sigmoid_scalar(x->values[r * 2 * c + c + ci]);
          const double g = out->grad[r * c + ci];
          x->grad[r * 2 * c + ci] += g * s;
          x->grad[r * 2 * c + c + ci] += g * a * s * (1.0 - s);
        }
    });
  }
  return out;
}

TensorPtr maxpool1d(Tape* tape, const TensorPtr& x, int k, int stride) {
  const std::size_t t = x->rows(), c = x->cols();
  if (k < 1 || stride < 1) throw DimensionError("maxpool1d: k and stride must be >= 1");
  if (t < static_cast<std::size_t>(k))
    throw DimensionError("maxpool1d: sequence too short (T=" + std::to_string(t) +
                         ", k=" + std::to_string(k) + ")");
  const std::size_t t_out = (t - k) / stride + 1;
  auto out = Tensor::zeros({t_out, c});
  std::vector<std::size_t> argmax(t_out * c);
  for (std::size_t to = 0; to < t_out; ++to)
    for (std::size_t ci = 0; ci < c; ++ci) {
      std::size_t best = to * stride;
      double bv = x->at(best, ci);
      for (int kk = 1; kk < k; ++kk) {
        const std::size_t ti = to * stride + kk;
        if (x->at(ti, ci) > bv) {  // ties keep the earliest index
          bv = x->at(ti, ci);
          best = ti;
        }
      }
      out->at(to, ci) = bv;
      argmax[to * c + ci] = best;
    }
  if (tracked(tape, {x})) {
    track_output(out);
    tape->record([x, out, argmax, t_out, c] {
      x->ensure_grad();
      for (std::size_t i = 0; i < t_out * c; ++i)
        x->grad[argmax[i] * c + (i % c)] += out->grad[i];
    });
  }
  return out;
}

BatchNormState::BatchNormState(std::size_t channels) {
  gamma = Tensor::from({channels}, std::vector<double>(channels, 1.0), true);
  beta = Tensor::zeros({channels}, true);
  running_mean.assign(channels, 0.0);
  running_var.assign(channels, 1.0);
}

TensorPtr batch_norm1d(Tape* tape, const TensorPtr& x, BatchNormState& state, Mode mode) {
  const std::size_t n = x->rows(), c = x->cols();
  if (state.gamma->size() != c)
    throw DimensionError("batch_norm1d: channel count mismatch");
  auto out = Tensor::zeros(x->shape);
  const auto gamma = state.gamma;
  const auto beta = state.beta;

  if (mode == Mode::Eval) {
    if (!state.initialized)
      throw NumericError("batch_norm1d: eval mode before any training update");
    for (std::size_t ci = 0; ci < c; ++ci) {
      const double inv_std = 1.0 / std::sqrt(state.running_var[ci] + state.eps);
      for (std::size_t r = 0; r < n; ++r)
        out->at(r, ci) = (x->at(r, ci) - state.running_mean[ci]) * inv_std *
                             gamma->values[ci] + beta->values[ci];
    }
    check_finite(*out, "batch_norm1d");
    if (tracked(tape, {x, gamma, beta})) {
      track_output(out);
      std::vector<double> inv_stds(c);
      std::vector<double> mean = state.running_mean;
      for (std::size_t ci = 0; ci < c; ++ci)
        inv_stds[ci] = 1.0 / std::sqrt(state.running_var[ci] + state.eps);
      tape->record([x, gamma, beta, out, n, c, inv_stds, mean] {
        if (x->requires_grad) x->ensure_grad();
        if (gamma->requires_grad) gamma->ensure_grad();
        if (beta->requires_grad) beta->ensure_grad();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t ci = 0; ci < c; ++ci) {
            const double g = out->grad[r * c + ci];
            const double xhat = (x->values[r * c + ci] - mean[ci]) * inv_stds[ci];
            if (gamma->requires_grad) gamma->grad[ci] += g * xhat;
            if (beta->requires_grad) beta->grad[ci] += g;
            if (x->requires_grad)
              x->grad[r * c + ci] += g * gamma->values[ci] * inv_stds[ci];
          }
      });
    }
    return out;
  }

  if (n < 2) throw DimensionError("batch_norm1d: train mode needs at least 2 rows");
  std::vector<double> means(c, 0.0), vars(c, 0.0), inv_stds(c);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t ci = 0; ci < c; ++ci) means[ci] += x->at(r, ci);
  for (std::size_t ci = 0; ci < c; ++ci) means[ci] /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t ci = 0; ci < c; ++ci) {
      const double d = x->at(r, ci) - means[ci];
      vars[ci] += d * d;
    }
  for (std::size_t ci = 0; ci < c; ++ci) {
    vars[ci] /= static_cast<double>(n);
    inv_stds[ci] = 1.0 / std::sqrt(vars[ci] + state.eps);
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t ci = 0; ci < c; ++ci)
      out->at(r, ci) = (x->at(r, ci) - means[ci]) * inv_stds[ci] * gamma->values[ci] +
                       beta->values[ci];
  check_finite(*out, "batch_norm1d");

  const double m = state.momentum;
  for (std::size_t ci = 0; ci < c; ++ci) {
    if (!state.initialized) {
      state.running_mean[ci] = means[ci];
      state.running_var[ci] = vars[ci];
    } else {
      state.running_mean[ci] = (1.0 - m) * state.running_mean[ci] + m * means[ci];
      state.running_var[ci] = (1.0 - m) * state.running_var[ci] + m * vars[ci];
    }
  }
  state.initialized = true;

  if (tracked(tape, {x, gamma, beta})) {
    track_output(out);
    tape->record([x, gamma, beta, out, n, c, means, inv_stds] {
      const double dn = static_cast<double>(n);
      if (x->requires_grad) x->ensure_grad();
      if (gamma->requires_grad) gamma->ensure_grad();
      if (beta->requires_grad) beta->ensure_grad();
      for (std::size_t ci = 0; ci < c; ++ci) {
        double sum_g = 0.0, sum_g_xhat = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          const double g = out->grad[r * c + ci];
          const double xhat = (x->values[r * c + ci] - means[ci]) * inv_stds[ci];
          sum_g += g;
          sum_g_xhat += g * xhat;
          if (gamma->requires_grad) gamma->grad[ci] += g * xhat;
          if (beta->requires_grad) beta->grad[ci] += g;
        }
        if (x->requires_grad) {
          for (std::size_t r = 0; r < n; ++r) {
            const double g = out->grad[r * c + ci];
            const double xhat = (x->values[r * c + ci] - means[ci]) * inv_stds[ci];
            x->grad[r * c + ci] += gamma->values[ci] * inv_stds[ci] *
                                   (g - sum_g / dn - xhat * sum_g_xhat / dn);
          }
        }
      }
    });
  }
  return out;
}

TensorPtr dropout(Tape* tape, const TensorPtr& x, double rate, Mode mode,
                  std::mt19937_64& rng) {
  if (mode == Mode::Eval || rate <= 0.0) return x;
  if (rate >= 1.0) throw DimensionError("dropout: rate must be < 1");
  auto out = Tensor::zeros(x->shape);
  auto mask = std::make_shared<std::vector<double>>(x->size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double inv_keep = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < x->size(); ++i) {
    (*mask)[i] = u(rng) < rate ? 0.0 : inv_keep;
    out->values[i] = x->values[i] * (*mask)[i];
  }
  if (tracked(tape, {x})) {
    track_output(out);
    tape->record([x, out, mask] {
      x->ensure_grad();
      for (std::size_t i = 0; i < x->size(); ++i) x->grad[i] += (*mask)[i] * out->grad[i];
    });
  }
  return out;
}

TensorPtr concat_rows(Tape* tape, const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: empty input");
  const std::size_t c = parts[0]->cols();
  std::size_t total = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    if (p->cols() != c) throw DimensionError("concat_rows: column mismatch");
    total += p->rows();
    any_grad = any_grad || p->requires_grad;
  }
  auto out = Tensor::zeros({total, c});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->values.begin(), p->values.end(), out->values.begin() + off);
    off += p->size();
  }
  if (tape && any_grad) {
    track_output(out);
    tape->record([parts, out] {
      std::size_t off = 0;
      for (const auto& p : parts) {
        if (p->requires_grad) {
          p->ensure_grad();
          for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += out->grad[off + i];
        }
        off += p->size();
      }
    });
  }
  return out;
}

std::vector<TensorPtr> split_rows(Tape* tape, const TensorPtr& x,
                                  const std::vector<std::size_t>& row_counts) {
  const std::size_t c = x->cols();
  std::size_t total = 0;
  for (auto r : row_counts) total += r;
  if (total != x->rows()) throw DimensionError("split_rows: row counts do not sum to rows");
  std::vector<TensorPtr> outs;
  std::size_t off = 0;
  for (auto r : row_counts) {
    auto part = Tensor::zeros({r, c});
    std::copy(x->values.begin() + off, x->values.begin() + off + r * c,
              part->values.begin());
    if (tracked(tape, {x})) {
      track_output(part);
      const std::size_t local_off = off;
      tape->record([x, part, local_off] {
        x->ensure_grad();
        for (std::size_t i = 0; i < part->size(); ++i)
          x->grad[local_off + i] += part->grad[i];
      });
    }
    outs.push_back(part);
    off += r * c;
  }
  return outs;
}

TensorPtr concat_cols(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  const std::size_t t = a->rows();
  if (b->rows() != t) throw DimensionError("concat_cols: row mismatch");
  const std::size_t ca = a->cols(), cb = b->cols();
  auto out = Tensor::zeros({t, ca + cb});
  for (std::size_t r = 0; r < t; ++r) {
    std::copy_n(a->values.begin() + r * ca, ca, out->values.begin() + r * (ca + cb));
    std::copy_n(b->values.begin() + r * cb, cb, out->values.begin() + r * (ca + cb) + ca);
  }
  if (tracked(tape, {a, b})) {
    track_output(out);
    tape->record([a, b, out, t, ca, cb] {
      if (a->requires_grad) a->ensure_grad();
      if (b->requires_grad) b->ensure_grad();
      for (std::size_t r = 0; r < t; ++r) {
        for (std::size_t c = 0; c < ca; ++c)
          if (a->requires_grad) a->grad[r * ca + c] += out->grad[r * (ca + cb) + c];
        for (std::size_t c = 0; c < cb; ++c)
          if (b->requires_grad) b->grad[r * cb + c] += out->grad[r * (ca + cb) + ca + c];
      }
    });
  }
  return out;
}

TensorPtr slice_cols(Tape* tape, const TensorPtr& x, std::size_t begin, std::size_t end) {
  const std::size_t t = x->rows(), c = x->cols();
  if (begin >= end || end > c) throw DimensionError("slice_cols: bad range");
  const std::size_t w = end - begin;
  auto out = Tensor::zeros({t, w});
  for (std::size_t r = 0; r < t; ++r)
    std::copy_n(x->values.begin() + r * c + begin, w, out->values.begin() + r * w);
  if (tracked(tape, {x})) {
    track_output(out);
    tape->record([x, out, t, c, w, begin] {
      x->ensure_grad();
      for (std::size_t r = 0; r < t; ++r)
        for (std::size_t i = 0; i < w; ++i)
          x->grad[r * c + begin + i] += out->grad[r * w + i];
    });
  }
  return out;
}

TensorPtr upsample_repeat_rows(Tape* tape, const TensorPtr& x, std::size_t t_out) {
  const std::size_t t_in = x->rows(), c = x->cols();
  if (t_in == 0) throw DimensionError("upsample_repeat_rows: empty input");
  auto out = Tensor::zeros({t_out, c});
  std::vector<std::size_t> src(t_out);
  for (std::size_t r = 0; r < t_out; ++r) {
    src[r] = std::min(r / 2, t_in - 1);
    std::copy_n(x->values.begin() + src[r] * c, c, out->values.begin() + r * c);
  }
  if (tracked(tape, {x})) {
    track_output(out);
    tape->record([x, out, src, c, t_out] {
      x->ensure_grad();
      for (std::size_t r = 0; r < t_out; ++r)
        for (std::size_t ci = 0; ci < c; ++ci)
          x->grad[src[r] * c + ci] += out->grad[r * c + ci];
    });
  }
  return out;
}

double sum_all(const TensorPtr& x) {
  double s = 0.0;
  for (double v : x->values) s += v;
  return s;
}

void seed_sum_grad(const TensorPtr& x) {
  x->ensure_grad();
  for (auto& g : x->grad) g += 1.0;
}

}  // namespace cslr
