#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "canfuse/detail/linalg.hpp"
#include "canfuse/error.hpp"
#include "canfuse/rng.hpp"
#include "canfuse/tensor.hpp"

namespace canfuse {

// --------------------------------------------------------------------------
// dense layer
// --------------------------------------------------------------------------

// out_j = sum_i W[j,i] x_i + b_j with W shaped [n_out x n_in]
inline Tensor dense_forward(const Tensor& x, const Tensor& W, const Tensor& b) {
  if (W.shape.size() != 2 || x.shape.size() != 1 || b.shape.size() != 1 ||
      W.shape[1] != x.shape[0] || W.shape[0] != b.shape[0]) {
    fail(errc::shape_mismatch, "dense_forward: W " + shape_string(W) + ", x " +
                                   shape_string(x) + ", b " + shape_string(b));
  }
  const std::size_t n_out = W.shape[0];
  const std::size_t n_in = W.shape[1];
  Tensor out = Tensor::zeros({n_out});
  for (std::size_t j = 0; j < n_out; ++j) {
    const double* w = W.data.data() + j * n_in;
    double s = b.data[j];
    for (std::size_t i = 0; i < n_in; ++i) s += w[i] * x.data[i];
    out.data[j] = s;
  }
  return out;
}

// Accumulates dW += dy (x) x, db += dy and writes dx = W^T dy.
inline void dense_backward(const Tensor& x, const Tensor& W, const Tensor& dy,
                           Tensor& dx, Tensor& dW, Tensor& db) {
  const std::size_t n_out = W.shape[0];
  const std::size_t n_in = W.shape[1];
  if (dy.numel() != n_out || x.numel() != n_in) {
    fail(errc::shape_mismatch, "dense_backward: gradient shape mismatch");
  }
  dx = Tensor::zeros({n_in});
  for (std::size_t j = 0; j < n_out; ++j) {
    const double g = dy.data[j];
    db.data[j] += g;
    double* dw = dW.data.data() + j * n_in;
    const double* w = W.data.data() + j * n_in;
    for (std::size_t i = 0; i < n_in; ++i) {
      dw[i] += g * x.data[i];
      dx.data[i] += g * w[i];
    }
  }
}

// --------------------------------------------------------------------------
// 2-D convolution (valid padding, cross-correlation)
// --------------------------------------------------------------------------

struct ConvShape {
  std::size_t in_h, in_w, in_c;
  std::size_t out_c, kh, kw;
  std::size_t stride;
  std::size_t out_h, out_w;
  std::size_t patch;      // kh * kw * in_c
  std::size_t positions;  // out_h * out_w
};

inline ConvShape conv_shape(const Tensor& x, const Tensor& k, const Tensor& b,
                            std::size_t stride) {
  if (x.shape.size() != 3 || k.shape.size() != 4 || b.shape.size() != 1) {
    fail(errc::shape_mismatch, "conv2d: x must be [h,w,c], k [co,kh,kw,ci], b [co]");
  }
  if (stride == 0) fail(errc::invalid_argument, "conv2d: stride must be >= 1");
  ConvShape s{};
  s.in_h = x.shape[0];
  s.in_w = x.shape[1];
  s.in_c = x.shape[2];
  s.out_c = k.shape[0];
  s.kh = k.shape[1];
  s.kw = k.shape[2];
  s.stride = stride;
  if (k.shape[3] != s.in_c) {
    fail(errc::shape_mismatch, "conv2d: kernel channels " + std::to_string(k.shape[3]) +
                                   " vs input channels " + std::to_string(s.in_c));
  }
  if (b.shape[0] != s.out_c) fail(errc::shape_mismatch, "conv2d: bias size mismatch");
  if (s.kh > s.in_h || s.kw > s.in_w) {
    fail(errc::kernel_larger_than_input,
         "conv2d: kernel " + std::to_string(s.kh) + "x" + std::to_string(s.kw) +
             " exceeds input " + std::to_string(s.in_h) + "x" + std::to_string(s.in_w));
  }
  s.out_h = (s.in_h - s.kh) / stride + 1;
  s.out_w = (s.in_w - s.kw) / stride + 1;
  s.patch = s.kh * s.kw * s.in_c;
  s.positions = s.out_h * s.out_w;
  return s;
}

// Reusable buffers so a training loop does not reallocate per sample.
struct ConvWorkspace {
  std::vector<double> xrow;  // [positions x patch], (ky,kx,ci) within a row
  std::vector<double> wt;    // [patch x out_c], kernel transposed
};

namespace detail {

inline void im2row(const Tensor& x, const ConvShape& s, std::vector<double>& xrow) {
  xrow.resize(s.positions * s.patch);
  const double* src = x.data.data();
  double* dst = xrow.data();
  const std::size_t row_bytes = s.kw * s.in_c;
  for (std::size_t oy = 0; oy < s.out_h; ++oy) {
    for (std::size_t ox = 0; ox < s.out_w; ++ox) {
      const std::size_t iy = oy * s.stride;
      const std::size_t ix = ox * s.stride;
      for (std::size_t ky = 0; ky < s.kh; ++ky) {
        const double* line = src + ((iy + ky) * s.in_w + ix) * s.in_c;
        for (std::size_t q = 0; q < row_bytes; ++q) dst[q] = line[q];
        dst += row_bytes;
      }
    }
  }
}

// scatter-add of a [positions x patch] gradient back onto the input grid
inline void row2im_add(const std::vector<double>& dxrow, const ConvShape& s, Tensor& dx) {
  const std::size_t row_bytes = s.kw * s.in_c;
  const double* src = dxrow.data();
  double* dst = dx.data.data();
  for (std::size_t oy = 0; oy < s.out_h; ++oy) {
    for (std::size_t ox = 0; ox < s.out_w; ++ox) {
      const std::size_t iy = oy * s.stride;
      const std::size_t ix = ox * s.stride;
      for (std::size_t ky = 0; ky < s.kh; ++ky) {
        double* line = dst + ((iy + ky) * s.in_w + ix) * s.in_c;
        for (std::size_t q = 0; q < row_bytes; ++q) line[q] += src[q];
        src += row_bytes;
      }
    }
  }
}

}  // namespace detail

// y[oy,ox,co] = b[co] + sum_{ky,kx,ci} k[co,ky,kx,ci] x[oy*s+ky, ox*s+kx, ci]
// Computed as (im2row x) * k^T so the inner loops are dense row operations.
inline Tensor conv2d_forward(const Tensor& x, const Tensor& k, const Tensor& b,
                             std::size_t stride, ConvWorkspace& ws) {
  const ConvShape s = conv_shape(x, k, b, stride);
  detail::im2row(x, s, ws.xrow);

  ws.wt.resize(s.patch * s.out_c);
  for (std::size_t co = 0; co < s.out_c; ++co) {
    const double* krow = k.data.data() + co * s.patch;
    for (std::size_t r = 0; r < s.patch; ++r) ws.wt[r * s.out_c + co] = krow[r];
  }

  Tensor out = Tensor::zeros({s.out_h, s.out_w, s.out_c});
  for (std::size_t p = 0; p < s.positions; ++p) {
    double* row = out.data.data() + p * s.out_c;
    for (std::size_t co = 0; co < s.out_c; ++co) row[co] = b.data[co];
  }
  detail::gemm_nn(s.positions, s.out_c, s.patch, ws.xrow.data(), ws.wt.data(),
                  out.data.data());
  return out;
}

inline Tensor conv2d_forward(const Tensor& x, const Tensor& k, const Tensor& b,
                             std::size_t stride) {
  ConvWorkspace ws;
  return conv2d_forward(x, k, b, stride, ws);
}

// Accumulates dk += dL/dk and db += dL/db; writes dx when requested.
// Reuses ws.xrow from the matching forward call when xrow_valid is set.
inline void conv2d_backward(const Tensor& x, const Tensor& k, std::size_t stride,
                            const Tensor& dy, Tensor* dx, Tensor& dk, Tensor& db,
                            ConvWorkspace& ws, bool xrow_valid = false) {
  const Tensor b_probe = Tensor::zeros({k.shape[0]});
  const ConvShape s = conv_shape(x, k, b_probe, stride);
  if (dy.shape != std::vector<std::size_t>{s.out_h, s.out_w, s.out_c}) {
    fail(errc::shape_mismatch, "conv2d_backward: dy shape " + shape_string(dy));
  }
  if (!xrow_valid) detail::im2row(x, s, ws.xrow);

  // db
  for (std::size_t p = 0; p < s.positions; ++p) {
    const double* row = dy.data.data() + p * s.out_c;
    for (std::size_t co = 0; co < s.out_c; ++co) db.data[co] += row[co];
  }

  // dWt[r][co] = sum_p xrow[p][r] dy[p][co], then scatter into [co][r]
  thread_local std::vector<double> dwt;
  dwt.assign(s.patch * s.out_c, 0.0);
  detail::gemm_tn(s.patch, s.out_c, s.positions, ws.xrow.data(), dy.data.data(),
                  dwt.data());
  for (std::size_t co = 0; co < s.out_c; ++co) {
    double* krow = dk.data.data() + co * s.patch;
    for (std::size_t r = 0; r < s.patch; ++r) krow[r] += dwt[r * s.out_c + co];
  }

  if (dx != nullptr) {
    // dxrow[p][r] = sum_co dy[p][co] k[co][r]; kernel data is already [co][r]
    thread_local std::vector<double> dxrow;
    dxrow.assign(s.positions * s.patch, 0.0);
    detail::gemm_nn(s.positions, s.patch, s.out_c, dy.data.data(), k.data.data(),
                    dxrow.data());
    *dx = Tensor::zeros({s.in_h, s.in_w, s.in_c});
    detail::row2im_add(dxrow, s, *dx);
  }
}

// --------------------------------------------------------------------------
// activation
// --------------------------------------------------------------------------

inline Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

// dx = dy where the forward input was positive, 0 elsewhere
inline Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  require_same_shape(x, dy, "relu_backward");
  Tensor dx = dy;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    if (x.data[i] <= 0.0) dx.data[i] = 0.0;
  }
  return dx;
}

// --------------------------------------------------------------------------
// metrics
// --------------------------------------------------------------------------

inline double mse(const Tensor& pred, const Tensor& target) {
  if (pred.numel() == 0) fail(errc::empty_input, "mse: empty input");
  require_same_shape(pred, target, "mse");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.numel());
}

inline double rmse(const Tensor& pred, const Tensor& target) {
  return std::sqrt(mse(pred, target));
}

// --------------------------------------------------------------------------
// Adam
// --------------------------------------------------------------------------

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t t = 0;
  std::vector<Tensor> m;  // first moments, shaped like the parameters
  std::vector<Tensor> v;  // second moments

  static AdamState init(std::span<const Tensor* const> params, double lr = 1e-4) {
    AdamState s;
    s.lr = lr;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Tensor* p : params) {
      s.m.push_back(Tensor::zeros(p->shape));
      s.v.push_back(Tensor::zeros(p->shape));
    }
    return s;
  }
};

// One bias-corrected Adam update, t incremented first.
inline void adam_step(std::span<Tensor* const> params, const std::vector<Tensor>& grads,
                      AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    fail(errc::shape_mismatch, "adam_step: parameter/gradient/state count mismatch");
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    require_same_shape(p, g, "adam_step");
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t j = 0; j < p.data.size(); ++j) {
      const double gj = g.data[j];
      m.data[j] = state.beta1 * m.data[j] + (1.0 - state.beta1) * gj;
      v.data[j] = state.beta2 * v.data[j] + (1.0 - state.beta2) * gj * gj;
      const double m_hat = m.data[j] / c1;
      const double v_hat = v.data[j] / c2;
      p.data[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

// --------------------------------------------------------------------------
// gradient verification
// --------------------------------------------------------------------------

struct GradCheckReport {
  bool pass = false;
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
};

// Central-difference check of analytic gradients. loss_fn must evaluate the
// loss at the parameters' current values. entries_per_tensor == 0 checks
// every coordinate; otherwise a seeded sample per tensor is checked, which
// keeps the check tractable for large models.
inline GradCheckReport grad_check(std::span<Tensor* const> params,
                                  const std::vector<Tensor>& analytic,
                                  const std::function<double()>& loss_fn, double h,
                                  double rtol, std::size_t entries_per_tensor = 0,
                                  std::uint64_t seed = 0) {
  if (h <= 0.0) fail(errc::invalid_argument, "grad_check: h must be > 0");
  if (params.size() != analytic.size()) {
    fail(errc::shape_mismatch, "grad_check: analytic gradient count mismatch");
  }
  GradCheckReport report;
  Rng rng(seed, "grad_check");
  for (std::size_t ti = 0; ti < params.size(); ++ti) {
    Tensor& p = *params[ti];
    const Tensor& g = analytic[ti];
    require_same_shape(p, g, "grad_check");

    std::vector<std::size_t> indices;
    if (entries_per_tensor == 0 || entries_per_tensor >= p.numel()) {
      indices.resize(p.numel());
      for (std::size_t j = 0; j < p.numel(); ++j) indices[j] = j;
    } else {
      indices.reserve(entries_per_tensor);
      indices.push_back(0);
      indices.push_back(p.numel() - 1);
      while (indices.size() < entries_per_tensor) {
        indices.push_back(rng.below(p.numel()));
      }
    }

    for (const std::size_t j : indices) {
      const double saved = p.data[j];
      p.data[j] = saved + h;
      const double up = loss_fn();
      p.data[j] = saved - h;
      const double down = loss_fn();
      p.data[j] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom =
          std::max({std::abs(g.data[j]), std::abs(numeric), 1e-8});
      const double rel = std::abs(g.data[j] - numeric) / denom;
      ++report.entries_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_tensor = ti;
        report.worst_index = j;
      }
    }
  }
  report.pass = report.max_rel_error <= rtol;
  return report;
}

}  // namespace canfuse
