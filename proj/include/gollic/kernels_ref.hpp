#pragma once

#include <cmath>
#include <cstdint>

namespace gollic::kernels {

struct ConvDims {
  int64_t batch, cin, h, w;
  int64_t cout, ksize, stride, pad;
  int64_t oh, ow;

  static ConvDims make(int64_t batch, int64_t cin, int64_t h, int64_t w, int64_t cout,
                       int64_t ksize, int64_t stride, int64_t pad) {
    ConvDims d{batch, cin, h, w, cout, ksize, stride, pad, 0, 0};
    d.oh = (h + 2 * pad - ksize) / stride + 1;
    d.ow = (w + 2 * pad - ksize) / stride + 1;
    return d;
  }
};

// Reference cross-correlation. Accumulation order is fixed (ci, ky, kx) per
// output element, seeded with the bias; every other implementation of this
// kernel must reproduce these bits exactly.
template <typename T>
void conv2d_forward_ref(const T* in, const T* w, const T* bias, T* out, const ConvDims& d) {
  for (int64_t b = 0; b < d.batch; ++b) {
    for (int64_t co = 0; co < d.cout; ++co) {
      for (int64_t oy = 0; oy < d.oh; ++oy) {
        for (int64_t ox = 0; ox < d.ow; ++ox) {
          T acc = bias ? bias[co] : T(0);
          for (int64_t ci = 0; ci < d.cin; ++ci) {
            const T* in_c = in + ((b * d.cin + ci) * d.h) * d.w;
            const T* w_c = w + ((co * d.cin + ci) * d.ksize) * d.ksize;
            for (int64_t ky = 0; ky < d.ksize; ++ky) {
              int64_t iy = oy * d.stride - d.pad + ky;
              if (iy < 0 || iy >= d.h) continue;
              for (int64_t kx = 0; kx < d.ksize; ++kx) {
                int64_t ix = ox * d.stride - d.pad + kx;
                if (ix < 0 || ix >= d.w) continue;
                acc += in_c[iy * d.w + ix] * w_c[ky * d.ksize + kx];
              }
            }
          }
          out[((b * d.cout + co) * d.oh + oy) * d.ow + ox] = acc;
        }
      }
    }
  }
}

// Gradients w.r.t. input, weight and bias. dout has shape [batch,cout,oh,ow].
// Accumulates into pre-zeroed din/dw/db with a fixed visit order.
template <typename T>
void conv2d_backward_ref(const T* in, const T* w, const T* dout, T* din, T* dw, T* db,
                         const ConvDims& d) {
  for (int64_t b = 0; b < d.batch; ++b) {
    for (int64_t co = 0; co < d.cout; ++co) {
      for (int64_t oy = 0; oy < d.oh; ++oy) {
        for (int64_t ox = 0; ox < d.ow; ++ox) {
          T g = dout[((b * d.cout + co) * d.oh + oy) * d.ow + ox];
          if (db) db[co] += g;
          for (int64_t ci = 0; ci < d.cin; ++ci) {
            const T* in_c = in + ((b * d.cin + ci) * d.h) * d.w;
            T* din_c = din ? din + ((b * d.cin + ci) * d.h) * d.w : nullptr;
            const T* w_c = w + ((co * d.cin + ci) * d.ksize) * d.ksize;
            T* dw_c = dw ? dw + ((co * d.cin + ci) * d.ksize) * d.ksize : nullptr;
            for (int64_t ky = 0; ky < d.ksize; ++ky) {
              int64_t iy = oy * d.stride - d.pad + ky;
              if (iy < 0 || iy >= d.h) continue;
              for (int64_t kx = 0; kx < d.ksize; ++kx) {
                int64_t ix = ox * d.stride - d.pad + kx;
                if (ix < 0 || ix >= d.w) continue;
                if (dw_c) dw_c[ky * d.ksize + kx] += g * in_c[iy * d.w + ix];
                if (din_c) din_c[iy * d.w + ix] += g * w_c[ky * d.ksize + kx];
              }
            }
          }
        }
      }
    }
  }
}

namespace detail {

// exp approximation over clamped range, written so that a lane-parallel SIMD
// version performing the same operation sequence yields identical bits.
inline float fast_exp(float x) {
  if (x > 87.0f) x = 87.0f;
  if (x < -87.0f) x = -87.0f;
  float t = x * 1.442695040f;  // log2(e)
  float n = std::rint(t);      // round to nearest even, matches SIMD rounding
  float f = t - n;
  // 2^f on [-0.5, 0.5], degree-5 minimax-style polynomial
  float p = 1.8775767e-3f;
  p = p * f + 8.9893397e-3f;
  p = p * f + 5.5826318e-2f;
  p = p * f + 2.4015361e-1f;
  p = p * f + 6.9315308e-1f;
  p = p * f + 9.9999994e-1f;
  int32_t e = static_cast<int32_t>(n) + 127;
  float scale;
  uint32_t bits = static_cast<uint32_t>(e) << 23;
  __builtin_memcpy(&scale, &bits, 4);
  return p * scale;
}

inline float fast_sigmoid(float x) { return 1.0f / (1.0f + fast_exp(-x)); }

}  // namespace detail

// out[j] = sum_k pi[k] * sigmoid((edges[j] - mu[k]) * inv_s[k]); used when
// turning mixture parameters into CDF tables. Accumulation over k in order.
inline void mixture_cdf_ref(const float* pi, const float* mu, const float* inv_s, int ncomp,
                            const float* edges, int nedges, float* out) {
  for (int j = 0; j < nedges; ++j) {
    float acc = 0.0f;
    for (int k = 0; k < ncomp; ++k) {
      float z = (edges[j] - mu[k]) * inv_s[k];
      acc += pi[k] * detail::fast_sigmoid(z);
    }
    out[j] = acc;
  }
}

inline void relu_ref(const float* x, float* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

}  // namespace gollic::kernels
