#include <immintrin.h>

#include "gollic/kernels.hpp"

// Lane-parallel variants. Each output element sees the same operation
// sequence as the scalar reference, so results are bit-identical.

namespace gollic::kernels {

namespace {

inline __m256 exp8(__m256 x) {
  x = _mm256_min_ps(x, _mm256_set1_ps(87.0f));
  x = _mm256_max_ps(x, _mm256_set1_ps(-87.0f));
  __m256 t = _mm256_mul_ps(x, _mm256_set1_ps(1.442695040f));
  __m256 n = _mm256_round_ps(t, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256 f = _mm256_sub_ps(t, n);
  __m256 p = _mm256_set1_ps(1.8775767e-3f);
  p = _mm256_add_ps(_mm256_mul_ps(p, f), _mm256_set1_ps(8.9893397e-3f));
  p = _mm256_add_ps(_mm256_mul_ps(p, f), _mm256_set1_ps(5.5826318e-2f));
  p = _mm256_add_ps(_mm256_mul_ps(p, f), _mm256_set1_ps(2.4015361e-1f));
  p = _mm256_add_ps(_mm256_mul_ps(p, f), _mm256_set1_ps(6.9315308e-1f));
  p = _mm256_add_ps(_mm256_mul_ps(p, f), _mm256_set1_ps(9.9999994e-1f));
  __m256i e = _mm256_add_epi32(_mm256_cvtps_epi32(n), _mm256_set1_epi32(127));
  __m256 scale = _mm256_castsi256_ps(_mm256_slli_epi32(e, 23));
  return _mm256_mul_ps(p, scale);
}

inline __m256 sigmoid8(__m256 x) {
  __m256 one = _mm256_set1_ps(1.0f);
  __m256 e = exp8(_mm256_sub_ps(_mm256_setzero_ps(), x));
  return _mm256_div_ps(one, _mm256_add_ps(one, e));
}

// Scalar tail path; identical accumulation order to the reference kernel.
inline float conv_point(const float* in, const float* w, float bias, const ConvDims& d,
                        int64_t b, int64_t co, int64_t oy, int64_t ox) {
  float acc = bias;
  for (int64_t ci = 0; ci < d.cin; ++ci) {
    const float* in_c = in + ((b * d.cin + ci) * d.h) * d.w;
    const float* w_c = w + ((co * d.cin + ci) * d.ksize) * d.ksize;
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
  return acc;
}

}  // namespace

void conv2d_forward_avx2(const float* in, const float* w, const float* bias, float* out,
                         const ConvDims& d) {
  if (d.stride != 1) {
    conv2d_forward_ref<float>(in, w, bias, out, d);
    return;
  }
  // Interior columns where every kx tap is in bounds.
  int64_t ox_lo = d.pad;
  int64_t ox_hi = d.w - d.ksize + d.pad;  // inclusive
  for (int64_t b = 0; b < d.batch; ++b) {
    for (int64_t co = 0; co < d.cout; ++co) {
      float bv = bias ? bias[co] : 0.0f;
      for (int64_t oy = 0; oy < d.oh; ++oy) {
        float* out_row = out + ((b * d.cout + co) * d.oh + oy) * d.ow;
        int64_t ox = 0;
        for (; ox < ox_lo && ox < d.ow; ++ox)
          out_row[ox] = conv_point(in, w, bv, d, b, co, oy, ox);
        for (; ox + 7 <= ox_hi && ox + 8 <= d.ow; ox += 8) {
          __m256 acc = _mm256_set1_ps(bv);
          for (int64_t ci = 0; ci < d.cin; ++ci) {
            const float* in_c = in + ((b * d.cin + ci) * d.h) * d.w;
            const float* w_c = w + ((co * d.cin + ci) * d.ksize) * d.ksize;
            for (int64_t ky = 0; ky < d.ksize; ++ky) {
              int64_t iy = oy - d.pad + ky;
              if (iy < 0 || iy >= d.h) continue;
              const float* in_row = in_c + iy * d.w + ox - d.pad;
              for (int64_t kx = 0; kx < d.ksize; ++kx) {
                __m256 iv = _mm256_loadu_ps(in_row + kx);
                __m256 wv = _mm256_set1_ps(w_c[ky * d.ksize + kx]);
                acc = _mm256_add_ps(acc, _mm256_mul_ps(iv, wv));
              }
            }
          }
          _mm256_storeu_ps(out_row + ox, acc);
        }
        for (; ox < d.ow; ++ox) out_row[ox] = conv_point(in, w, bv, d, b, co, oy, ox);
      }
    }
  }
}

void relu_avx2(const float* x, float* y, int64_t n) {
  int64_t i = 0;
  __m256 zero = _mm256_setzero_ps();
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void mixture_cdf_avx2(const float* pi, const float* mu, const float* inv_s, int ncomp,
                      const float* edges, int nedges, float* out) {
  int j = 0;
  for (; j + 8 <= nedges; j += 8) {
    __m256 ev = _mm256_loadu_ps(edges + j);
    __m256 acc = _mm256_setzero_ps();
    for (int k = 0; k < ncomp; ++k) {
      __m256 z = _mm256_mul_ps(_mm256_sub_ps(ev, _mm256_set1_ps(mu[k])), _mm256_set1_ps(inv_s[k]));
      acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_set1_ps(pi[k]), sigmoid8(z)));
    }
    _mm256_storeu_ps(out + j, acc);
  }
  if (j < nedges) mixture_cdf_ref(pi, mu, inv_s, ncomp, edges + j, nedges - j, out + j);
}

}  // namespace gollic::kernels
