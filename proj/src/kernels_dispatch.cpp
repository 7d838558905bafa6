#include <cstdlib>
#include <cstring>

#include "gollic/kernels.hpp"

namespace gollic::kernels {

void conv2d_forward_scalar(const float* in, const float* w, const float* bias, float* out,
                           const ConvDims& d);
void relu_scalar(const float* x, float* y, int64_t n);
void mixture_cdf_scalar(const float* pi, const float* mu, const float* inv_s, int ncomp,
                        const float* edges, int nedges, float* out);

namespace {

Isa detect() {
  if (const char* env = std::getenv("GOLLIC_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::Scalar;
    if (std::strcmp(env, "avx2") == 0) return Isa::Avx2;
  }
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2")) return Isa::Avx2;
#endif
  return Isa::Scalar;
}

Isa g_isa = detect();

}  // namespace

Isa active_isa() { return g_isa; }
void set_isa(Isa isa) { g_isa = isa; }

void conv2d_forward(const float* in, const float* w, const float* bias, float* out,
                    const ConvDims& d) {
#if defined(__x86_64__) || defined(_M_X64)
  if (g_isa == Isa::Avx2) {
    conv2d_forward_avx2(in, w, bias, out, d);
    return;
  }
#endif
  conv2d_forward_scalar(in, w, bias, out, d);
}

void relu(const float* x, float* y, int64_t n) {
#if defined(__x86_64__) || defined(_M_X64)
  if (g_isa == Isa::Avx2) {
    relu_avx2(x, y, n);
    return;
  }
#endif
  relu_scalar(x, y, n);
}

void mixture_cdf(const float* pi, const float* mu, const float* inv_s, int ncomp,
                 const float* edges, int nedges, float* out) {
#if defined(__x86_64__) || defined(_M_X64)
  if (g_isa == Isa::Avx2) {
    mixture_cdf_avx2(pi, mu, inv_s, ncomp, edges, nedges, out);
    return;
  }
#endif
  mixture_cdf_scalar(pi, mu, inv_s, ncomp, edges, nedges, out);
}

}  // namespace gollic::kernels
