#pragma once

#include "gollic/kernels_ref.hpp"

namespace gollic::kernels {

enum class Isa { Scalar, Avx2 };

// Implementation selected at startup (cpuid probe, overridable with
// GOLLIC_KERNELS=scalar|avx2). All variants of a kernel are bit-equivalent.
Isa active_isa();
void set_isa(Isa isa);

void conv2d_forward(const float* in, const float* w, const float* bias, float* out,
                    const ConvDims& d);
void relu(const float* x, float* y, int64_t n);
void mixture_cdf(const float* pi, const float* mu, const float* inv_s, int ncomp,
                 const float* edges, int nedges, float* out);

// AVX2 entry points, defined only when compiled in; used by dispatch and by
// the equivalence tests.
#if defined(__x86_64__) || defined(_M_X64)
void conv2d_forward_avx2(const float* in, const float* w, const float* bias, float* out,
                         const ConvDims& d);
void relu_avx2(const float* x, float* y, int64_t n);
void mixture_cdf_avx2(const float* pi, const float* mu, const float* inv_s, int ncomp,
                      const float* edges, int nedges, float* out);
#endif

}  // namespace gollic::kernels
