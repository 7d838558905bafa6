#include "gollic/kernels.hpp"

namespace gollic::kernels {

void conv2d_forward_scalar(const float* in, const float* w, const float* bias, float* out,
                           const ConvDims& d) {
  conv2d_forward_ref<float>(in, w, bias, out, d);
}

void relu_scalar(const float* x, float* y, int64_t n) { relu_ref(x, y, n); }

void mixture_cdf_scalar(const float* pi, const float* mu, const float* inv_s, int ncomp,
                        const float* edges, int nedges, float* out) {
  mixture_cdf_ref(pi, mu, inv_s, ncomp, edges, nedges, out);
}

}  // namespace gollic::kernels
