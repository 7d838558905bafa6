#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "gollic/kernels.hpp"
#include "gollic/rng.hpp"

using namespace gollic;
using kernels::ConvDims;

namespace {

std::vector<float> random_vec(Rng& rng, size_t n, double lo = -2.0, double hi = 2.0) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

}  // namespace

TEST_CASE("conv2d scalar and avx2 are bitwise equal") {
  Rng rng(11);
  struct Shape {
    int64_t b, cin, h, w, cout, k, stride, pad;
  };
  // mixes interior widths below/above one SIMD block, plus stride-2 cases
  std::vector<Shape> shapes = {
      {1, 1, 4, 4, 1, 1, 1, 0},  {1, 3, 16, 16, 8, 3, 1, 1}, {2, 4, 9, 13, 5, 3, 1, 1},
      {1, 2, 7, 7, 3, 5, 1, 2},  {1, 4, 20, 33, 6, 3, 1, 1}, {1, 3, 16, 16, 4, 5, 2, 2},
      {2, 2, 12, 18, 3, 5, 2, 2}};
  for (const auto& s : shapes) {
    CAPTURE(s.h);
    CAPTURE(s.w);
    CAPTURE(s.stride);
    auto d = ConvDims::make(s.b, s.cin, s.h, s.w, s.cout, s.k, s.stride, s.pad);
    auto in = random_vec(rng, static_cast<size_t>(s.b * s.cin * s.h * s.w));
    auto wt = random_vec(rng, static_cast<size_t>(s.cout * s.cin * s.k * s.k));
    auto bias = random_vec(rng, static_cast<size_t>(s.cout));
    std::vector<float> ref(static_cast<size_t>(s.b * s.cout * d.oh * d.ow)), simd(ref.size());
    kernels::conv2d_forward_ref<float>(in.data(), wt.data(), bias.data(), ref.data(), d);
    kernels::conv2d_forward_avx2(in.data(), wt.data(), bias.data(), simd.data(), d);
    CHECK(std::memcmp(ref.data(), simd.data(), ref.size() * 4) == 0);
  }
}

TEST_CASE("relu scalar and avx2 are bitwise equal") {
  Rng rng(12);
  for (size_t n : {1u, 7u, 8u, 9u, 64u, 1001u}) {
    auto x = random_vec(rng, n, -3.0, 3.0);
    std::vector<float> a(n), b(n);
    kernels::relu_ref(x.data(), a.data(), static_cast<int64_t>(n));
    kernels::relu_avx2(x.data(), b.data(), static_cast<int64_t>(n));
    CHECK(std::memcmp(a.data(), b.data(), n * 4) == 0);
  }
}

TEST_CASE("mixture_cdf scalar and avx2 are bitwise equal") {
  Rng rng(13);
  for (int ncomp : {1, 3, 10}) {
    for (int nedges : {1, 8, 24, 255}) {
      auto pi = random_vec(rng, static_cast<size_t>(ncomp), 0.01, 1.0);
      auto mu = random_vec(rng, static_cast<size_t>(ncomp), -1.0, 1.0);
      auto invs = random_vec(rng, static_cast<size_t>(ncomp), 0.5, 50.0);
      std::vector<float> edges(static_cast<size_t>(nedges));
      for (int j = 0; j < nedges; ++j)
        edges[static_cast<size_t>(j)] = -1.0f + 2.0f * (j + 0.5f) / nedges;
      std::vector<float> a(edges.size()), b(edges.size());
      kernels::mixture_cdf_ref(pi.data(), mu.data(), invs.data(), ncomp, edges.data(), nedges,
                               a.data());
      kernels::mixture_cdf_avx2(pi.data(), mu.data(), invs.data(), ncomp, edges.data(), nedges,
                                b.data());
      CHECK(std::memcmp(a.data(), b.data(), a.size() * 4) == 0);
    }
  }
}

TEST_CASE("fast_exp tracks std::exp") {
  // the degree-5 polynomial is good to ~2e-4 relative; plenty for CDF tables
  // that are quantized to 1/65536 anyway
  for (double x = -30.0; x <= 30.0; x += 0.0137) {
    float xf = static_cast<float>(x);
    float approx = kernels::detail::fast_exp(xf);
    double exact = std::exp(static_cast<double>(xf));
    CHECK(std::abs(approx - exact) <= 5e-4 * exact + 1e-30);
  }
  // clamp region must stay finite
  CHECK(std::isfinite(kernels::detail::fast_exp(1000.0f)));
  CHECK(kernels::detail::fast_exp(-1000.0f) >= 0.0f);
}

TEST_CASE("dispatched kernels honor set_isa") {
  Rng rng(14);
  auto x = random_vec(rng, 33);
  std::vector<float> a(x.size()), b(x.size());
  kernels::Isa saved = kernels::active_isa();
  kernels::set_isa(kernels::Isa::Scalar);
  kernels::relu(x.data(), a.data(), static_cast<int64_t>(x.size()));
  kernels::set_isa(kernels::Isa::Avx2);
  kernels::relu(x.data(), b.data(), static_cast<int64_t>(x.size()));
  kernels::set_isa(saved);
  CHECK(std::memcmp(a.data(), b.data(), a.size() * 4) == 0);
}
