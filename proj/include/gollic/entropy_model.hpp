#pragma once

#include <cstdint>
#include <vector>

#include "gollic/autodiff.hpp"
#include "gollic/tensor.hpp"

namespace gollic {

// Both alphabets are uniform grids on [-1,1]: 256 integer residual symbols
// mapped through x/127.5 - 1, and the 25-level latent grid. Bin half-width
// is step/2 with open outermost bins.
struct Alphabet {
  int count;
  double step() const { return 2.0 / (count - 1); }
  double value(int sym) const { return -1.0 + step() * sym; }
  double half() const { return step() * 0.5; }
};

inline constexpr double kDlmScaleMin = 1e-7;
inline constexpr double kDlmProbFloor = 1e-12;

// Parameter block layout inside a DLM head output tensor [B, PC, H, W].
//   latent model  (per channel c, no sharing):  PC = 3*C*K
//     c*3K .. +K logits | +K means | +K log-scales
//   residual model (logits shared over the 3 color channels): PC = 10*K
//     0..K logits | per channel c: K + c*3K .. +K means | +K log-scales | +K coeffs
struct DlmLayout {
  int mixtures;
  bool channel_cond;

  int param_channels(int target_channels) const {
    return channel_cond ? mixtures + target_channels * 3 * mixtures
                        : target_channels * 3 * mixtures;
  }
  int64_t logits_off(int c) const { return channel_cond ? 0 : int64_t(c) * 3 * mixtures; }
  int64_t mu_off(int c) const {
    return channel_cond ? mixtures + int64_t(c) * 3 * mixtures : int64_t(c) * 3 * mixtures + mixtures;
  }
  int64_t lam_off(int c) const { return mu_off(c) + mixtures; }
  int64_t coeff_off(int c) const { return lam_off(c) + mixtures; }  // channel_cond only
};

namespace dlm_detail {

struct Work {
  std::vector<double> pi, mup, s, zlo, zhi, slo, shi, pk;
  void resize(int k) {
    pi.resize(k); mup.resize(k); s.resize(k); zlo.resize(k);
    zhi.resize(k); slo.resize(k); shi.resize(k); pk.resize(k);
  }
};

// Mixture probability of one symbol at one position; fills `wk` with the
// per-component intermediates the backward pass reuses. Computed in double
// regardless of the graph precision: the residual bins are only 1/255 wide,
// so the sigmoid difference cancels catastrophically in float.
template <typename T>
double eval_point(const T* pdat, int64_t pchannels, const int32_t* syms, const T* tvals, int64_t C,
                  int64_t plane, int64_t b, int64_t c, int64_t pos, Alphabet alphabet,
                  DlmLayout layout, Work& wk) {
  const int K = layout.mixtures;
  const double half = alphabet.half();
  const T* base = pdat + (b * pchannels) * plane + pos;
  const T* lg = base + layout.logits_off(static_cast<int>(c)) * plane;
  const T* mu = base + layout.mu_off(static_cast<int>(c)) * plane;
  const T* lam = base + layout.lam_off(static_cast<int>(c)) * plane;
  const T* cf = layout.channel_cond ? base + layout.coeff_off(static_cast<int>(c)) * plane : nullptr;
  int sym = syms[(b * C + c) * plane + pos];
  if (sym < 0 || sym >= alphabet.count) throw ShapeError("dlm: symbol out of range");
  double x = tvals ? static_cast<double>(tvals[(b * C + c) * plane + pos])
                   : alphabet.value(sym);
  double ctx = 0;
  if (layout.channel_cond && c > 0)
    ctx = alphabet.value(syms[(b * C + c - 1) * plane + pos]);
  double mx = static_cast<double>(lg[0]);
  for (int k = 1; k < K; ++k) mx = std::max(mx, static_cast<double>(lg[k * plane]));
  double sum = 0;
  for (int k = 0; k < K; ++k) {
    wk.pi[k] = std::exp(static_cast<double>(lg[k * plane]) - mx);
    sum += wk.pi[k];
  }
  double P = 0;
  for (int k = 0; k < K; ++k) {
    wk.pi[k] /= sum;
    double sv = std::exp(static_cast<double>(lam[k * plane]));
    if (sv < kDlmScaleMin) sv = kDlmScaleMin;
    wk.s[k] = sv;
    wk.mup[k] = static_cast<double>(mu[k * plane]) +
                (cf ? static_cast<double>(cf[k * plane]) * ctx : 0.0);
    if (sym == 0) {
      wk.slo[k] = 0;
      wk.zlo[k] = 0;
    } else {
      wk.zlo[k] = (x - half - wk.mup[k]) / sv;
      wk.slo[k] = 1.0 / (1.0 + std::exp(-wk.zlo[k]));
    }
    if (sym == alphabet.count - 1) {
      wk.shi[k] = 1;
      wk.zhi[k] = 0;
    } else {
      wk.zhi[k] = (x + half - wk.mup[k]) / sv;
      wk.shi[k] = 1.0 / (1.0 + std::exp(-wk.zhi[k]));
    }
    wk.pk[k] = wk.shi[k] - wk.slo[k];
    P += wk.pi[k] * wk.pk[k];
  }
  return P;
}

}  // namespace dlm_detail

// Total code length in bits of `symbols` under the mixture model given by
// `params`. If `target_values` is non-null its entries (the grid values of
// `symbols` from the straight-through quantizer) receive gradients as well,
// which is what lets the encoder-side latent branches train.
template <typename T>
typename GraphT<T>::Node* dlm_nll_bits(GraphT<T>& g, typename GraphT<T>::Node* params,
                                       typename GraphT<T>::Node* target_values,
                                       const IntTensor& symbols, Alphabet alphabet,
                                       DlmLayout layout) {
  using Ten = TensorT<T>;
  const Ten& pv = params->value;
  if (pv.rank() != 4 || symbols.rank() != 4) throw ShapeError("dlm_nll_bits: rank != 4");
  const int64_t B = symbols.dim(0), C = symbols.dim(1), H = symbols.dim(2), W = symbols.dim(3);
  if (pv.dim(0) != B || pv.dim(2) != H || pv.dim(3) != W)
    throw ShapeError("dlm_nll_bits: params grid does not match symbols");
  if (pv.dim(1) != layout.param_channels(static_cast<int>(C)))
    throw ShapeError("dlm_nll_bits: params channel axis 1 (" + std::to_string(pv.dim(1)) +
                     ") != layout (" + std::to_string(layout.param_channels(static_cast<int>(C))) +
                     ")");
  if (target_values && target_values->value.shape != symbols.shape)
    throw ShapeError("dlm_nll_bits: target value shape mismatch");
  const int64_t plane = H * W;
  const int K = layout.mixtures;

  dlm_detail::Work wk;
  wk.resize(K);
  Ten out({1});
  double total = 0;
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t pos = 0; pos < plane; ++pos) {
        double P = dlm_detail::eval_point<T>(
            pv.data.data(), pv.dim(1), symbols.data.data(),
            target_values ? target_values->value.data.data() : nullptr, C, plane, b, c, pos,
            alphabet, layout, wk);
        if (P < kDlmProbFloor) P = kDlmProbFloor;
        total -= std::log2(P);
      }
  out.data[0] = static_cast<T>(total);

  std::vector<typename GraphT<T>::Node*> ins{params};
  if (target_values) ins.push_back(target_values);
  auto* tgt = target_values;
  IntTensor syms_copy = symbols;
  return g.make(
      std::move(out), ins,
      [params, tgt, syms_copy = std::move(syms_copy), alphabet, layout, B, C, plane, K](auto& n) {
        const double ln2 = 0.6931471805599453;
        double gup = static_cast<double>(n.grad.data[0]);
        const auto& pv2 = params->value;
        const T* pdat = pv2.data.data();
        const T* tvals = tgt ? tgt->value.data.data() : nullptr;
        dlm_detail::Work wk2;
        wk2.resize(K);
        for (int64_t b = 0; b < B; ++b)
          for (int64_t c = 0; c < C; ++c)
            for (int64_t pos = 0; pos < plane; ++pos) {
              double P = dlm_detail::eval_point<T>(pdat, pv2.dim(1), syms_copy.data.data(), tvals,
                                                   C, plane, b, c, pos, alphabet, layout, wk2);
              if (P < kDlmProbFloor) continue;  // clamped, zero gradient
              double dP = -gup / (P * ln2);
              int sym = syms_copy.data[(b * C + c) * plane + pos];
              int64_t pbase = (b * pv2.dim(1)) * plane + pos;
              T* gdat = params->grad.data.data();
              T* glg = gdat + pbase + layout.logits_off(static_cast<int>(c)) * plane;
              T* gmu = gdat + pbase + layout.mu_off(static_cast<int>(c)) * plane;
              T* glam = gdat + pbase + layout.lam_off(static_cast<int>(c)) * plane;
              T* gcf = layout.channel_cond
                           ? gdat + pbase + layout.coeff_off(static_cast<int>(c)) * plane
                           : nullptr;
              const T* lam = pdat + pbase + layout.lam_off(static_cast<int>(c)) * plane;
              double ctx = 0;
              if (layout.channel_cond && c > 0)
                ctx = alphabet.value(syms_copy.data[(b * C + c - 1) * plane + pos]);
              double mean = 0;
              for (int k = 0; k < K; ++k) mean += wk2.pi[k] * wk2.pk[k];
              double dx_acc = 0;
              for (int k = 0; k < K; ++k) {
                glg[k * plane] += static_cast<T>(dP * wk2.pi[k] * (wk2.pk[k] - mean));
                double ahi = (sym == alphabet.count - 1) ? 0.0 : wk2.shi[k] * (1.0 - wk2.shi[k]);
                double alo = (sym == 0) ? 0.0 : wk2.slo[k] * (1.0 - wk2.slo[k]);
                double inv = 1.0 / wk2.s[k];
                double dmu = dP * wk2.pi[k] * (alo - ahi) * inv;
                gmu[k * plane] += static_cast<T>(dmu);
                if (gcf) gcf[k * plane] += static_cast<T>(dmu * ctx);
                double dpds = (alo * wk2.zlo[k] - ahi * wk2.zhi[k]) * inv;
                if (std::exp(static_cast<double>(lam[k * plane])) >= kDlmScaleMin)
                  glam[k * plane] += static_cast<T>(dP * wk2.pi[k] * dpds * wk2.s[k]);
                dx_acc += dP * wk2.pi[k] * (ahi - alo) * inv;
              }
              if (tgt && tgt->requires_grad)
                tgt->grad.data[(b * C + c) * plane + pos] += static_cast<T>(dx_acc);
            }
      });
}

// Single-position bin probability on plain arrays; the reference the tests
// and coder cross-checks use.
double dlm_bin_prob(const double* logits, const double* mu, const double* lam, const double* coeff,
                    int mixtures, Alphabet alphabet, int sym, double ctx);

// Integer CDF construction: 16-bit total mass, every symbol width >= 1,
// largest-remainder rounding with ties to the lower index. The logistic CDF
// evaluations go through the dispatched mixture_cdf kernel so encoder and
// decoder reproduce identical tables.
class DlmCdfBuilder {
 public:
  DlmCdfBuilder(Alphabet alphabet, int mixtures);

  // Pointers address one position inside a params tensor; consecutive
  // mixture components are `stride` elements apart. `coeff` may be null.
  void build(const float* logits, const float* mu, const float* lam, const float* coeff,
             int64_t stride, float ctx, uint32_t* cdf) const;

  int alphabet_count() const { return alphabet_.count; }

 private:
  Alphabet alphabet_;
  int mixtures_;
  std::vector<float> edges_;
  mutable std::vector<float> pi_, mup_, invs_, cum_;
  mutable std::vector<double> probs_;
  mutable std::vector<int> order_;
};

}  // namespace gollic
