#include "gollic/entropy_model.hpp"

#include <algorithm>
#include <cmath>

#include "gollic/kernels.hpp"

namespace gollic {

double dlm_bin_prob(const double* logits, const double* mu, const double* lam, const double* coeff,
                    int mixtures, Alphabet alphabet, int sym, double ctx) {
  double mx = logits[0];
  for (int k = 1; k < mixtures; ++k) mx = std::max(mx, logits[k]);
  double sum = 0.0;
  std::vector<double> pi(static_cast<size_t>(mixtures));
  for (int k = 0; k < mixtures; ++k) {
    pi[static_cast<size_t>(k)] = std::exp(logits[k] - mx);
    sum += pi[static_cast<size_t>(k)];
  }
  double x = alphabet.value(sym);
  double h = alphabet.half();
  double p = 0.0;
  for (int k = 0; k < mixtures; ++k) {
    double s = std::max(std::exp(lam[k]), kDlmScaleMin);
    double m = mu[k] + (coeff ? coeff[k] * ctx : 0.0);
    double lo = (sym == 0) ? 0.0 : 1.0 / (1.0 + std::exp(-(x - h - m) / s));
    double hi = (sym == alphabet.count - 1) ? 1.0 : 1.0 / (1.0 + std::exp(-(x + h - m) / s));
    p += pi[static_cast<size_t>(k)] / sum * (hi - lo);
  }
  return p;
}

DlmCdfBuilder::DlmCdfBuilder(Alphabet alphabet, int mixtures)
    : alphabet_(alphabet), mixtures_(mixtures) {
  edges_.resize(static_cast<size_t>(alphabet.count - 1));
  for (int j = 1; j < alphabet.count; ++j)
    edges_[static_cast<size_t>(j - 1)] = static_cast<float>(-1.0 + alphabet.step() * (j - 0.5));
  pi_.resize(static_cast<size_t>(mixtures));
  mup_.resize(static_cast<size_t>(mixtures));
  invs_.resize(static_cast<size_t>(mixtures));
  cum_.resize(static_cast<size_t>(alphabet.count - 1));
  probs_.resize(static_cast<size_t>(alphabet.count));
  order_.resize(static_cast<size_t>(alphabet.count));
}

void DlmCdfBuilder::build(const float* logits, const float* mu, const float* lam,
                          const float* coeff, int64_t stride, float ctx, uint32_t* cdf) const {
  const int K = mixtures_;
  const int A = alphabet_.count;
  float mx = logits[0];
  for (int k = 1; k < K; ++k) mx = std::max(mx, logits[k * stride]);
  float sum = 0.0f;
  for (int k = 0; k < K; ++k) {
    pi_[static_cast<size_t>(k)] = std::exp(logits[k * stride] - mx);
    sum += pi_[static_cast<size_t>(k)];
  }
  for (int k = 0; k < K; ++k) {
    pi_[static_cast<size_t>(k)] /= sum;
    float s = std::exp(lam[k * stride]);
    if (s < static_cast<float>(kDlmScaleMin)) s = static_cast<float>(kDlmScaleMin);
    invs_[static_cast<size_t>(k)] = 1.0f / s;
    mup_[static_cast<size_t>(k)] = mu[k * stride] + (coeff ? coeff[k * stride] * ctx : 0.0f);
  }
  kernels::mixture_cdf(pi_.data(), mup_.data(), invs_.data(), K, edges_.data(), A - 1, cum_.data());
  double psum = 0.0;
  for (int j = 0; j < A; ++j) {
    double lo = (j == 0) ? 0.0 : static_cast<double>(cum_[static_cast<size_t>(j - 1)]);
    double hi = (j == A - 1) ? 1.0 : static_cast<double>(cum_[static_cast<size_t>(j)]);
    double p = hi - lo;
    if (p < 0.0) p = 0.0;
    probs_[static_cast<size_t>(j)] = p;
    psum += p;
  }
  if (psum <= 0.0) {
    psum = static_cast<double>(A);
    std::fill(probs_.begin(), probs_.end(), 1.0);
  }
  // Largest-remainder apportionment of 2^16 - A extra units over a floor of 1.
  const int64_t budget = 65536 - A;
  int64_t used = 0;
  std::vector<double>& frac = probs_;  // reuse: replaced below by fractional parts
  for (int j = 0; j < A; ++j) {
    double exact = probs_[static_cast<size_t>(j)] / psum * static_cast<double>(budget);
    int64_t fl = static_cast<int64_t>(std::floor(exact));
    cdf[j] = static_cast<uint32_t>(1 + fl);  // width, converted to cumulative later
    frac[static_cast<size_t>(j)] = exact - static_cast<double>(fl);
    used += fl;
  }
  int64_t rem = budget - used;
  for (int j = 0; j < A; ++j) order_[static_cast<size_t>(j)] = j;
  std::sort(order_.begin(), order_.end(), [&](int a, int b) {
    if (frac[static_cast<size_t>(a)] != frac[static_cast<size_t>(b)])
      return frac[static_cast<size_t>(a)] > frac[static_cast<size_t>(b)];
    return a < b;  // ties to the lower index
  });
  for (int64_t i = 0; i < rem; ++i) cdf[order_[static_cast<size_t>(i)]] += 1;
  uint32_t acc = 0;
  for (int j = 0; j < A; ++j) {
    uint32_t w = cdf[j];
    cdf[j] = acc;
    acc += w;
  }
  cdf[A] = acc;  // == 65536
}

}  // namespace gollic
