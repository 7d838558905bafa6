#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "gollic/autodiff.hpp"
#include "gollic/rng.hpp"

namespace testutil {

template <typename T>
gollic::TensorT<T> random_tensor(gollic::Rng& rng, std::vector<int64_t> shape, double lo = -1.0,
                                 double hi = 1.0) {
  gollic::TensorT<T> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Central finite differences against the tape's analytic gradients. `build`
// must construct a scalar loss from the given leaves; it is re-invoked on
// perturbed copies for the numeric side.
template <typename T>
double grad_check(
    const std::function<typename gollic::GraphT<T>::Node*(
        gollic::GraphT<T>&, std::vector<typename gollic::GraphT<T>::Node*>&)>& build,
    const std::vector<gollic::TensorT<T>>& inputs, T eps) {
  using G = gollic::GraphT<T>;
  G g;
  std::vector<typename G::Node*> nodes;
  for (const auto& t : inputs) nodes.push_back(g.leaf(t, true));
  auto* loss = build(g, nodes);
  g.backward(loss);

  auto eval = [&](size_t i, int64_t j, T v) {
    auto mod = inputs;
    mod[i].data[static_cast<size_t>(j)] = v;
    G g2;
    std::vector<typename G::Node*> ns;
    for (const auto& t : mod) ns.push_back(g2.leaf(t, false));
    return static_cast<double>(build(g2, ns)->value.data[0]);
  };

  double maxerr = 0;
  for (size_t i = 0; i < inputs.size(); ++i)
    for (int64_t j = 0; j < inputs[i].numel(); ++j) {
      T x0 = inputs[i].data[static_cast<size_t>(j)];
      double num = (eval(i, j, x0 + eps) - eval(i, j, x0 - eps)) / (2.0 * static_cast<double>(eps));
      double ana = static_cast<double>(nodes[i]->grad.data[static_cast<size_t>(j)]);
      double err = std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-8});
      maxerr = std::max(maxerr, err);
    }
  return maxerr;
}

}  // namespace testutil
