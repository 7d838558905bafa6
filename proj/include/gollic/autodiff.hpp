#pragma once

#include <cmath>
#include <cstring>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gollic/kernels.hpp"
#include "gollic/tensor.hpp"

namespace gollic {

// Reverse-mode tape. Nodes are created in evaluation order, so the creation
// sequence is already a topological order; backward walks it in reverse.
// Reductions use a fixed left-to-right order, which makes every pass
// bit-deterministic.
template <typename T>
class GraphT {
 public:
  using Ten = TensorT<T>;

  struct Node {
    Ten value;
    Ten grad;
    bool requires_grad = false;
    std::function<void(Node&)> backprop;
    std::string name;
  };

  Node* leaf(Ten v, bool requires_grad = false, std::string name = {}) {
    Node* n = alloc();
    n->value = std::move(v);
    n->requires_grad = requires_grad;
    n->name = std::move(name);
    return n;
  }

  // For fused ops defined outside this class.
  Node* make(Ten v, const std::vector<Node*>& inputs, std::function<void(Node&)> bp) {
    Node* n = alloc();
    n->value = std::move(v);
    for (Node* i : inputs)
      if (i->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backprop = std::move(bp);
    return n;
  }

  void backward(Node* loss) {
    if (loss->value.numel() != 1) throw ShapeError("backward requires a scalar loss");
    for (auto& up : nodes_)
      if (up->requires_grad) up->grad = Ten(up->value.shape, T(0));
    if (!loss->requires_grad) return;
    loss->grad.data[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node& n = **it;
      if (n.requires_grad && n.backprop) n.backprop(n);
    }
  }

  size_t node_count() const { return nodes_.size(); }

  // ---- ops ----

  Node* conv2d(Node* in, Node* w, Node* b, int64_t stride, int64_t pad) {
    const Ten& x = in->value;
    const Ten& wt = w->value;
    if (x.rank() != 4) throw ShapeError("conv2d: input rank != 4");
    if (wt.rank() != 4) throw ShapeError("conv2d: weight rank != 4");
    if (wt.dim(2) != wt.dim(3) || wt.dim(2) % 2 == 0)
      throw ShapeError("conv2d: kernel axis 2/3 must be equal and odd");
    if (x.dim(1) != wt.dim(1))
      throw ShapeError("conv2d: input channel axis 1 (" + std::to_string(x.dim(1)) +
                       ") != weight axis 1 (" + std::to_string(wt.dim(1)) + ")");
    if (b->value.numel() != wt.dim(0))
      throw ShapeError("conv2d: bias axis 0 != weight axis 0");
    auto d = kernels::ConvDims::make(x.dim(0), x.dim(1), x.dim(2), x.dim(3), wt.dim(0),
                                     wt.dim(2), stride, pad);
    if (d.oh <= 0 || d.ow <= 0) throw ShapeError("conv2d: empty output (axes 2/3)");
    Ten out({d.batch, d.cout, d.oh, d.ow});
    if constexpr (std::is_same_v<T, float>) {
      kernels::conv2d_forward(x.data.data(), wt.data.data(), b->value.data.data(),
                              out.data.data(), d);
    } else {
      kernels::conv2d_forward_ref<T>(x.data.data(), wt.data.data(), b->value.data.data(),
                                     out.data.data(), d);
    }
    return make(std::move(out), {in, w, b}, [in, w, b, d](Node& n) {
      kernels::conv2d_backward_ref<T>(
          in->value.data.data(), w->value.data.data(), n.grad.data.data(),
          in->requires_grad ? in->grad.data.data() : nullptr,
          w->requires_grad ? w->grad.data.data() : nullptr,
          b->requires_grad ? b->grad.data.data() : nullptr, d);
    });
  }

  Node* relu(Node* x) {
    Ten out(x->value.shape);
    if constexpr (std::is_same_v<T, float>) {
      kernels::relu(x->value.data.data(), out.data.data(), out.numel());
    } else {
      for (int64_t i = 0; i < out.numel(); ++i)
        out.data[i] = x->value.data[i] > T(0) ? x->value.data[i] : T(0);
    }
    return make(std::move(out), {x}, [x](Node& n) {
      if (!x->requires_grad) return;
      for (int64_t i = 0; i < n.grad.numel(); ++i)
        if (x->value.data[i] > T(0)) x->grad.data[i] += n.grad.data[i];
    });
  }

  Node* fully_connected(Node* x, Node* w, Node* b) {
    const Ten& xv = x->value;
    const Ten& wv = w->value;
    if (xv.rank() != 2 || wv.rank() != 2) throw ShapeError("fully_connected: rank != 2");
    if (xv.dim(1) != wv.dim(0))
      throw ShapeError("fully_connected: input axis 1 (" + std::to_string(xv.dim(1)) +
                       ") != weight axis 0 (" + std::to_string(wv.dim(0)) + ")");
    if (b->value.numel() != wv.dim(1)) throw ShapeError("fully_connected: bias != weight axis 1");
    int64_t B = xv.dim(0), L = xv.dim(1), M = wv.dim(1);
    Ten out({B, M});
    for (int64_t i = 0; i < B; ++i)
      for (int64_t j = 0; j < M; ++j) {
        T acc = b->value.data[j];
        for (int64_t l = 0; l < L; ++l) acc += xv.data[i * L + l] * wv.data[l * M + j];
        out.data[i * M + j] = acc;
      }
    return make(std::move(out), {x, w, b}, [x, w, b, B, L, M](Node& n) {
      for (int64_t i = 0; i < B; ++i)
        for (int64_t j = 0; j < M; ++j) {
          T g = n.grad.data[i * M + j];
          if (b->requires_grad) b->grad.data[j] += g;
          for (int64_t l = 0; l < L; ++l) {
            if (x->requires_grad) x->grad.data[i * L + l] += g * w->value.data[l * M + j];
            if (w->requires_grad) w->grad.data[l * M + j] += g * x->value.data[i * L + l];
          }
        }
    });
  }

  // Softmax over the last axis, stabilized by max subtraction.
  Node* softmax(Node* x) {
    const Ten& xv = x->value;
    int64_t M = xv.dim(xv.rank() - 1);
    int64_t rows = xv.numel() / M;
    Ten out(xv.shape);
    for (int64_t r = 0; r < rows; ++r) {
      const T* xi = xv.data.data() + r * M;
      T* yi = out.data.data() + r * M;
      T m = xi[0];
      for (int64_t j = 1; j < M; ++j) m = std::max(m, xi[j]);
      T s = T(0);
      for (int64_t j = 0; j < M; ++j) {
        yi[j] = std::exp(xi[j] - m);
        s += yi[j];
      }
      for (int64_t j = 0; j < M; ++j) yi[j] /= s;
    }
    return make(std::move(out), {x}, [x, rows, M](Node& n) {
      if (!x->requires_grad) return;
      for (int64_t r = 0; r < rows; ++r) {
        const T* y = n.value.data.data() + r * M;
        const T* g = n.grad.data.data() + r * M;
        T dot = T(0);
        for (int64_t j = 0; j < M; ++j) dot += g[j] * y[j];
        for (int64_t j = 0; j < M; ++j) x->grad.data[r * M + j] += y[j] * (g[j] - dot);
      }
    });
  }

  Node* pixel_shuffle(Node* x, int64_t f) {
    const Ten& xv = x->value;
    if (xv.rank() != 4) throw ShapeError("pixel_shuffle: rank != 4");
    if (xv.dim(1) % (f * f) != 0)
      throw ShapeError("pixel_shuffle: channel axis 1 (" + std::to_string(xv.dim(1)) +
                       ") not divisible by f^2");
    int64_t B = xv.dim(0), C = xv.dim(1) / (f * f), H = xv.dim(2), W = xv.dim(3);
    Ten out({B, C, H * f, W * f});
    for (int64_t b = 0; b < B; ++b)
      for (int64_t c = 0; c < C; ++c)
        for (int64_t i = 0; i < f; ++i)
          for (int64_t j = 0; j < f; ++j)
            for (int64_t h = 0; h < H; ++h)
              for (int64_t w = 0; w < W; ++w)
                out.at4(b, c, h * f + i, w * f + j) = xv.at4(b, (c * f + i) * f + j, h, w);
    return make(std::move(out), {x}, [x, B, C, H, W, f](Node& n) {
      if (!x->requires_grad) return;
      for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c)
          for (int64_t i = 0; i < f; ++i)
            for (int64_t j = 0; j < f; ++j)
              for (int64_t h = 0; h < H; ++h)
                for (int64_t w = 0; w < W; ++w)
                  x->grad.at4(b, (c * f + i) * f + j, h, w) += n.grad.at4(b, c, h * f + i, w * f + j);
    });
  }

  Node* add(Node* a, Node* b) {
    if (!a->value.same_shape(b->value)) throw ShapeError("add: shape mismatch");
    Ten out(a->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = a->value.data[i] + b->value.data[i];
    return make(std::move(out), {a, b}, [a, b](Node& n) {
      for (int64_t i = 0; i < n.grad.numel(); ++i) {
        if (a->requires_grad) a->grad.data[i] += n.grad.data[i];
        if (b->requires_grad) b->grad.data[i] += n.grad.data[i];
      }
    });
  }

  Node* scale(Node* x, T s) {
    Ten out(x->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = x->value.data[i] * s;
    return make(std::move(out), {x}, [x, s](Node& n) {
      if (!x->requires_grad) return;
      for (int64_t i = 0; i < n.grad.numel(); ++i) x->grad.data[i] += n.grad.data[i] * s;
    });
  }

  Node* sum(Node* x) {
    Ten out({1});
    T acc = T(0);
    for (int64_t i = 0; i < x->value.numel(); ++i) acc += x->value.data[i];
    out.data[0] = acc;
    return make(std::move(out), {x}, [x](Node& n) {
      if (!x->requires_grad) return;
      T g = n.grad.data[0];
      for (int64_t i = 0; i < x->grad.numel(); ++i) x->grad.data[i] += g;
    });
  }

  Node* reshape(Node* x, std::vector<int64_t> shape) {
    if (Ten::count(shape) != x->value.numel()) throw ShapeError("reshape: element count mismatch");
    Ten out;
    out.shape = std::move(shape);
    out.data = x->value.data;
    return make(std::move(out), {x}, [x](Node& n) {
      if (!x->requires_grad) return;
      for (int64_t i = 0; i < n.grad.numel(); ++i) x->grad.data[i] += n.grad.data[i];
    });
  }

  Node* matmul(Node* a, Node* b) {
    const Ten& av = a->value;
    const Ten& bv = b->value;
    if (av.rank() != 2 || bv.rank() != 2) throw ShapeError("matmul: rank != 2");
    if (av.dim(1) != bv.dim(0))
      throw ShapeError("matmul: inner axes disagree (" + std::to_string(av.dim(1)) + " vs " +
                       std::to_string(bv.dim(0)) + ")");
    int64_t P = av.dim(0), K = av.dim(1), L = bv.dim(1);
    Ten out({P, L});
    for (int64_t p = 0; p < P; ++p)
      for (int64_t l = 0; l < L; ++l) {
        T acc = T(0);
        for (int64_t k = 0; k < K; ++k) acc += av.data[p * K + k] * bv.data[k * L + l];
        out.data[p * L + l] = acc;
      }
    return make(std::move(out), {a, b}, [a, b, P, K, L](Node& n) {
      for (int64_t p = 0; p < P; ++p)
        for (int64_t l = 0; l < L; ++l) {
          T g = n.grad.data[p * L + l];
          for (int64_t k = 0; k < K; ++k) {
            if (a->requires_grad) a->grad.data[p * K + k] += g * b->value.data[k * L + l];
            if (b->requires_grad) b->grad.data[k * L + l] += g * a->value.data[p * K + k];
          }
        }
    });
  }

  // Straight-through scalar quantizer: forward emits the nearest of `levels`
  // grid values on [-1,1]; backward uses the Jacobian of the soft assignment
  // with temperature sigma_q.
  Node* quantize_st(Node* x, int levels, T sigma_q) {
    Ten out(x->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i)
      out.data[i] = grid_value(hard_symbol(x->value.data[i], levels), levels);
    return make(std::move(out), {x}, [x, levels, sigma_q](Node& n) {
      if (!x->requires_grad) return;
      for (int64_t i = 0; i < n.grad.numel(); ++i)
        x->grad.data[i] += n.grad.data[i] * soft_quantize_jacobian(x->value.data[i], levels, sigma_q);
    });
  }

  // Differentiable soft quantization by itself (training-path definition the
  // straight-through pairing borrows its Jacobian from).
  Node* quantize_soft(Node* x, int levels, T sigma_q) {
    Ten out(x->value.shape);
    for (int64_t i = 0; i < out.numel(); ++i)
      out.data[i] = soft_quantize_value(x->value.data[i], levels, sigma_q);
    return make(std::move(out), {x}, [x, levels, sigma_q](Node& n) {
      if (!x->requires_grad) return;
      for (int64_t i = 0; i < n.grad.numel(); ++i)
        x->grad.data[i] += n.grad.data[i] * soft_quantize_jacobian(x->value.data[i], levels, sigma_q);
    });
  }

  // Row-stochastic matrix quantized to 16-bit fixed point; the largest entry
  // of each row absorbs the rounding slack so rows sum to exactly 65535
  // words. Backward is the identity (both coder sides consume these values).
  Node* fixed_point_rows(Node* x) {
    Ten out(x->value.shape);
    int64_t K = x->value.dim(x->value.rank() - 1);
    int64_t rows = x->value.numel() / K;
    for (int64_t r = 0; r < rows; ++r) {
      std::vector<uint16_t> wds(static_cast<size_t>(K));
      fixed_point_row(x->value.data.data() + r * K, K, wds.data());
      for (int64_t k = 0; k < K; ++k)
        out.data[r * K + k] = static_cast<T>(wds[static_cast<size_t>(k)]) / T(65535);
    }
    return make(std::move(out), {x}, [x](Node& n) {
      if (!x->requires_grad) return;
      for (int64_t i = 0; i < n.grad.numel(); ++i) x->grad.data[i] += n.grad.data[i];
    });
  }

  // z_s[k,:] = sum_p C[p,k] H[p,:] / sum_p C[p,k]; a cluster whose total
  // weight falls below `eps` receives the global mean of the H rows.
  Node* cluster_weighted_mean(Node* c, Node* h, T eps) {
    const Ten& cv = c->value;
    const Ten& hv = h->value;
    if (cv.rank() != 2 || hv.rank() != 2 || cv.dim(0) != hv.dim(0))
      throw ShapeError("cluster_weighted_mean: C and H must be 2-d with equal axis 0");
    int64_t P = cv.dim(0), K = cv.dim(1), L = hv.dim(1);
    Ten out({K, L});
    std::vector<T> s(static_cast<size_t>(K), T(0));
    for (int64_t k = 0; k < K; ++k)
      for (int64_t p = 0; p < P; ++p) s[static_cast<size_t>(k)] += cv.data[p * K + k];
    for (int64_t k = 0; k < K; ++k) {
      if (s[static_cast<size_t>(k)] < eps) {
        for (int64_t l = 0; l < L; ++l) {
          T acc = T(0);
          for (int64_t p = 0; p < P; ++p) acc += hv.data[p * L + l];
          out.data[k * L + l] = acc / static_cast<T>(P);
        }
      } else {
        for (int64_t l = 0; l < L; ++l) {
          T acc = T(0);
          for (int64_t p = 0; p < P; ++p) acc += cv.data[p * K + k] * hv.data[p * L + l];
          out.data[k * L + l] = acc / s[static_cast<size_t>(k)];
        }
      }
    }
    return make(std::move(out), {c, h}, [c, h, P, K, L, s, eps](Node& n) {
      for (int64_t k = 0; k < K; ++k) {
        if (s[static_cast<size_t>(k)] < eps) {
          if (!h->requires_grad) continue;
          for (int64_t l = 0; l < L; ++l) {
            T g = n.grad.data[k * L + l] / static_cast<T>(P);
            for (int64_t p = 0; p < P; ++p) h->grad.data[p * L + l] += g;
          }
          continue;
        }
        T inv = T(1) / s[static_cast<size_t>(k)];
        for (int64_t l = 0; l < L; ++l) {
          T g = n.grad.data[k * L + l] * inv;
          T z = n.value.data[k * L + l];
          for (int64_t p = 0; p < P; ++p) {
            if (h->requires_grad) h->grad.data[p * L + l] += g * c->value.data[p * K + k];
            if (c->requires_grad) c->grad.data[p * K + k] += g * (h->value.data[p * L + l] - z);
          }
        }
      }
    });
  }

  // ---- quantizer helpers (shared with the coder path) ----

  static int hard_symbol(T x, int levels) {
    T step = T(2) / static_cast<T>(levels - 1);
    T t = (x + T(1)) / step;
    // ties break toward the lower index
    int64_t i = static_cast<int64_t>(std::ceil(static_cast<double>(t) - 0.5));
    if (i < 0) i = 0;
    if (i > levels - 1) i = levels - 1;
    return static_cast<int>(i);
  }

  static T grid_value(int symbol, int levels) {
    return T(-1) + T(2) * static_cast<T>(symbol) / static_cast<T>(levels - 1);
  }

  static T soft_quantize_value(T x, int levels, T sigma_q) {
    T num = T(0), den = T(0), best = T(0);
    // softmax over -sigma_q * (x - l_i)^2, stabilized
    T mx = -std::numeric_limits<T>::infinity();
    for (int i = 0; i < levels; ++i) {
      T d = x - grid_value(i, levels);
      mx = std::max(mx, -sigma_q * d * d);
    }
    (void)best;
    for (int i = 0; i < levels; ++i) {
      T l = grid_value(i, levels);
      T d = x - l;
      T w = std::exp(-sigma_q * d * d - mx);
      num += l * w;
      den += w;
    }
    return num / den;
  }

  static T soft_quantize_jacobian(T x, int levels, T sigma_q) {
    T mx = -std::numeric_limits<T>::infinity();
    for (int i = 0; i < levels; ++i) {
      T d = x - grid_value(i, levels);
      mx = std::max(mx, -sigma_q * d * d);
    }
    T den = T(0);
    std::vector<T> w(static_cast<size_t>(levels));
    for (int i = 0; i < levels; ++i) {
      T d = x - grid_value(i, levels);
      w[static_cast<size_t>(i)] = std::exp(-sigma_q * d * d - mx);
      den += w[static_cast<size_t>(i)];
    }
    T mean_da = T(0), out = T(0), xt = T(0);
    for (int i = 0; i < levels; ++i) w[static_cast<size_t>(i)] /= den;
    for (int i = 0; i < levels; ++i) {
      T da = T(-2) * sigma_q * (x - grid_value(i, levels));
      mean_da += w[static_cast<size_t>(i)] * da;
      xt += w[static_cast<size_t>(i)] * grid_value(i, levels);
    }
    for (int i = 0; i < levels; ++i) {
      T da = T(-2) * sigma_q * (x - grid_value(i, levels));
      out += grid_value(i, levels) * w[static_cast<size_t>(i)] * (da - mean_da);
    }
    return out;
  }

  static void fixed_point_row(const T* row, int64_t K, uint16_t* words) {
    int64_t total = 0;
    int64_t imax = 0;
    for (int64_t k = 0; k < K; ++k) {
      double v = static_cast<double>(row[k]);
      if (v < 0) v = 0;
      if (v > 1) v = 1;
      int64_t wd = static_cast<int64_t>(std::floor(v * 65535.0 + 0.5));
      words[k] = static_cast<uint16_t>(wd);
      total += wd;
      if (row[k] > row[imax]) imax = k;
    }
    int64_t slack = 65535 - total;
    int64_t adj = static_cast<int64_t>(words[imax]) + slack;
    if (adj < 0) adj = 0;
    if (adj > 65535) adj = 65535;
    words[imax] = static_cast<uint16_t>(adj);
    // residual slack (possible only in pathological rows) goes to entry 0
    int64_t t2 = 0;
    for (int64_t k = 0; k < K; ++k) t2 += words[k];
    if (t2 != 65535) {
      int64_t a0 = static_cast<int64_t>(words[0]) + (65535 - t2);
      words[0] = static_cast<uint16_t>(std::max<int64_t>(0, std::min<int64_t>(65535, a0)));
    }
  }

 private:
  Node* alloc() {
    nodes_.emplace_back(std::make_unique<Node>());
    return nodes_.back().get();
  }

  std::deque<std::unique_ptr<Node>> nodes_;
};

using Graph = GraphT<float>;

// Inverse of pixel_shuffle, used by tests and shape plumbing.
template <typename T>
TensorT<T> space_to_depth(const TensorT<T>& x, int64_t f) {
  if (x.rank() != 4) throw ShapeError("space_to_depth: rank != 4");
  if (x.dim(2) % f != 0 || x.dim(3) % f != 0)
    throw ShapeError("space_to_depth: spatial axes not divisible by f");
  int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2) / f, W = x.dim(3) / f;
  TensorT<T> out({B, C * f * f, H, W});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t i = 0; i < f; ++i)
        for (int64_t j = 0; j < f; ++j)
          for (int64_t h = 0; h < H; ++h)
            for (int64_t w = 0; w < W; ++w)
              out.at4(b, (c * f + i) * f + j, h, w) = x.at4(b, c, h * f + i, w * f + j);
  return out;
}

}  // namespace gollic
