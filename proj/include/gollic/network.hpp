#pragma once

#include <map>
#include <string>
#include <vector>

#include "gollic/autodiff.hpp"
#include "gollic/entropy_model.hpp"
#include "gollic/tensor.hpp"

namespace gollic {

struct ModelConfig {
  int patch_size = 128;      // N
  int clusters = 5;          // K
  int feature_channels = 64; // C_f
  int latent_channels = 5;   // C_d
  int levels = 3;
  int mixtures = 10;
  int quant_levels = 25;
  int resnet_blocks = 8;
  float sigma_q = 2.0f;
  uint64_t seed = 0;

  void validate() const;
  // spatial side of the level-n grid (n = 1..levels)
  int64_t level_size(int n) const { return patch_size >> n; }
  // flattened length L of one shared-latent row
  int64_t shared_latent_len() const {
    int64_t s = level_size(levels);
    return static_cast<int64_t>(latent_channels) * s * s;
  }
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

struct Model {
  ModelConfig cfg;
  std::map<std::string, Tensor> params;  // ordered; iteration order is the checkpoint order

  void init();  // seeded uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)]
  Tensor& p(const std::string& name);
  const Tensor& p(const std::string& name) const;
};

// Nearest-grid-level symbols on the [-1,1] grid, ties to the lower index.
IntTensor quantize_symbols(const Tensor& x, int levels);
Tensor dequantize_symbols(const IntTensor& s, int levels, const std::vector<int64_t>& shape);

// Per-graph parameter leaf cache so each parameter maps to one node.
class ParamCache {
 public:
  ParamCache(Graph& g, Model& m, bool requires_grad)
      : g_(g), m_(m), requires_grad_(requires_grad) {}
  Graph::Node* operator()(const std::string& name);
  const std::map<std::string, Graph::Node*>& nodes() const { return nodes_; }

 private:
  Graph& g_;
  Model& m_;
  bool requires_grad_;
  std::map<std::string, Graph::Node*> nodes_;
};

struct ForwardOutput {
  Graph::Node* loss_r = nullptr;                 // bits of r under the residual DLM
  std::vector<Graph::Node*> latent_losses;       // [l-1] -> bits of z_Q(l), l = 1..levels-1
  std::vector<IntTensor> zq_symbols;             // [l-1] -> z_Q(l) symbols [P,C_d,n,n]
  IntTensor zs_symbols;                          // [K,L] shared-latent symbols
  std::vector<uint16_t> c_words;                 // P*K fixed-point soft labels
  Tensor c_fixed;                                // [P,K] fixed-point-recovered values
  std::vector<Tensor> dlm_latent;                // [l-1] -> params predicting z_Q(l)
  Tensor dlm_residual;                           // params predicting r
  std::vector<Graph::Node*> encoder_features;    // z(n), n = 1..levels (diagnostics/tests)
  Tensor zf3;                                    // reconstructed bottom features [P,C_d,n,n]
  std::map<std::string, Graph::Node*> param_nodes;  // for optimizer gradient access
};

// Full pass: encoders 1..levels, clustering at the bottom, decoders back up.
// The decoder chain consumes only quantized values, so the DLM parameter
// tensors here are bit-identical to what decompression recomputes.
ForwardOutput forward_full(Graph& g, Model& m, const IntTensor& stack, bool training);

// Decode-side pieces (shared code path with forward_full).
Tensor reconstruct_zf3_values(Model& m, const Tensor& c_fixed, const IntTensor& zs_syms);
struct StageOutput {
  Tensor zf;   // upsampled carry features [P,C_f,2n,2n]
  Tensor dlm;  // mixture params for the stage target
};
StageOutput run_decoder_stage(Model& m, int level, const Tensor* carry, const Tensor& latent_cd);

DlmLayout latent_layout(const ModelConfig& cfg);
DlmLayout residual_layout(const ModelConfig& cfg);

}  // namespace gollic
