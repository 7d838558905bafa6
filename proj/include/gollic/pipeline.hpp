#pragma once

#include <string>
#include <vector>

#include "gollic/checkpoint.hpp"
#include "gollic/container.hpp"
#include "gollic/image_io.hpp"
#include "gollic/network.hpp"

namespace gollic {

// Per-stream code lengths in bits. latent1/cluster are present only when the
// hierarchy stores the corresponding stream (levels >= 2 / == 3).
struct LossReport {
  double residual_bits = 0;
  double latent1_bits = 0;
  double cluster_bits = 0;
  double raw_bits = 0;
  bool has_latent1 = false;
  bool has_cluster = false;

  double total_bits() const { return residual_bits + latent1_bits + cluster_bits + raw_bits; }
  double bpsp(int64_t h, int64_t w) const { return total_bits() / (3.0 * h * w); }
};

// Side-information cost: 16 bits per soft-label word plus uniform-coded
// shared latents, P*K*16 + K*L*log2(quant_levels).
double closed_form_raw_bits(const ModelConfig& cfg, int64_t patches);

// Preprocessing chain shared by compression and training: RCT, zero-pad to a
// patch multiple, MED residuals, patch stacking.
ResidualStack preprocess_image(const RgbImage& img, int64_t patch_size);

struct CompressResult {
  std::vector<uint8_t> blob;
  LossReport stream_bits;    // actual per-section lengths
  LossReport model_estimate; // forward-pass code-length estimates
};

CompressResult compress_image(Model& m, const RgbImage& img);
RgbImage decompress_image(Model& m, const std::vector<uint8_t>& blob);

// Shannon entropy of the image's own residual-symbol histogram, in bpsp.
double first_order_entropy_bpsp(const RgbImage& img);

struct TrainOptions {
  int epochs = 50;
  float lr = 1e-4f;
  float decay = 0.5f;
  int decay_every = 10;
  float alpha = 0.9f;  // RMSProp smoothing
  float eps = 1e-8f;
  std::string log_path;        // line-delimited JSON, one record per step
  std::string checkpoint_dir;  // per-epoch checkpoints when non-empty
  bool verbose = false;
};

inline double lr_for_epoch(double base, int epoch, double decay = 0.5, int every = 10) {
  double lr = base;
  for (int i = 0; i < epoch / every; ++i) lr *= decay;
  return lr;
}

struct StepStats {
  int epoch = 0;
  int step = 0;
  double lr = 0;
  double bpsp = 0;  // model-estimate including closed-form raw bits
  LossReport losses;
};

// RMSProp over per-image steps (batch = 1 image = P patches). Throws
// CodecError on non-finite loss. Returns one record per step.
std::vector<StepStats> train_model(Model& m, const std::vector<ResidualStack>& data,
                                   const TrainOptions& opt);

struct EvalEntry {
  std::string name;
  int64_t height = 0, width = 0;
  double bpsp = 0;
  LossReport stream_bits;
  double seconds = 0;
  bool ok = false;
  std::string error;
};

EvalEntry eval_image(Model& m, const RgbImage& img, const std::string& name);

struct InspectArtifacts {
  std::vector<int> cluster_of_patch;  // argmax of the soft labels
  int64_t grid_h = 0, grid_w = 0;     // patch grid dims
  Tensor c_fixed;                     // [P,K]
  Tensor zs;                          // [K,L] dequantized shared latents
  Tensor zf3;                         // [P,C_d,n,n]
};

InspectArtifacts inspect_image(Model& m, const RgbImage& img);

}  // namespace gollic
