#include "gollic/pipeline.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace gollic {

double closed_form_raw_bits(const ModelConfig& cfg, int64_t patches) {
  double label_bits = 16.0 * static_cast<double>(patches) * cfg.clusters;
  double latent_bits = static_cast<double>(cfg.clusters) * cfg.shared_latent_len() *
                       std::log2(static_cast<double>(cfg.quant_levels));
  return label_bits + latent_bits;
}

ResidualStack preprocess_image(const RgbImage& img, int64_t patch_size) {
  PlanarImage ycc = rct_forward(img);
  PlanarImage padded = pad_to_multiple(ycc, patch_size);
  PlanarImage res = residual_forward(padded);
  return patchify(res, patch_size, img.height, img.width);
}

namespace {

void encode_dlm_stream(ArithmeticEncoder& enc, const Tensor& params, const IntTensor& syms,
                       DlmLayout layout, Alphabet ab) {
  const int64_t B = syms.dim(0), C = syms.dim(1), plane = syms.dim(2) * syms.dim(3);
  const int64_t pc = params.dim(1);
  DlmCdfBuilder builder(ab, layout.mixtures);
  std::vector<uint32_t> cdf(static_cast<size_t>(ab.count) + 1);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t pos = 0; pos < plane; ++pos) {
        const float* base = params.data.data() + b * pc * plane + pos;
        const float* cf =
            layout.channel_cond ? base + layout.coeff_off(static_cast<int>(c)) * plane : nullptr;
        float ctx = 0.0f;
        if (layout.channel_cond && c > 0)
          ctx = static_cast<float>(ab.value(syms.data[((b * C + c - 1) * plane) + pos]));
        builder.build(base + layout.logits_off(static_cast<int>(c)) * plane,
                      base + layout.mu_off(static_cast<int>(c)) * plane,
                      base + layout.lam_off(static_cast<int>(c)) * plane, cf, plane, ctx,
                      cdf.data());
        enc.encode_symbol(cdf.data(), syms.data[((b * C + c) * plane) + pos]);
      }
}

void decode_dlm_stream(ArithmeticDecoder& dec, const Tensor& params, IntTensor& syms,
                       DlmLayout layout, Alphabet ab) {
  const int64_t B = syms.dim(0), C = syms.dim(1), plane = syms.dim(2) * syms.dim(3);
  const int64_t pc = params.dim(1);
  DlmCdfBuilder builder(ab, layout.mixtures);
  std::vector<uint32_t> cdf(static_cast<size_t>(ab.count) + 1);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t pos = 0; pos < plane; ++pos) {
        const float* base = params.data.data() + b * pc * plane + pos;
        const float* cf =
            layout.channel_cond ? base + layout.coeff_off(static_cast<int>(c)) * plane : nullptr;
        float ctx = 0.0f;
        if (layout.channel_cond && c > 0)
          ctx = static_cast<float>(ab.value(syms.data[((b * C + c - 1) * plane) + pos]));
        builder.build(base + layout.logits_off(static_cast<int>(c)) * plane,
                      base + layout.mu_off(static_cast<int>(c)) * plane,
                      base + layout.lam_off(static_cast<int>(c)) * plane, cf, plane, ctx,
                      cdf.data());
        syms.data[((b * C + c) * plane) + pos] = dec.decode_symbol(cdf.data(), ab.count);
      }
}

int section_for_level(int l) {
  return l == 2 ? Container::kLatent2 : Container::kLatent1;
}

}  // namespace

CompressResult compress_image(Model& m, const RgbImage& img) {
  const ModelConfig& cfg = m.cfg;
  cfg.validate();
  ResidualStack stack = preprocess_image(img, cfg.patch_size);
  Graph g;
  ForwardOutput out = forward_full(g, m, stack.symbols, false);
  const int64_t patches = stack.patches;

  Container c;
  c.height = static_cast<uint32_t>(img.height);
  c.width = static_cast<uint32_t>(img.width);
  c.patch_size = static_cast<uint16_t>(cfg.patch_size);
  c.clusters = static_cast<uint16_t>(cfg.clusters);
  c.latent_channels = static_cast<uint16_t>(cfg.latent_channels);
  c.levels = static_cast<uint16_t>(cfg.levels);
  c.model_fingerprint = model_fingerprint(m);

  auto& labels = c.sections[Container::kSoftLabels];
  for (uint16_t w : out.c_words) {
    labels.payload.push_back(static_cast<uint8_t>(w & 0xFF));
    labels.payload.push_back(static_cast<uint8_t>(w >> 8));
  }
  labels.symbol_count = out.c_words.size();

  Alphabet latent_ab{cfg.quant_levels};
  {
    ArithmeticEncoder enc;
    auto cdf = uniform_cdf(cfg.quant_levels);
    for (int32_t s : out.zs_symbols.data) enc.encode_symbol(cdf.data(), s);
    auto& sec = c.sections[Container::kSharedLatents];
    sec.symbol_count = enc.symbol_count();
    sec.payload = enc.finish();
  }

  for (int l = cfg.levels - 1; l >= 1; --l) {
    ArithmeticEncoder enc;
    encode_dlm_stream(enc, out.dlm_latent[static_cast<size_t>(l - 1)],
                      out.zq_symbols[static_cast<size_t>(l - 1)], latent_layout(cfg), latent_ab);
    auto& sec = c.sections[static_cast<size_t>(section_for_level(l))];
    sec.symbol_count = enc.symbol_count();
    sec.payload = enc.finish();
  }

  {
    ArithmeticEncoder enc;
    encode_dlm_stream(enc, out.dlm_residual, stack.symbols, residual_layout(cfg), Alphabet{256});
    auto& sec = c.sections[Container::kResidual];
    sec.symbol_count = enc.symbol_count();
    sec.payload = enc.finish();
  }

  CompressResult res;
  res.blob = write_container(c);
  res.stream_bits.residual_bits = 8.0 * c.sections[Container::kResidual].payload.size();
  res.stream_bits.raw_bits = 8.0 * (c.sections[Container::kSoftLabels].payload.size() +
                                    c.sections[Container::kSharedLatents].payload.size());
  if (cfg.levels >= 2) {
    res.stream_bits.has_latent1 = true;
    res.stream_bits.latent1_bits = 8.0 * c.sections[Container::kLatent1].payload.size();
  }
  if (cfg.levels == 3) {
    res.stream_bits.has_cluster = true;
    res.stream_bits.cluster_bits = 8.0 * c.sections[Container::kLatent2].payload.size();
  }
  res.model_estimate.residual_bits = out.loss_r->value.data[0];
  res.model_estimate.raw_bits = closed_form_raw_bits(cfg, patches);
  if (cfg.levels >= 2) {
    res.model_estimate.has_latent1 = true;
    res.model_estimate.latent1_bits = out.latent_losses[0]->value.data[0];
  }
  if (cfg.levels == 3) {
    res.model_estimate.has_cluster = true;
    res.model_estimate.cluster_bits = out.latent_losses[1]->value.data[0];
  }
  return res;
}

RgbImage decompress_image(Model& m, const std::vector<uint8_t>& blob) {
  const ModelConfig& cfg = m.cfg;
  cfg.validate();
  Container c = read_container(blob);
  if (c.model_fingerprint != model_fingerprint(m))
    throw FormatError("container was written with a different model (fingerprint mismatch)");
  if (c.patch_size != cfg.patch_size || c.clusters != cfg.clusters ||
      c.latent_channels != cfg.latent_channels || c.levels != cfg.levels)
    throw FormatError("container header does not match the model config");
  const int64_t N = cfg.patch_size;
  const int64_t h = c.height, w = c.width;
  const int64_t patches = ((h + N - 1) / N) * ((w + N - 1) / N);
  const int64_t latlen = cfg.shared_latent_len();

  const auto& labels = c.sections[Container::kSoftLabels];
  if (labels.symbol_count != static_cast<uint64_t>(patches * cfg.clusters) ||
      labels.payload.size() != 2 * static_cast<size_t>(patches * cfg.clusters))
    throw FormatError("soft-label section has wrong size");
  Tensor c_fixed({patches, cfg.clusters});
  for (int64_t i = 0; i < c_fixed.numel(); ++i) {
    uint16_t word = static_cast<uint16_t>(labels.payload[2 * static_cast<size_t>(i)] |
                                          (labels.payload[2 * static_cast<size_t>(i) + 1] << 8));
    c_fixed.data[static_cast<size_t>(i)] = static_cast<float>(word) / 65535.0f;
  }

  const auto& shared = c.sections[Container::kSharedLatents];
  if (shared.symbol_count != static_cast<uint64_t>(cfg.clusters * latlen))
    throw FormatError("shared-latent section has wrong symbol count");
  IntTensor zs_syms({cfg.clusters, latlen});
  {
    ArithmeticDecoder dec(shared.payload.data(), shared.payload.size());
    auto cdf = uniform_cdf(cfg.quant_levels);
    for (auto& s : zs_syms.data) s = dec.decode_symbol(cdf.data(), cfg.quant_levels);
  }

  Tensor latent_in = reconstruct_zf3_values(m, c_fixed, zs_syms);
  Alphabet latent_ab{cfg.quant_levels};
  Tensor carry;
  bool have_carry = false;
  IntTensor stack_syms;
  for (int i = cfg.levels; i >= 1; --i) {
    StageOutput st = run_decoder_stage(m, i, have_carry ? &carry : nullptr, latent_in);
    if (i > 1) {
      int64_t n = cfg.level_size(i - 1);
      const auto& sec = c.sections[static_cast<size_t>(section_for_level(i - 1))];
      IntTensor syms({patches, cfg.latent_channels, n, n});
      if (sec.symbol_count != static_cast<uint64_t>(syms.numel()))
        throw FormatError("latent section has wrong symbol count");
      ArithmeticDecoder dec(sec.payload.data(), sec.payload.size());
      decode_dlm_stream(dec, st.dlm, syms, latent_layout(cfg), latent_ab);
      latent_in = dequantize_symbols(syms, cfg.quant_levels, syms.shape);
      carry = st.zf;
      have_carry = true;
    } else {
      const auto& sec = c.sections[Container::kResidual];
      stack_syms = IntTensor({patches, 3, N, N});
      if (sec.symbol_count != static_cast<uint64_t>(stack_syms.numel()))
        throw FormatError("residual section has wrong symbol count");
      ArithmeticDecoder dec(sec.payload.data(), sec.payload.size());
      decode_dlm_stream(dec, st.dlm, stack_syms, residual_layout(cfg), Alphabet{256});
    }
  }

  ResidualStack stack;
  stack.patches = patches;
  stack.patch_size = N;
  stack.orig_height = h;
  stack.orig_width = w;
  stack.symbols = std::move(stack_syms);
  PlanarImage res = unpatchify(stack);
  PlanarImage ycc = residual_inverse(res);
  return rct_inverse(crop(ycc, h, w));
}

double first_order_entropy_bpsp(const RgbImage& img) {
  PlanarImage res = residual_forward(rct_forward(img));
  std::array<int64_t, 256> hist{};
  for (uint8_t s : res.data) ++hist[s];
  double total = static_cast<double>(res.data.size());
  double bits = 0;
  for (int64_t n : hist)
    if (n > 0) bits -= static_cast<double>(n) * std::log2(static_cast<double>(n) / total);
  return bits / total;
}

std::vector<StepStats> train_model(Model& m, const std::vector<ResidualStack>& data,
                                   const TrainOptions& opt) {
  m.cfg.validate();
  if (data.empty()) throw CodecError("train: empty dataset");
  std::map<std::string, Tensor> vstate;
  std::ofstream log;
  if (!opt.log_path.empty()) {
    log.open(opt.log_path, std::ios::app);
    if (!log) throw IoError("cannot open log " + opt.log_path);
  }
  std::vector<StepStats> history;
  int step = 0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    float lr = static_cast<float>(lr_for_epoch(opt.lr, epoch, opt.decay, opt.decay_every));
    for (const ResidualStack& stack : data) {
      Graph g;
      ForwardOutput out = forward_full(g, m, stack.symbols, true);
      Graph::Node* total = out.loss_r;
      for (Graph::Node* l : out.latent_losses) total = g.add(total, l);
      int64_t subpix = 3 * stack.patches * m.cfg.patch_size * m.cfg.patch_size;
      // optimize in bpsp units so the paper's learning rate transfers
      Graph::Node* loss = g.scale(total, 1.0f / static_cast<float>(subpix));
      if (!std::isfinite(loss->value.data[0]))
        throw CodecError("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
                         " step " + std::to_string(step));
      g.backward(loss);
      for (auto& [name, node] : out.param_nodes) {
        Tensor& p = m.p(name);
        auto it = vstate.find(name);
        if (it == vstate.end()) it = vstate.emplace(name, Tensor(p.shape)).first;
        Tensor& v = it->second;
        for (int64_t i = 0; i < p.numel(); ++i) {
          float gr = node->grad.data[static_cast<size_t>(i)];
          float& vi = v.data[static_cast<size_t>(i)];
          vi = opt.alpha * vi + (1.0f - opt.alpha) * gr * gr;
          p.data[static_cast<size_t>(i)] -= lr * gr / (std::sqrt(vi) + opt.eps);
        }
      }

      StepStats st;
      st.epoch = epoch;
      st.step = step;
      st.lr = lr;
      st.losses.residual_bits = out.loss_r->value.data[0];
      if (m.cfg.levels >= 2) {
        st.losses.has_latent1 = true;
        st.losses.latent1_bits = out.latent_losses[0]->value.data[0];
      }
      if (m.cfg.levels == 3) {
        st.losses.has_cluster = true;
        st.losses.cluster_bits = out.latent_losses[1]->value.data[0];
      }
      st.losses.raw_bits = closed_form_raw_bits(m.cfg, stack.patches);
      st.bpsp = st.losses.total_bits() / static_cast<double>(subpix);
      history.push_back(st);
      if (log.is_open()) {
        nlohmann::json j;
        j["epoch"] = epoch;
        j["step"] = step;
        j["lr"] = lr;
        j["bpsp"] = st.bpsp;
        j["L_r"] = st.losses.residual_bits / subpix;
        if (st.losses.has_latent1) j["L_zq1"] = st.losses.latent1_bits / subpix;
        if (st.losses.has_cluster) j["L_cluster"] = st.losses.cluster_bits / subpix;
        j["L_raw"] = st.losses.raw_bits / subpix;
        log << j.dump() << "\n";
        log.flush();
      }
      if (opt.verbose)
        std::fprintf(stderr, "epoch %d step %d lr %.3g bpsp %.4f\n", epoch, step, lr, st.bpsp);
      ++step;
    }
    if (!opt.checkpoint_dir.empty())
      save_checkpoint(opt.checkpoint_dir + "/epoch_" + std::to_string(epoch) + ".ckpt", m);
  }
  return history;
}

EvalEntry eval_image(Model& m, const RgbImage& img, const std::string& name) {
  EvalEntry e;
  e.name = name;
  e.height = img.height;
  e.width = img.width;
  auto t0 = std::chrono::steady_clock::now();
  try {
    CompressResult r = compress_image(m, img);
    e.bpsp = 8.0 * static_cast<double>(r.blob.size()) / (3.0 * img.height * img.width);
    e.stream_bits = r.stream_bits;
    e.ok = true;
  } catch (const std::exception& ex) {
    e.error = ex.what();
  }
  e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return e;
}

InspectArtifacts inspect_image(Model& m, const RgbImage& img) {
  ResidualStack stack = preprocess_image(img, m.cfg.patch_size);
  Graph g;
  ForwardOutput out = forward_full(g, m, stack.symbols, false);
  InspectArtifacts a;
  a.grid_h = (img.height + m.cfg.patch_size - 1) / m.cfg.patch_size;
  a.grid_w = (img.width + m.cfg.patch_size - 1) / m.cfg.patch_size;
  a.c_fixed = out.c_fixed;
  a.zs = dequantize_symbols(out.zs_symbols, m.cfg.quant_levels, out.zs_symbols.shape);
  a.zf3 = out.zf3;
  for (int64_t p = 0; p < stack.patches; ++p) {
    int best = 0;
    for (int k = 1; k < m.cfg.clusters; ++k)
      if (out.c_fixed.at2(p, k) > out.c_fixed.at2(p, best)) best = k;
    a.cluster_of_patch.push_back(best);
  }
  return a;
}

}  // namespace gollic
