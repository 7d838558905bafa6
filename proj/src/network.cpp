#include "gollic/network.hpp"

#include <json.hpp>

#include "gollic/rng.hpp"

namespace gollic {

void ModelConfig::validate() const {
  if (levels < 1 || levels > 3) throw ShapeError("config: levels must be 1..3");
  if (patch_size < 8 || patch_size % 8 != 0)
    throw ShapeError("config: patch_size must be a positive multiple of 8");
  if (patch_size % (1 << (levels + 1)) != 0)
    throw ShapeError("config: patch_size not divisible by 2^(levels+1)");
  if (clusters < 1) throw ShapeError("config: clusters must be >= 1");
  if (feature_channels < 1 || latent_channels < 1) throw ShapeError("config: channels must be >= 1");
  if (mixtures < 1) throw ShapeError("config: mixtures must be >= 1");
  if (quant_levels < 2) throw ShapeError("config: quant_levels must be >= 2");
  if (resnet_blocks < 1) throw ShapeError("config: resnet_blocks must be >= 1");
  if (!(sigma_q > 0)) throw ShapeError("config: sigma_q must be positive");
}

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["patch_size"] = patch_size;
  j["clusters"] = clusters;
  j["feature_channels"] = feature_channels;
  j["latent_channels"] = latent_channels;
  j["levels"] = levels;
  j["mixtures"] = mixtures;
  j["quant_levels"] = quant_levels;
  j["resnet_blocks"] = resnet_blocks;
  j["sigma_q"] = sigma_q;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ModelConfig c;  // omitted keys keep the paper-default values
  c.patch_size = j.value("patch_size", c.patch_size);
  c.clusters = j.value("clusters", c.clusters);
  c.feature_channels = j.value("feature_channels", c.feature_channels);
  c.latent_channels = j.value("latent_channels", c.latent_channels);
  c.levels = j.value("levels", c.levels);
  c.mixtures = j.value("mixtures", c.mixtures);
  c.quant_levels = j.value("quant_levels", c.quant_levels);
  c.resnet_blocks = j.value("resnet_blocks", c.resnet_blocks);
  c.sigma_q = j.value("sigma_q", c.sigma_q);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

DlmLayout latent_layout(const ModelConfig& cfg) { return DlmLayout{cfg.mixtures, false}; }
DlmLayout residual_layout(const ModelConfig& cfg) { return DlmLayout{cfg.mixtures, true}; }

Tensor& Model::p(const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ShapeError("unknown parameter " + name);
  return it->second;
}

const Tensor& Model::p(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw ShapeError("unknown parameter " + name);
  return it->second;
}

namespace {

void add_conv(std::map<std::string, Tensor>& ps, const std::string& name, int64_t cout, int64_t cin,
              int64_t k) {
  ps[name + ".w"] = Tensor({cout, cin, k, k});
  ps[name + ".b"] = Tensor({cout});
}

void add_res_chain(std::map<std::string, Tensor>& ps, const std::string& prefix, int blocks,
                   int64_t ch) {
  for (int j = 0; j < blocks; ++j) {
    add_conv(ps, prefix + ".res" + std::to_string(j) + ".c1", ch, ch, 3);
    add_conv(ps, prefix + ".res" + std::to_string(j) + ".c2", ch, ch, 3);
  }
}

int64_t fan_in_of(const std::string& name, const Tensor& t) {
  if (name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0) {
    // bias: fan-in of the layer it belongs to is not recoverable here, use 1
    return 1;
  }
  if (t.rank() == 4) return t.dim(1) * t.dim(2) * t.dim(3);
  if (t.rank() == 2) return t.dim(0);
  return t.numel();
}

}  // namespace

void Model::init() {
  cfg.validate();
  params.clear();
  const int64_t cf = cfg.feature_channels, cd = cfg.latent_channels;
  for (int i = 1; i <= cfg.levels; ++i) {
    std::string e = "enc" + std::to_string(i);
    add_conv(params, e + ".head", cf, i == 1 ? 3 : cf, 3);
    add_conv(params, e + ".down", cf, cf, 5);
    add_res_chain(params, e, cfg.resnet_blocks, cf);
    if (i < cfg.levels) add_conv(params, e + ".lat", cd, cf, 3);
  }
  add_conv(params, "cls.c1", cf, cf, 3);
  add_conv(params, "cls.c2", cd, cf, 5);
  int64_t half = cfg.level_size(cfg.levels) / 2;
  params["cls.fc.w"] = Tensor({cd * half * half, cfg.clusters});
  params["cls.fc.b"] = Tensor({cfg.clusters});
  add_res_chain(params, "clu", 1, cf);
  add_conv(params, "clu.proj", cd, cf, 3);
  for (int i = cfg.levels; i >= 1; --i) {
    std::string d = "dec" + std::to_string(i);
    add_conv(params, d + ".h1", cf, cd, 1);
    add_conv(params, d + ".h2", cf, cf, 1);
    add_res_chain(params, d, cfg.resnet_blocks, cf);
    add_conv(params, d + ".up", 4 * cf, cf, 3);
    int pc = i > 1 ? latent_layout(cfg).param_channels(static_cast<int>(cd))
                   : residual_layout(cfg).param_channels(3);
    add_conv(params, d + ".dlm", pc, cf, 1);
  }
  Rng rng(cfg.seed);
  for (auto& [name, t] : params) {
    float bound = 1.0f / std::sqrt(static_cast<float>(fan_in_of(name, t)));
    // latent projections start small: quantized latents then begin near the
    // grid center, so their code streams are cheap before the priors adapt
    if ((name.size() >= 6 && name.compare(name.size() - 6, 6, ".lat.w") == 0) ||
        name == "clu.proj.w")
      bound *= 0.125f;
    if (name.compare(name.size() - 2, 2, ".b") == 0) {
      for (auto& v : t.data) v = 0.0f;
      continue;
    }
    for (auto& v : t.data) v = rng.uniformf(-bound, bound);
  }
  // latent mixture heads start with log-scales well below the quantization
  // step: a unit-scale logistic costs ~5.2 bits per 25-level symbol before any
  // training, which swamps the code length at small step counts. With the
  // small projection init above the latents start near the grid center, so a
  // tight prior is cheap immediately and the scales widen only where needed.
  DlmLayout lat = latent_layout(cfg);
  for (int i = 2; i <= cfg.levels; ++i) {
    Tensor& b = p("dec" + std::to_string(i) + ".dlm.b");
    for (int64_t c = 0; c < cd; ++c)
      for (int k = 0; k < lat.mixtures; ++k)
        b.data[static_cast<size_t>(lat.lam_off(static_cast<int>(c)) + k)] = -4.0f;
  }
}

IntTensor quantize_symbols(const Tensor& x, int levels) {
  IntTensor out;
  out.shape = x.shape;
  out.data.resize(x.data.size());
  for (size_t i = 0; i < x.data.size(); ++i)
    out.data[i] = Graph::hard_symbol(x.data[i], levels);
  return out;
}

Tensor dequantize_symbols(const IntTensor& s, int levels, const std::vector<int64_t>& shape) {
  if (Tensor::count(shape) != s.numel())
    throw ShapeError("dequantize_symbols: element count mismatch");
  Tensor out;
  out.shape = shape;
  out.data.resize(s.data.size());
  for (size_t i = 0; i < s.data.size(); ++i) {
    if (s.data[i] < 0 || s.data[i] >= levels)
      throw ShapeError("dequantize_symbols: symbol out of range");
    out.data[i] = Graph::grid_value(s.data[i], levels);
  }
  return out;
}

Graph::Node* ParamCache::operator()(const std::string& name) {
  auto it = nodes_.find(name);
  if (it != nodes_.end()) return it->second;
  Graph::Node* n = g_.leaf(m_.p(name), requires_grad_, name);
  nodes_.emplace(name, n);
  return n;
}

namespace {

Graph::Node* conv(Graph& g, ParamCache& P, const std::string& name, Graph::Node* x, int64_t stride,
                  int64_t pad) {
  return g.conv2d(x, P(name + ".w"), P(name + ".b"), stride, pad);
}

Graph::Node* res_chain(Graph& g, ParamCache& P, const std::string& prefix, int blocks,
                       Graph::Node* x) {
  for (int j = 0; j < blocks; ++j) {
    std::string b = prefix + ".res" + std::to_string(j);
    Graph::Node* h = conv(g, P, b + ".c1", x, 1, 1);
    h = g.relu(h);
    h = conv(g, P, b + ".c2", h, 1, 1);
    x = g.add(x, h);
  }
  return x;
}

struct StageNodes {
  Graph::Node* zf;
  Graph::Node* dlm;
};

// Decoder stage `level`: conv1x1 head on the C_d-channel latent input, sum
// with the carry features when present, ResNet chain, upsample by 2, then
// the 1x1 mixture-parameter head on the upsampled features.
StageNodes decoder_stage_graph(Graph& g, ParamCache& P, const ModelConfig& cfg, int level,
                               Graph::Node* carry, Graph::Node* latent_cd) {
  std::string d = "dec" + std::to_string(level);
  Graph::Node* h = conv(g, P, d + ".h1", latent_cd, 1, 0);
  h = conv(g, P, d + ".h2", h, 1, 0);
  if (carry) h = g.add(h, carry);
  h = res_chain(g, P, d, cfg.resnet_blocks, h);
  Graph::Node* up = conv(g, P, d + ".up", h, 1, 1);
  Graph::Node* zf = g.pixel_shuffle(up, 2);
  Graph::Node* dlm = conv(g, P, d + ".dlm", zf, 1, 0);
  return {zf, dlm};
}

constexpr float kClusterEps = 1.0f / 4096.0f;  // empty-cluster fallback threshold

}  // namespace

ForwardOutput forward_full(Graph& g, Model& m, const IntTensor& stack, bool training) {
  const ModelConfig& cfg = m.cfg;
  cfg.validate();
  if (stack.rank() != 4 || stack.dim(1) != 3 || stack.dim(2) != cfg.patch_size ||
      stack.dim(3) != cfg.patch_size)
    throw ShapeError("forward: expected [P,3,N,N] residual stack, got " + shape_str(stack.shape));
  ParamCache P(g, m, training);
  const int64_t patches = stack.dim(0);

  Tensor xin;
  xin.shape = stack.shape;
  xin.data.resize(stack.data.size());
  Alphabet residual_ab{256};
  for (size_t i = 0; i < stack.data.size(); ++i)
    xin.data[i] = static_cast<float>(residual_ab.value(stack.data[i]));
  Graph::Node* x = g.leaf(std::move(xin), false, "input");

  ForwardOutput out;
  std::vector<Graph::Node*> zq_values(static_cast<size_t>(cfg.levels), nullptr);
  out.zq_symbols.resize(static_cast<size_t>(cfg.levels > 1 ? cfg.levels - 1 : 0));
  out.dlm_latent.resize(out.zq_symbols.size());
  out.latent_losses.resize(out.zq_symbols.size(), nullptr);

  Graph::Node* feat = x;
  for (int i = 1; i <= cfg.levels; ++i) {
    std::string e = "enc" + std::to_string(i);
    Graph::Node* h = conv(g, P, e + ".head", feat, 1, 1);
    h = conv(g, P, e + ".down", h, 2, 2);
    feat = res_chain(g, P, e, cfg.resnet_blocks, h);
    out.encoder_features.push_back(feat);
    if (i < cfg.levels) {
      Graph::Node* lat = conv(g, P, e + ".lat", feat, 1, 1);
      out.zq_symbols[static_cast<size_t>(i - 1)] = quantize_symbols(lat->value, cfg.quant_levels);
      zq_values[static_cast<size_t>(i - 1)] = g.quantize_st(lat, cfg.quant_levels, cfg.sigma_q);
    }
  }

  // clustering at the bottom level
  Graph::Node* z_bottom = feat;
  Graph::Node* cls = conv(g, P, "cls.c1", z_bottom, 1, 1);
  cls = g.relu(cls);
  cls = conv(g, P, "cls.c2", cls, 2, 2);
  int64_t flat = cls->value.numel() / patches;
  cls = g.reshape(cls, {patches, flat});
  cls = g.fully_connected(cls, P("cls.fc.w"), P("cls.fc.b"));
  Graph::Node* c_node = g.fixed_point_rows(g.softmax(cls));

  out.c_fixed = c_node->value;
  out.c_words.resize(static_cast<size_t>(out.c_fixed.numel()));
  for (int64_t i = 0; i < out.c_fixed.numel(); ++i)
    out.c_words[static_cast<size_t>(i)] =
        static_cast<uint16_t>(std::lround(out.c_fixed.data[static_cast<size_t>(i)] * 65535.0f));

  Graph::Node* hb = res_chain(g, P, "clu", 1, z_bottom);
  hb = conv(g, P, "clu.proj", hb, 1, 1);
  int64_t latlen = cfg.shared_latent_len();
  Graph::Node* h3 = g.reshape(hb, {patches, latlen});
  Graph::Node* zs = g.cluster_weighted_mean(c_node, h3, kClusterEps);
  out.zs_symbols = quantize_symbols(zs->value, cfg.quant_levels);
  Graph::Node* zsq = g.quantize_st(zs, cfg.quant_levels, cfg.sigma_q);
  int64_t n_bot = cfg.level_size(cfg.levels);
  Graph::Node* zf3 = g.reshape(g.matmul(c_node, zsq),
                               {patches, cfg.latent_channels, n_bot, n_bot});
  out.zf3 = zf3->value;

  Alphabet latent_ab{cfg.quant_levels};
  Graph::Node* carry = nullptr;
  Graph::Node* latent_in = zf3;
  for (int i = cfg.levels; i >= 1; --i) {
    StageNodes st = decoder_stage_graph(g, P, cfg, i, carry, latent_in);
    if (i > 1) {
      size_t li = static_cast<size_t>(i - 2);  // predicts z_Q(i-1)
      out.dlm_latent[li] = st.dlm->value;
      out.latent_losses[li] = dlm_nll_bits<float>(g, st.dlm, zq_values[li], out.zq_symbols[li],
                                                  latent_ab, latent_layout(cfg));
      carry = st.zf;
      latent_in = zq_values[li];
    } else {
      out.dlm_residual = st.dlm->value;
      out.loss_r =
          dlm_nll_bits<float>(g, st.dlm, nullptr, stack, residual_ab, residual_layout(cfg));
    }
  }
  out.param_nodes = P.nodes();
  return out;
}

Tensor reconstruct_zf3_values(Model& m, const Tensor& c_fixed, const IntTensor& zs_syms) {
  const ModelConfig& cfg = m.cfg;
  int64_t patches = c_fixed.dim(0);
  int64_t latlen = cfg.shared_latent_len();
  Tensor zsq = dequantize_symbols(zs_syms, cfg.quant_levels, {cfg.clusters, latlen});
  Graph g;
  Graph::Node* c = g.leaf(c_fixed);
  Graph::Node* z = g.leaf(std::move(zsq));
  int64_t n = cfg.level_size(cfg.levels);
  return g.reshape(g.matmul(c, z), {patches, cfg.latent_channels, n, n})->value;
}

StageOutput run_decoder_stage(Model& m, int level, const Tensor* carry, const Tensor& latent_cd) {
  Graph g;
  ParamCache P(g, m, false);
  Graph::Node* carry_n = carry ? g.leaf(*carry) : nullptr;
  Graph::Node* lat_n = g.leaf(latent_cd);
  StageNodes st = decoder_stage_graph(g, P, m.cfg, level, carry_n, lat_n);
  return {st.zf->value, st.dlm->value};
}

}  // namespace gollic
