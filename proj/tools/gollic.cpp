#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "gollic/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gollic;

namespace {

std::vector<std::string> list_images(const std::string& dir) {
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    if (ext == ".png" || ext == ".ppm") paths.push_back(e.path().string());
  }
  std::sort(paths.begin(), paths.end());
  return paths;
}

ModelConfig load_config(const std::string& path) {
  auto bytes = read_file(path);
  return ModelConfig::from_json(std::string(bytes.begin(), bytes.end()));
}

std::vector<ResidualStack> load_training_stacks(const std::string& dir, int64_t patch_size) {
  std::vector<ResidualStack> stacks;
  for (const auto& p : list_images(dir)) {
    try {
      stacks.push_back(preprocess_image(load_image(p), patch_size));
    } catch (const std::exception& ex) {
      std::fprintf(stderr, "warning: skipping %s: %s\n", p.c_str(), ex.what());
    }
  }
  return stacks;
}

std::string bpsp_or_dash(bool present, double bits, double subpix) {
  if (!present) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", bits / subpix);
  return buf;
}

void write_eval_csv(const std::string& path, const std::vector<EvalEntry>& entries) {
  std::string csv = "name,height,width,bpsp,L_r,L_zq1,L_cluster,L_raw,seconds,error\n";
  double sum = 0;
  int n = 0;
  for (const auto& e : entries) {
    double subpix = 3.0 * e.height * e.width;
    csv += e.name + "," + std::to_string(e.height) + "," + std::to_string(e.width) + ",";
    if (e.ok) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6f", e.bpsp);
      csv += buf;
      csv += "," + bpsp_or_dash(true, e.stream_bits.residual_bits, subpix);
      csv += "," + bpsp_or_dash(e.stream_bits.has_latent1, e.stream_bits.latent1_bits, subpix);
      csv += "," + bpsp_or_dash(e.stream_bits.has_cluster, e.stream_bits.cluster_bits, subpix);
      csv += "," + bpsp_or_dash(true, e.stream_bits.raw_bits, subpix);
      sum += e.bpsp;
      ++n;
    } else {
      csv += "-,-,-,-,-";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", e.seconds);
    csv += std::string(",") + buf + "," + e.error + "\n";
  }
  if (n > 0) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "mean,,,%.6f,,,,,,\n", sum / n);
    csv += buf;
  }
  write_file(path, std::vector<uint8_t>(csv.begin(), csv.end()));
}

void save_gray(const std::string& path, const float* data, int64_t h, int64_t w) {
  // [-1,1] -> [0,255]
  PlanarImage img(h, w, 1);
  for (int64_t i = 0; i < h * w; ++i) {
    float v = data[i] * 127.5f + 127.5f;
    if (v < 0) v = 0;
    if (v > 255) v = 255;
    img.data[static_cast<size_t>(i)] = static_cast<uint8_t>(std::lround(v));
  }
  save_pgm(path, img, 0);
}

int run_inspect(const std::string& in, const std::string& model_path, const std::string& out_dir) {
  Model m = load_checkpoint(model_path);
  RgbImage img = load_image(in);
  InspectArtifacts a = inspect_image(m, img);
  fs::create_directories(out_dir);

  static const uint8_t palette[8][3] = {{230, 25, 75},  {60, 180, 75},   {255, 225, 25},
                                        {0, 130, 200},  {245, 130, 48},  {145, 30, 180},
                                        {70, 240, 240}, {128, 128, 128}};
  RgbImage cmap;
  cmap.height = a.grid_h;
  cmap.width = a.grid_w;
  cmap.samples.resize(static_cast<size_t>(a.grid_h * a.grid_w * 3));
  for (int64_t p = 0; p < a.grid_h * a.grid_w; ++p) {
    const uint8_t* col = palette[a.cluster_of_patch[static_cast<size_t>(p)] % 8];
    for (int c = 0; c < 3; ++c)
      cmap.samples[static_cast<size_t>(p * 3 + c)] = col[c];
  }
  save_ppm(out_dir + "/cluster_map.ppm", cmap);

  int64_t n = m.cfg.level_size(m.cfg.levels);
  int64_t cd = m.cfg.latent_channels;
  for (int k = 0; k < m.cfg.clusters; ++k) {
    // C_d channel grids side by side
    Tensor strip({n, cd * n});
    for (int64_t c = 0; c < cd; ++c)
      for (int64_t y = 0; y < n; ++y)
        for (int64_t x = 0; x < n; ++x)
          strip.at2(y, c * n + x) = a.zs.at2(k, (c * n + y) * n + x);
    save_gray(out_dir + "/zs_cluster" + std::to_string(k) + ".pgm", strip.data.data(), n, cd * n);
  }
  for (int64_t c = 0; c < cd; ++c) {
    Tensor mosaic({a.grid_h * n, a.grid_w * n});
    for (int64_t p = 0; p < a.grid_h * a.grid_w; ++p) {
      int64_t y0 = (p / a.grid_w) * n, x0 = (p % a.grid_w) * n;
      for (int64_t y = 0; y < n; ++y)
        for (int64_t x = 0; x < n; ++x) mosaic.at2(y0 + y, x0 + x) = a.zf3.at4(p, c, y, x);
    }
    save_gray(out_dir + "/zf3_chan" + std::to_string(c) + ".pgm", mosaic.data.data(),
              a.grid_h * n, a.grid_w * n);
  }
  std::printf("wrote diagnostics for %lld patches to %s\n",
              static_cast<long long>(a.grid_h * a.grid_w), out_dir.c_str());
  return 0;
}

int run_sweep(const std::string& spec_path) {
  auto bytes = read_file(spec_path);
  nlohmann::json spec = nlohmann::json::parse(std::string(bytes.begin(), bytes.end()));
  std::string data_dir = spec.at("data").get<std::string>();
  std::string out_csv = spec.value("out", std::string("sweep.csv"));
  int epochs = spec.value("epochs", 3);
  std::string csv = "patch_size,clusters,levels,feature_channels,bpsp,L_r,L_zq1,L_cluster,L_raw,error\n";
  for (const auto& jc : spec.at("configs")) {
    ModelConfig cfg = ModelConfig::from_json(jc.dump());
    std::string row = std::to_string(cfg.patch_size) + "," + std::to_string(cfg.clusters) + "," +
                      std::to_string(cfg.levels) + "," + std::to_string(cfg.feature_channels);
    try {
      auto stacks = load_training_stacks(data_dir, cfg.patch_size);
      Model m;
      m.cfg = cfg;
      m.init();
      TrainOptions topt;
      topt.epochs = epochs;
      train_model(m, stacks, topt);
      double bpsp = 0, lr_b = 0, lz1 = 0, lcl = 0, lraw = 0, subpix = 0;
      bool has1 = false, hasc = false;
      int count = 0;
      for (const auto& p : list_images(data_dir)) {
        RgbImage img = load_image(p);
        EvalEntry e = eval_image(m, img, p);
        if (!e.ok) continue;
        bpsp += e.bpsp;
        subpix = 3.0 * e.height * e.width;
        lr_b += e.stream_bits.residual_bits / subpix;
        if (e.stream_bits.has_latent1) { has1 = true; lz1 += e.stream_bits.latent1_bits / subpix; }
        if (e.stream_bits.has_cluster) { hasc = true; lcl += e.stream_bits.cluster_bits / subpix; }
        lraw += e.stream_bits.raw_bits / subpix;
        ++count;
      }
      if (count == 0) throw CodecError("no images evaluated");
      char buf[160];
      std::snprintf(buf, sizeof buf, ",%.6f,%.6f,", bpsp / count, lr_b / count);
      row += buf;
      row += has1 ? (std::snprintf(buf, sizeof buf, "%.6f", lz1 / count), std::string(buf))
                  : std::string("-");
      row += ",";
      row += hasc ? (std::snprintf(buf, sizeof buf, "%.6f", lcl / count), std::string(buf))
                  : std::string("-");
      std::snprintf(buf, sizeof buf, ",%.6f,", lraw / count);
      row += buf;
    } catch (const std::exception& ex) {
      row += ",-,-,-,-,-," + std::string(ex.what());
    }
    csv += row + "\n";
    std::fprintf(stderr, "sweep: finished N=%d K=%d levels=%d\n", cfg.patch_size, cfg.clusters,
                 cfg.levels);
  }
  write_file(out_csv, std::vector<uint8_t>(csv.begin(), csv.end()));
  std::printf("wrote %s\n", out_csv.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gollic: hierarchical-latent lossless image codec"};
  app.require_subcommand(1);

  std::string data_dir, out_path, config_path, in_path, model_path, report_path, spec_path;
  std::string log_path, ckpt_dir;
  uint64_t seed = 0;
  bool seed_set = false;
  int epochs = 50;
  double lr = 1e-4;
  bool verbose = false;

  auto* train = app.add_subcommand("train", "train a model on a directory of images");
  train->add_option("--data", data_dir, "training image directory")->required();
  train->add_option("--out", out_path, "output checkpoint path")->required();
  train->add_option("--config", config_path, "model config JSON")->required();
  train->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) {
    seed_set = true;
  });
  train->add_option("--epochs", epochs, "training epochs (default 50)");
  train->add_option("--lr", lr, "initial learning rate (default 1e-4)");
  train->add_option("--log", log_path, "line-JSON step log path");
  train->add_option("--checkpoint-dir", ckpt_dir, "per-epoch checkpoint directory");
  train->add_flag("--verbose", verbose, "log each step to stderr");

  auto* compress = app.add_subcommand("compress", "compress one image to a .glc container");
  compress->add_option("--in", in_path, "input image (PNG or PPM)")->required();
  compress->add_option("--model", model_path, "checkpoint path")->required();
  compress->add_option("--out", out_path, "output .glc path")->required();

  auto* decompress = app.add_subcommand("decompress", "decode a .glc container");
  decompress->add_option("--in", in_path, "input .glc path")->required();
  decompress->add_option("--model", model_path, "checkpoint path")->required();
  decompress->add_option("--out", out_path, "output image (PNG or PPM)")->required();

  auto* eval = app.add_subcommand("eval", "compress a directory and report bpsp");
  eval->add_option("--data", data_dir, "image directory")->required();
  eval->add_option("--model", model_path, "checkpoint path")->required();
  eval->add_option("--report", report_path, "output CSV path")->required();

  auto* baseline = app.add_subcommand("entropy-baseline",
                                      "first-order entropy of preprocessed residuals");
  baseline->add_option("--data", data_dir, "image directory")->required();

  auto* inspect = app.add_subcommand("inspect", "dump cluster map and latent visualizations");
  inspect->add_option("--in", in_path, "input image")->required();
  inspect->add_option("--model", model_path, "checkpoint path")->required();
  inspect->add_option("--out", out_path, "output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "train/eval a list of configs, emit CSV");
  sweep->add_option("--spec", spec_path, "sweep spec JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      ModelConfig cfg = load_config(config_path);
      if (seed_set) cfg.seed = seed;
      Model m;
      m.cfg = cfg;
      m.init();
      auto stacks = load_training_stacks(data_dir, cfg.patch_size);
      if (stacks.empty()) throw CodecError("no readable images in " + data_dir);
      TrainOptions topt;
      topt.epochs = epochs;
      topt.lr = static_cast<float>(lr);
      topt.log_path = log_path;
      topt.checkpoint_dir = ckpt_dir;
      topt.verbose = verbose;
      auto hist = train_model(m, stacks, topt);
      save_checkpoint(out_path, m);
      std::printf("trained %d epochs (%zu steps), final bpsp estimate %.4f, saved %s\n", epochs,
                  hist.size(), hist.empty() ? 0.0 : hist.back().bpsp, out_path.c_str());
    } else if (compress->parsed()) {
      Model m = load_checkpoint(model_path);
      RgbImage img = load_image(in_path);
      CompressResult r = compress_image(m, img);
      write_file(out_path, r.blob);
      std::printf("%s: %zu bytes, %.4f bpsp\n", out_path.c_str(), r.blob.size(),
                  8.0 * r.blob.size() / (3.0 * img.height * img.width));
    } else if (decompress->parsed()) {
      Model m = load_checkpoint(model_path);
      RgbImage img = decompress_image(m, read_file(in_path));
      save_image(out_path, img);
      std::printf("%s: %lldx%lld\n", out_path.c_str(), static_cast<long long>(img.width),
                  static_cast<long long>(img.height));
    } else if (eval->parsed()) {
      Model m = load_checkpoint(model_path);
      std::vector<EvalEntry> entries;
      for (const auto& p : list_images(data_dir)) {
        RgbImage img = load_image(p);
        entries.push_back(eval_image(m, img, fs::path(p).filename().string()));
        const auto& e = entries.back();
        if (e.ok)
          std::printf("%s: %.4f bpsp (%.2fs)\n", e.name.c_str(), e.bpsp, e.seconds);
        else
          std::fprintf(stderr, "%s: FAILED: %s\n", e.name.c_str(), e.error.c_str());
      }
      write_eval_csv(report_path, entries);
      double sum = 0;
      int n = 0;
      for (const auto& e : entries)
        if (e.ok) {
          sum += e.bpsp;
          ++n;
        }
      if (n) std::printf("mean bpsp: %.4f over %d images\n", sum / n, n);
    } else if (baseline->parsed()) {
      double sum = 0;
      int n = 0;
      for (const auto& p : list_images(data_dir)) {
        double b = first_order_entropy_bpsp(load_image(p));
        std::printf("%s: %.4f bpsp\n", fs::path(p).filename().string().c_str(), b);
        sum += b;
        ++n;
      }
      if (n) std::printf("mean first-order entropy: %.4f bpsp over %d images\n", sum / n, n);
    } else if (inspect->parsed()) {
      return run_inspect(in_path, model_path, out_path);
    } else if (sweep->parsed()) {
      return run_sweep(spec_path);
    }
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
