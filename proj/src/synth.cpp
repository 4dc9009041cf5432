#include "locref/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <stdexcept>

#include "locref/png_io.hpp"
#include "locref/rng.hpp"

namespace locref {

namespace fs = std::filesystem;

void SynthConfig::validate() const {
  if (tile_size <= 0 || tile_size % 16) throw std::invalid_argument("synth: tile size must be a positive multiple of 16");
  if (pairs <= 0) throw std::invalid_argument("synth: pairs must be positive");
  if (shapes_min < 0 || shapes_max < shapes_min) throw std::invalid_argument("synth: bad shapes range");
  if (shape_size_min < 2 || shape_size_max < shape_size_min || shape_size_max > tile_size)
    throw std::invalid_argument("synth: bad shape size range");
  if (jitter < 0.0 || jitter >= kSynthShapeDelta / 2.0)
    throw std::invalid_argument("synth: jitter must be below half the shape delta");
}

namespace {

Image textured_background(int size, Rng& rng) {
  Image img(3, size, size);
  for (int c = 0; c < 3; ++c) {
    double f1x = rng.uniform(0.5, 2.0), f1y = rng.uniform(0.5, 2.0), p1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double f2x = rng.uniform(1.0, 4.0), f2y = rng.uniform(1.0, 4.0), p2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    double lo = 1e30, hi = -1e30;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double u = static_cast<double>(x) / size, v = static_cast<double>(y) / size;
        double val = std::cos(2.0 * std::numbers::pi * (f1x * u + f1y * v) + p1) +
                     0.5 * std::cos(2.0 * std::numbers::pi * (f2x * u + f2y * v) + p2);
        img.at(c, y, x) = val;
        lo = std::min(lo, val);
        hi = std::max(hi, val);
      }
    const double span = hi - lo > 1e-12 ? hi - lo : 1.0;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double unit = (img.at(c, y, x) - lo) / span;                 // [0,1]
        const double noisy = 0.2 + 0.6 * unit + rng.uniform(-0.02, 0.02);  // [0.18,0.82]
        img.at(c, y, x) = std::clamp(noisy, 0.2, 0.8);
      }
  }
  return img;
}

// Pixels of an axis-aligned rectangle or inscribed ellipse at (y0,x0).
std::vector<std::pair<int, int>> shape_pixels(bool ellipse, int y0, int x0, int sh, int sw) {
  std::vector<std::pair<int, int>> px;
  if (!ellipse) {
    for (int y = 0; y < sh; ++y)
      for (int x = 0; x < sw; ++x) px.emplace_back(y0 + y, x0 + x);
    return px;
  }
  const double cy = (sh - 1) / 2.0, cx = (sw - 1) / 2.0;
  const double ry = sh / 2.0, rx = sw / 2.0;
  for (int y = 0; y < sh; ++y)
    for (int x = 0; x < sw; ++x) {
      const double dy = (y - cy) / ry, dx = (x - cx) / rx;
      if (dy * dy + dx * dx <= 1.0) px.emplace_back(y0 + y, x0 + x);
    }
  return px;
}

void draw_shape(Image& img, const std::vector<std::pair<int, int>>& px) {
  for (const auto& [y, x] : px)
    for (int c = 0; c < 3; ++c) {
      const double old = img.at(c, y, x);
      img.at(c, y, x) = old < 0.5 ? old + kSynthShapeDelta : old - kSynthShapeDelta;
    }
}

}  // namespace

DatasetManifest synth_generate(const SynthConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  for (const char* sub : {"A", "B", "label"}) fs::create_directories(fs::path(out_dir) / sub);

  Rng rng(cfg.seed);
  DatasetManifest manifest;
  manifest.tile_size = cfg.tile_size;
  manifest.source_tag = "synthetic";

  for (int i = 0; i < cfg.pairs; ++i) {
    Image t1 = textured_background(cfg.tile_size, rng);
    Image t2 = t1;
    Mask label(cfg.tile_size, cfg.tile_size);

    const int shapes = rng.range(cfg.shapes_min, cfg.shapes_max);
    for (int s = 0; s < shapes; ++s) {
      // Rejection placement keeps shapes disjoint so every labelled pixel is
      // a genuine difference.
      for (int attempt = 0; attempt < 20; ++attempt) {
        const int sh = rng.range(cfg.shape_size_min, cfg.shape_size_max);
        const int sw = rng.range(cfg.shape_size_min, cfg.shape_size_max);
        const int y0 = rng.range(0, cfg.tile_size - sh);
        const int x0 = rng.range(0, cfg.tile_size - sw);
        const bool ellipse = rng.next_u32() & 1u;
        const auto px = shape_pixels(ellipse, y0, x0, sh, sw);
        bool clear = true;
        for (const auto& [y, x] : px)
          if (label.at(y, x)) {
            clear = false;
            break;
          }
        if (!clear) continue;
        const bool removed = rng.next_u32() & 1u;  // removed: present only in the first acquisition
        draw_shape(removed ? t1 : t2, px);
        for (const auto& [y, x] : px) label.at(y, x) = 1;
        break;
      }
    }

    const double shift = rng.uniform(-cfg.jitter, cfg.jitter);
    for (auto& v : t2.v) v = std::clamp(v + shift, 0.0, 1.0);

    char name[32];
    std::snprintf(name, sizeof(name), "synth_%04d.png", i);
    write_image_png((fs::path(out_dir) / "A" / name).string(), t1);
    write_image_png((fs::path(out_dir) / "B" / name).string(), t2);
    write_mask_png((fs::path(out_dir) / "label" / name).string(), label);

    SampleRecord rec;
    rec.id = fs::path(name).stem().string();
    rec.t1 = std::string("A/") + name;
    rec.t2 = std::string("B/") + name;
    rec.label = std::string("label/") + name;
    manifest.records.push_back(std::move(rec));
  }
  manifest.base_dir = out_dir;
  return manifest;
}

}  // namespace locref
