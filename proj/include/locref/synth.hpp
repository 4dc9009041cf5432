#pragma once

#include <cstdint>
#include <string>

#include "locref/manifest.hpp"

namespace locref {

// Deterministic bi-temporal pair generator: textured backgrounds, inserted or
// removed rectangles/ellipses as true change, and a global intensity shift as
// pseudo-change the model must learn to ignore.
struct SynthConfig {
  int tile_size = 64;      // divisible by 16
  int pairs = 8;
  int shapes_min = 1;      // shapes per pair, inclusive range
  int shapes_max = 3;
  int shape_size_min = 6;  // bounding box, px
  int shape_size_max = 16;
  double jitter = 0.05;    // |global shift| applied to the second acquisition
  std::uint64_t seed = 0;

  void validate() const;
};

// Intensity offset applied to shape pixels; must stay well above any jitter so
// labelled pixels always differ more than unlabelled ones.
inline constexpr double kSynthShapeDelta = 0.35;

DatasetManifest synth_generate(const SynthConfig& cfg, const std::string& out_dir);

}  // namespace locref
