#pragma once

#include <array>
#include <string>
#include <vector>

#include "locref/image.hpp"
#include "locref/manifest.hpp"
#include "locref/tensor.hpp"

namespace locref {

struct LoadedSample {
  Image t1, t2;
  Mask label;
};

// Decodes a record's three files; dimension disagreements throw with the
// sample id in the message.
LoadedSample load_sample(const DatasetManifest& m, const SampleRecord& r);

enum class NormalizeMode { kUnit, kStandardized };

NormalizeMode normalize_mode_from_string(const std::string& s);

struct NormalizeParams {
  std::array<double, 3> mean = {0.485, 0.456, 0.406};
  std::array<double, 3> stddev = {0.229, 0.224, 0.225};
};

// kUnit keeps [0,1] intensities as-is; kStandardized applies the fixed
// per-channel affine used by the pretrained backbone weights.
Image normalize(const Image& tile, NormalizeMode mode, const NormalizeParams& params = {});

Tensor image_to_tensor(const Image& img);                      // (1,C,H,W)
Tensor batch_images(const std::vector<const Image*>& batch);   // (N,C,H,W)
Tensor batch_masks(const std::vector<const Mask*>& batch);     // (N,1,H,W) of {0,1}
ProbMap tensor_to_prob(const Tensor& t, int n = 0);            // slice of (N,1,H,W)

}  // namespace locref
