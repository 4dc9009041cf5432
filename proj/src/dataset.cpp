#include "locref/dataset.hpp"

#include <stdexcept>

#include "locref/png_io.hpp"

namespace locref {

LoadedSample load_sample(const DatasetManifest& m, const SampleRecord& r) {
  LoadedSample s;
  try {
    s.t1 = read_image_png(m.resolve(r.t1));
    s.t2 = read_image_png(m.resolve(r.t2));
    s.label = read_mask_png(m.resolve(r.label));
  } catch (const std::exception& e) {
    throw std::runtime_error("sample " + r.id + ": " + e.what());
  }
  if (!s.t1.same_shape(s.t2)) throw std::runtime_error("sample " + r.id + ": acquisitions differ in shape");
  if (s.label.h != s.t1.h || s.label.w != s.t1.w)
    throw std::runtime_error("sample " + r.id + ": label dimensions differ");
  return s;
}

NormalizeMode normalize_mode_from_string(const std::string& s) {
  if (s == "unit") return NormalizeMode::kUnit;
  if (s == "standardized") return NormalizeMode::kStandardized;
  throw std::invalid_argument("unknown normalize mode: " + s + " (expected unit|standardized)");
}

Image normalize(const Image& tile, NormalizeMode mode, const NormalizeParams& params) {
  if (mode == NormalizeMode::kUnit) return tile;
  if (tile.c != 3) throw std::invalid_argument("normalize: standardized mode expects 3 channels");
  Image out = tile;
  for (int c = 0; c < 3; ++c) {
    const double mean = params.mean[static_cast<size_t>(c)];
    const double inv = 1.0 / params.stddev[static_cast<size_t>(c)];
    for (int y = 0; y < tile.h; ++y)
      for (int x = 0; x < tile.w; ++x) out.at(c, y, x) = (tile.at(c, y, x) - mean) * inv;
  }
  return out;
}

Tensor image_to_tensor(const Image& img) {
  Tensor t({1, img.c, img.h, img.w});
  std::copy(img.v.begin(), img.v.end(), t.data());
  return t;
}

Tensor batch_images(const std::vector<const Image*>& batch) {
  if (batch.empty()) throw std::invalid_argument("batch_images: empty batch");
  const Image& first = *batch.front();
  Tensor t({static_cast<int>(batch.size()), first.c, first.h, first.w});
  const long long chw = static_cast<long long>(first.c) * first.h * first.w;
  for (size_t n = 0; n < batch.size(); ++n) {
    if (!batch[n]->same_shape(first)) throw std::invalid_argument("batch_images: mixed shapes");
    std::copy(batch[n]->v.begin(), batch[n]->v.end(), t.data() + static_cast<long long>(n) * chw);
  }
  return t;
}

Tensor batch_masks(const std::vector<const Mask*>& batch) {
  if (batch.empty()) throw std::invalid_argument("batch_masks: empty batch");
  const Mask& first = *batch.front();
  Tensor t({static_cast<int>(batch.size()), 1, first.h, first.w});
  const long long hw = static_cast<long long>(first.h) * first.w;
  for (size_t n = 0; n < batch.size(); ++n) {
    if (!batch[n]->same_shape(first)) throw std::invalid_argument("batch_masks: mixed shapes");
    for (long long i = 0; i < hw; ++i) t[static_cast<long long>(n) * hw + i] = batch[n]->v[static_cast<size_t>(i)];
  }
  return t;
}

ProbMap tensor_to_prob(const Tensor& t, int n) {
  if (t.rank() != 4 || t.dim(1) != 1 || n >= t.dim(0)) throw std::invalid_argument("tensor_to_prob: expected (N,1,H,W)");
  ProbMap p(t.dim(2), t.dim(3));
  const long long hw = static_cast<long long>(t.dim(2)) * t.dim(3);
  for (long long i = 0; i < hw; ++i) p.v[static_cast<size_t>(i)] = t[static_cast<long long>(n) * hw + i];
  return p;
}

}  // namespace locref
