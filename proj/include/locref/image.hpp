#pragma once

#include <cstdint>
#include <vector>

namespace locref {

// Channel-major (c,h,w) image with intensities in [0,1].
struct Image {
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Image() = default;
  Image(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, 0.0) {}

  double& at(int ci, int y, int x) { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }
  double at(int ci, int y, int x) const { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }
  bool same_shape(const Image& o) const { return c == o.c && h == o.h && w == o.w; }
};

// Binary mask over {0,1}; 1 marks a changed pixel.
struct Mask {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> v;

  Mask() = default;
  Mask(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, 0) {}

  std::uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
  std::uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
  bool same_shape(const Mask& o) const { return h == o.h && w == o.w; }
  long long count() const;  // number of set pixels
};

// Per-pixel change probability in [0,1].
struct ProbMap {
  int h = 0;
  int w = 0;
  std::vector<double> v;

  ProbMap() = default;
  ProbMap(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, 0.0) {}

  double& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
  double at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
};

// |a - b| per pixel and channel. Throws std::invalid_argument on shape mismatch.
Image difference_image(const Image& a, const Image& b);

// mask = 1 where prob >= threshold (inclusive). threshold must lie in (0,1).
Mask binarize(const ProbMap& prob, double threshold = 0.5);

// Changed pixels with at least one unchanged 4-neighbour: m minus its
// 4-neighbourhood erosion. Pixels on the image border count as boundary.
Mask boundary_extract(const Mask& m);

}  // namespace locref
