#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "locref/image.hpp"

namespace locref {

// 8-bit PNG codecs. Grayscale files load as 1 channel, color as 3 (alpha dropped).
Image read_image_png(const std::string& path);

// Label files: any 8-bit PNG, first channel thresholded at 128.
Mask read_mask_png(const std::string& path);

void write_image_png(const std::string& path, const Image& img);          // round(255*v)
void write_mask_png(const std::string& path, const Mask& m);              // {0,255}
void write_prob_png(const std::string& path, const ProbMap& p);           // round(255*p)
void write_gray_png(const std::string& path, int h, int w, const std::vector<std::uint8_t>& gray);
void write_rgb_png(const std::string& path, int h, int w, const std::vector<std::uint8_t>& rgb);

}  // namespace locref
