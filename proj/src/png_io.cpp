#include "locref/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace locref {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& what, const std::string& path) {
  throw std::runtime_error(what + ": " + path);
}

// Decodes to 8-bit gray or RGB rows.
void read_png_rows(const std::string& path, int& h, int& w, int& channels, std::vector<std::uint8_t>& rows) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) fail("cannot open PNG", path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("png_create_read_struct failed", path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail("png_create_info_struct failed", path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("PNG decode error", path);
  }

  png_init_io(png, f.get());
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int out_channels = static_cast<int>(png_get_channels(png, info));
  if (out_channels != 1 && out_channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("unsupported PNG channel layout", path);
  }

  h = static_cast<int>(height);
  w = static_cast<int>(width);
  channels = out_channels;
  rows.assign(static_cast<size_t>(h) * w * channels, 0);

  std::vector<png_bytep> row_ptrs(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y) row_ptrs[static_cast<size_t>(y)] = rows.data() + static_cast<size_t>(y) * w * channels;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
}

void write_png_rows(const std::string& path, int h, int w, int channels, const std::uint8_t* rows) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) fail("cannot create PNG", path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail("png_create_write_struct failed", path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail("png_create_info_struct failed", path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("PNG encode error", path);
  }

  png_init_io(png, f.get());
  const int color_type = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_bytep> row_ptrs(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y)
    row_ptrs[static_cast<size_t>(y)] = const_cast<png_bytep>(rows + static_cast<size_t>(y) * w * channels);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::uint8_t to_byte(double v) {
  if (v <= 0.0) return 0;
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

}  // namespace

Image read_image_png(const std::string& path) {
  int h = 0, w = 0, channels = 0;
  std::vector<std::uint8_t> rows;
  read_png_rows(path, h, w, channels, rows);
  Image img(channels, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ci = 0; ci < channels; ++ci)
        img.at(ci, y, x) = rows[(static_cast<size_t>(y) * w + x) * channels + ci] / 255.0;
  return img;
}

Mask read_mask_png(const std::string& path) {
  int h = 0, w = 0, channels = 0;
  std::vector<std::uint8_t> rows;
  read_png_rows(path, h, w, channels, rows);
  Mask m(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      m.at(y, x) = rows[(static_cast<size_t>(y) * w + x) * channels] >= 128 ? 1 : 0;
  return m;
}

void write_image_png(const std::string& path, const Image& img) {
  if (img.c != 1 && img.c != 3) throw std::invalid_argument("write_image_png: expected 1 or 3 channels");
  std::vector<std::uint8_t> rows(static_cast<size_t>(img.h) * img.w * img.c);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int ci = 0; ci < img.c; ++ci)
        rows[(static_cast<size_t>(y) * img.w + x) * img.c + ci] = to_byte(img.at(ci, y, x));
  write_png_rows(path, img.h, img.w, img.c, rows.data());
}

void write_mask_png(const std::string& path, const Mask& m) {
  std::vector<std::uint8_t> rows(m.v.size());
  for (size_t i = 0; i < m.v.size(); ++i) rows[i] = m.v[i] ? 255 : 0;
  write_png_rows(path, m.h, m.w, 1, rows.data());
}

void write_prob_png(const std::string& path, const ProbMap& p) {
  std::vector<std::uint8_t> rows(p.v.size());
  for (size_t i = 0; i < p.v.size(); ++i) rows[i] = to_byte(p.v[i]);
  write_png_rows(path, p.h, p.w, 1, rows.data());
}

void write_gray_png(const std::string& path, int h, int w, const std::vector<std::uint8_t>& gray) {
  write_png_rows(path, h, w, 1, gray.data());
}

void write_rgb_png(const std::string& path, int h, int w, const std::vector<std::uint8_t>& rgb) {
  write_png_rows(path, h, w, 3, rgb.data());
}

}  // namespace locref
