#include "locref/tiling.hpp"

#include <algorithm>
#include <filesystem>
#include <stdexcept>

#include "locref/png_io.hpp"

namespace locref {

namespace fs = std::filesystem;

PadPolicy pad_policy_from_string(const std::string& s) {
  if (s == "ceil") return PadPolicy::kCeil;
  if (s == "floor") return PadPolicy::kFloor;
  throw std::invalid_argument("unknown pad policy: " + s + " (expected ceil|floor)");
}

int tiles_along(int extent, int tile, PadPolicy pad) {
  if (tile <= 0 || extent <= 0) throw std::invalid_argument("tiles_along: nonpositive size");
  return pad == PadPolicy::kCeil ? (extent + tile - 1) / tile : extent / tile;
}

namespace {

Image crop_padded(const Image& src, int y0, int x0, int size) {
  Image tile(src.c, size, size);
  for (int c = 0; c < src.c; ++c)
    for (int y = 0; y < size; ++y) {
      const int sy = y0 + y;
      if (sy >= src.h) break;
      const int xs = std::min(size, src.w - x0);
      for (int x = 0; x < xs; ++x) tile.at(c, y, x) = src.at(c, sy, x0 + x);
    }
  return tile;
}

Mask crop_padded(const Mask& src, int y0, int x0, int size) {
  Mask tile(size, size);
  for (int y = 0; y < size; ++y) {
    const int sy = y0 + y;
    if (sy >= src.h) break;
    const int xs = std::min(size, src.w - x0);
    for (int x = 0; x < xs; ++x) tile.at(y, x) = src.at(sy, x0 + x);
  }
  return tile;
}

}  // namespace

TilingResult tile_dataset(const std::string& src_dir, const std::string& out_dir, const TilingOptions& opt) {
  if (opt.tile_size <= 0) throw std::invalid_argument("tile_dataset: tile size must be positive");
  const fs::path a_dir = fs::path(src_dir) / "A";
  const fs::path b_dir = fs::path(src_dir) / "B";
  const fs::path l_dir = fs::path(src_dir) / "label";
  if (!fs::is_directory(a_dir) || !fs::is_directory(b_dir) || !fs::is_directory(l_dir))
    throw std::invalid_argument("tile_dataset: expected A/, B/ and label/ under " + src_dir);

  for (const char* sub : {"A", "B", "label"}) fs::create_directories(fs::path(out_dir) / sub);

  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(a_dir))
    if (e.is_regular_file() && e.path().extension() == ".png") names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());

  TilingResult result;
  result.manifest.tile_size = opt.tile_size;
  result.manifest.source_tag = opt.source_tag;

  for (const auto& name : names) {
    const std::string id = fs::path(name).stem().string();
    try {
      const fs::path pb = b_dir / name;
      const fs::path pl = l_dir / name;
      if (!fs::exists(pb)) throw std::runtime_error("missing B/" + name);
      if (!fs::exists(pl)) throw std::runtime_error("missing label/" + name);

      const Image t1 = read_image_png((a_dir / name).string());
      const Image t2 = read_image_png(pb.string());
      const Mask label = read_mask_png(pl.string());
      if (!t1.same_shape(t2)) throw std::runtime_error("A/B dimensions differ");
      if (label.h != t1.h || label.w != t1.w) throw std::runtime_error("label dimensions differ");

      const int rows = tiles_along(t1.h, opt.tile_size, opt.pad);
      const int cols = tiles_along(t1.w, opt.tile_size, opt.pad);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          const std::string tile_id = id + "_r" + std::to_string(r) + "_c" + std::to_string(c);
          const std::string fname = tile_id + ".png";
          write_image_png((fs::path(out_dir) / "A" / fname).string(),
                          crop_padded(t1, r * opt.tile_size, c * opt.tile_size, opt.tile_size));
          write_image_png((fs::path(out_dir) / "B" / fname).string(),
                          crop_padded(t2, r * opt.tile_size, c * opt.tile_size, opt.tile_size));
          write_mask_png((fs::path(out_dir) / "label" / fname).string(),
                         crop_padded(label, r * opt.tile_size, c * opt.tile_size, opt.tile_size));
          SampleRecord rec;
          rec.id = tile_id;
          rec.t1 = "A/" + fname;
          rec.t2 = "B/" + fname;
          rec.label = "label/" + fname;
          result.manifest.records.push_back(std::move(rec));
        }
    } catch (const std::exception& e) {
      result.errors.push_back({id, e.what()});
    }
  }
  result.manifest.base_dir = out_dir;
  return result;
}

}  // namespace locref
