#pragma once

#include <string>
#include <vector>

#include "locref/manifest.hpp"

namespace locref {

enum class PadPolicy {
  kCeil,   // zero-pad bottom/right to the next tile multiple
  kFloor,  // drop partial tiles
};

PadPolicy pad_policy_from_string(const std::string& s);

struct TilingOptions {
  int tile_size = 256;
  PadPolicy pad = PadPolicy::kCeil;
  std::string source_tag;
};

struct TilingError {
  std::string id;
  std::string message;
};

struct TilingResult {
  DatasetManifest manifest;
  std::vector<TilingError> errors;  // per-source problems; good sources still tile
};

// Number of tiles along one axis of length `extent`.
int tiles_along(int extent, int tile, PadPolicy pad);

// Cuts every aligned triple under src_dir/{A,B,label} into non-overlapping
// tiles written to out_dir/{A,B,label}. Sources are processed in sorted name
// order; a bad triple is reported and skipped.
TilingResult tile_dataset(const std::string& src_dir, const std::string& out_dir, const TilingOptions& opt);

}  // namespace locref
