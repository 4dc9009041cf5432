#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "locref/nn.hpp"

namespace locref {

struct CheckpointMeta {
  std::map<std::string, std::string> config;
  int epoch = 0;
  std::uint64_t rng_state = 0;
  long long adam_steps = 0;
  double best_val_f1 = -1.0;
};

// Single-file checkpoint: versioned header with a JSON meta blob, followed by
// a named-tensor archive holding parameters, batch-norm state and Adam
// moments. Loading restores values in place; a missing or misshapen entry is
// a hard error.
void save_checkpoint(const std::string& path, const nn::Module& model, nn::Adam* adam, const CheckpointMeta& meta);
CheckpointMeta load_checkpoint(const std::string& path, nn::Module& model, nn::Adam* adam);

// Reads only the meta header (to rebuild the model before loading tensors).
CheckpointMeta peek_checkpoint(const std::string& path);

}  // namespace locref
