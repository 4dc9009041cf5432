#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "locref/tensor.hpp"

namespace locref {

// Named-tensor archive: little-endian binary container for f64 tensors plus
// u64 scalars (RNG state, counters). Used for backbone weight files and as
// the payload section of checkpoints.
struct TensorArchive {
  std::map<std::string, Tensor> tensors;
  std::map<std::string, std::uint64_t> scalars;
};

void write_tensor_archive(const std::string& path, const TensorArchive& a);
TensorArchive read_tensor_archive(const std::string& path);

// Stream variants so a checkpoint can embed an archive after its own header.
void write_tensor_archive(std::ostream& os, const TensorArchive& a);
TensorArchive read_tensor_archive(std::istream& is);

}  // namespace locref
