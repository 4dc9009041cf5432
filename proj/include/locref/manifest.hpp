#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace locref {

struct SampleRecord {
  std::string id;
  std::string t1, t2, label;  // paths relative to the manifest location
  std::string split = "train";
};

struct DatasetManifest {
  int tile_size = 0;
  std::string source_tag;
  std::uint64_t split_seed = 0;
  std::vector<SampleRecord> records;
  std::string base_dir;  // directory of the manifest file; not serialized

  std::vector<const SampleRecord*> split(const std::string& tag) const;
  std::string resolve(const std::string& rel) const;
};

void save_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::string& path);

// Seeded shuffle, then contiguous train/val/test assignment. Counts must sum
// to the record count; ratios must sum to 1 (remainders go to train, then
// val).
void assign_split_counts(DatasetManifest& m, long long train, long long val, long long test, std::uint64_t seed);
void assign_split_ratios(DatasetManifest& m, double train, double val, double test, std::uint64_t seed);

}  // namespace locref
