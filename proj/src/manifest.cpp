#include "locref/manifest.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

#include "locref/rng.hpp"

namespace locref {

namespace fs = std::filesystem;

std::vector<const SampleRecord*> DatasetManifest::split(const std::string& tag) const {
  std::vector<const SampleRecord*> out;
  for (const auto& r : records)
    if (r.split == tag) out.push_back(&r);
  return out;
}

std::string DatasetManifest::resolve(const std::string& rel) const {
  const fs::path p(rel);
  if (p.is_absolute() || base_dir.empty()) return rel;
  return (fs::path(base_dir) / p).string();
}

void save_manifest(const std::string& path, const DatasetManifest& m) {
  nlohmann::json j;
  j["tile_size"] = m.tile_size;
  j["source"] = m.source_tag;
  j["split_seed"] = m.split_seed;
  auto& recs = j["records"] = nlohmann::json::array();
  for (const auto& r : m.records)
    recs.push_back({{"id", r.id}, {"t1", r.t1}, {"t2", r.t2}, {"label", r.label}, {"split", r.split}});
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write manifest " + path);
  f << j.dump(1) << '\n';
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest " + path);
  nlohmann::json j;
  f >> j;
  DatasetManifest m;
  m.tile_size = j.value("tile_size", 0);
  m.source_tag = j.value("source", "");
  m.split_seed = j.value("split_seed", std::uint64_t{0});
  for (const auto& r : j.at("records")) {
    SampleRecord rec;
    rec.id = r.at("id");
    rec.t1 = r.at("t1");
    rec.t2 = r.at("t2");
    rec.label = r.at("label");
    rec.split = r.value("split", "train");
    m.records.push_back(std::move(rec));
  }
  m.base_dir = fs::path(path).parent_path().string();
  return m;
}

void assign_split_counts(DatasetManifest& m, long long train, long long val, long long test, std::uint64_t seed) {
  const long long n = static_cast<long long>(m.records.size());
  if (train < 0 || val < 0 || test < 0 || train + val + test != n)
    throw std::invalid_argument("split counts must be nonnegative and sum to " + std::to_string(n));

  std::vector<size_t> idx(m.records.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  Rng rng(seed);
  for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(static_cast<std::uint32_t>(i))]);

  for (long long k = 0; k < n; ++k) {
    const char* tag = k < train ? "train" : (k < train + val ? "val" : "test");
    m.records[idx[static_cast<size_t>(k)]].split = tag;
  }
  m.split_seed = seed;
}

void assign_split_ratios(DatasetManifest& m, double train, double val, double test, std::uint64_t seed) {
  if (train < 0 || val < 0 || test < 0 || std::abs(train + val + test - 1.0) > 1e-9)
    throw std::invalid_argument("split ratios must be nonnegative and sum to 1");
  const long long n = static_cast<long long>(m.records.size());
  long long ct = static_cast<long long>(std::floor(train * static_cast<double>(n)));
  long long cv = static_cast<long long>(std::floor(val * static_cast<double>(n)));
  long long cs = static_cast<long long>(std::floor(test * static_cast<double>(n)));
  long long rem = n - ct - cv - cs;
  if (rem > 0) {
    ct += 1;
    --rem;
  }
  if (rem > 0) {
    cv += 1;
    --rem;
  }
  cs += rem;
  assign_split_counts(m, ct, cv, cs, seed);
}

}  // namespace locref
