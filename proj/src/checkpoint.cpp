#include "locref/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "locref/tensor_io.hpp"

namespace locref {

namespace {

constexpr char kMagic[4] = {'L', 'R', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

nlohmann::json meta_to_json(const CheckpointMeta& meta) {
  nlohmann::json j;
  j["config"] = meta.config;
  j["epoch"] = meta.epoch;
  j["rng_state"] = meta.rng_state;
  j["adam_steps"] = meta.adam_steps;
  j["best_val_f1"] = meta.best_val_f1;
  return j;
}

CheckpointMeta meta_from_json(const nlohmann::json& j) {
  CheckpointMeta meta;
  meta.config = j.at("config").get<std::map<std::string, std::string>>();
  meta.epoch = j.at("epoch");
  meta.rng_state = j.at("rng_state");
  meta.adam_steps = j.at("adam_steps");
  meta.best_val_f1 = j.at("best_val_f1");
  return meta;
}

CheckpointMeta read_header(std::istream& is, const std::string& path) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("not a checkpoint: " + path);
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kVersion)
    throw std::runtime_error("checkpoint " + path + ": unsupported version " + std::to_string(version));
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string blob(len, '\0');
  is.read(blob.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error("checkpoint " + path + ": truncated header");
  return meta_from_json(nlohmann::json::parse(blob));
}

}  // namespace

void save_checkpoint(const std::string& path, const nn::Module& model, nn::Adam* adam, const CheckpointMeta& meta) {
  TensorArchive archive;
  const auto params = model.named_parameters();
  for (const auto& np : params) archive.tensors.emplace("param/" + np.name, np.var.value());
  for (const auto& nb : model.named_buffers()) archive.tensors.emplace("buffer/" + nb.name, *nb.tensor);
  if (adam) {
    for (size_t i = 0; i < params.size(); ++i) {
      archive.tensors.emplace("adam.m/" + params[i].name, adam->m()[i]);
      archive.tensors.emplace("adam.v/" + params[i].name, adam->v()[i]);
    }
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot create checkpoint " + path);
  os.write(kMagic, 4);
  os.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  const std::string blob = meta_to_json(meta).dump();
  const std::uint64_t len = blob.size();
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(blob.data(), static_cast<std::streamsize>(len));
  write_tensor_archive(os, archive);
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

CheckpointMeta load_checkpoint(const std::string& path, nn::Module& model, nn::Adam* adam) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path);
  const CheckpointMeta meta = read_header(is, path);
  const TensorArchive archive = read_tensor_archive(is);

  auto fetch = [&](const std::string& key) -> const Tensor& {
    auto it = archive.tensors.find(key);
    if (it == archive.tensors.end()) throw std::runtime_error("checkpoint " + path + ": missing field " + key);
    return it->second;
  };

  const auto params = model.named_parameters();
  for (const auto& np : params) const_cast<nn::NamedParam&>(np).var.value().copy_from(fetch("param/" + np.name));
  for (const auto& nb : model.named_buffers()) nb.tensor->copy_from(fetch("buffer/" + nb.name));
  if (adam) {
    for (size_t i = 0; i < params.size(); ++i) {
      adam->m()[i].copy_from(fetch("adam.m/" + params[i].name));
      adam->v()[i].copy_from(fetch("adam.v/" + params[i].name));
    }
    adam->set_step_count(meta.adam_steps);
  }
  return meta;
}

CheckpointMeta peek_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path);
  return read_header(is, path);
}

}  // namespace locref
