#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "locref/network.hpp"

namespace locref {

// Flat key=value training configuration. Every field can be set from a config
// file and overridden by a LOCREF_-prefixed environment variable (key
// upper-cased), e.g. LOCREF_LR=1e-3, LOCREF_BATCH_SIZE=4.
struct TrainConfig {
  double lr = 1e-4;
  int epochs = 200;
  int batch_size = 16;
  std::string optimizer = "adam";
  std::string loss = "bce+iou";  // bce | iou | bce+iou

  bool learned_pool = true;
  bool align_attention = true;
  bool attention_propagation = true;
  bool deep_supervision = true;

  std::uint64_t seed = 42;
  std::string data_manifest;
  std::string checkpoint_dir = "runs/default";
  std::string eval_split = "test";

  int channel_scale = 1;  // divides the {64,128,256,512,512} plan (desk-scale runs use 8)
  double threshold = 0.5;
  double deep_loss_weight = 1.0;
  std::string normalize = "unit";  // unit | standardized
  std::string backbone_weights;    // optional named-tensor archive
  bool backbone_into_diff = false;
  int val_interval = 1;

  void validate() const;
  ModelConfig model_config() const;

  std::map<std::string, std::string> to_map() const;
  static TrainConfig from_map(const std::map<std::string, std::string>& kv);
  // Parses the file, then applies LOCREF_* environment overrides.
  static TrainConfig from_file(const std::string& path);
};

// Shared flat-file parser ("key = value", '#' comments).
std::map<std::string, std::string> parse_kv_file(const std::string& path);

}  // namespace locref
