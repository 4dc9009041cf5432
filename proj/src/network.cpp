#include "locref/network.hpp"

#include <stdexcept>

#include "locref/tensor_io.hpp"

namespace locref {

void ModelConfig::validate() const {
  for (int c : encoder.channels)
    if (c <= 0) throw std::invalid_argument("ModelConfig: channel plan must be positive");
  if (encoder.attention_propagation && !encoder.align_attention)
    throw std::invalid_argument("ModelConfig: attention propagation requires align attention");
  if (encoder.gate_kernel % 2 == 0 || sam_kernel % 2 == 0)
    throw std::invalid_argument("ModelConfig: gate kernels must be odd");
}

ChangeDetector::ChangeDetector(const ModelConfig& cfg, Rng& rng) : cfg_(cfg), encoder_(cfg.encoder, rng) {
  cfg_.validate();
  register_child("encoder", &encoder_);
  DecoderConfig dec;
  dec.channels = cfg_.encoder.channels;
  dec.cam_reduction = cfg_.cam_reduction;
  dec.sam_kernel = cfg_.sam_kernel;
  decoder_ = std::make_unique<Decoder>(dec, rng);
  register_child("decoder", decoder_.get());
  if (cfg_.deep_supervision) {
    deep_head_ = std::make_unique<DeepHead>(cfg_.encoder.channels[4], rng);
    register_child("deep_head", deep_head_.get());
  }
}

ForwardResult ChangeDetector::forward(const nn::Var& t1, const nn::Var& t2) {
  ForwardResult res;
  res.encoded = encoder_.forward(t1, t2);
  if (deep_head_) res.deep_prob = deep_head_->forward(res.encoded.features[4]);
  RefineResult refined = decoder_->forward(res.encoded.features[4], res.encoded.features);
  res.intensity = refined.intensity;
  res.prob = refined.prob;
  return res;
}

BackboneLoadReport ChangeDetector::load_backbone(const std::string& path, bool into_diff_branch) {
  const TensorArchive archive = read_tensor_archive(path);
  BackboneLoadReport report;

  auto load_into = [&](VggBranch& branch, const std::string& tag) {
    for (int level = 1; level <= 5; ++level) {
      VggBlock& block = branch.block(level);
      const auto params = block.named_parameters();
      for (int k = 1; k <= block.conv_count(); ++k) {
        for (const char* leaf : {"weight", "bias"}) {
          const std::string key = "level" + std::to_string(level) + ".conv" + std::to_string(k) + "." + leaf;
          const std::string model_key = "conv" + std::to_string(k) + ".conv." + leaf;
          auto it = archive.tensors.find(key);
          if (it == archive.tensors.end()) {
            report.missing_model_keys.push_back(tag + key);
            continue;
          }
          bool found = false;
          for (const auto& np : params) {
            if (np.name != model_key) continue;
            if (!np.var.value().same_shape(it->second))
              throw std::runtime_error("backbone weights: shape mismatch for " + key + ": file " +
                                       it->second.shape_str() + " vs model " + np.var.value().shape_str());
            const_cast<nn::NamedParam&>(np).var.value().copy_from(it->second);
            report.loaded.push_back(tag + key);
            found = true;
            break;
          }
          if (!found) report.missing_model_keys.push_back(tag + key);
        }
      }
    }
  };

  load_into(encoder_.shared_branch(), "shared:");
  if (into_diff_branch) load_into(encoder_.diff_branch(), "diff:");

  // File keys that matched nothing in the shared branch schema.
  for (const auto& [key, _] : archive.tensors) {
    bool used = false;
    for (const auto& l : report.loaded)
      if (l.substr(l.find(':') + 1) == key) {
        used = true;
        break;
      }
    if (!used) report.unmatched_file_keys.push_back(key);
  }
  return report;
}

}  // namespace locref
