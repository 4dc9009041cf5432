#pragma once

#include <memory>
#include <string>
#include <vector>

#include "locref/decoder.hpp"
#include "locref/encoder.hpp"

namespace locref {

struct ModelConfig {
  EncoderConfig encoder;
  bool deep_supervision = true;  // off: no deep head, final-output loss only
  int cam_reduction = 16;
  int sam_kernel = 7;

  void validate() const;
};

struct ForwardResult {
  nn::Var prob;       // (N,1,H,W) change probability
  nn::Var intensity;  // pre-sigmoid logits
  nn::Var deep_prob;  // (N,1,H/16,W/16); undefined when deep supervision is off
  EncoderOutput encoded;
};

struct BackboneLoadReport {
  std::vector<std::string> loaded;
  std::vector<std::string> unmatched_file_keys;   // present in the file, not in the model
  std::vector<std::string> missing_model_keys;    // expected by the model, absent in the file
};

// Full localisation + refinement network.
class ChangeDetector : public nn::Module {
 public:
  ChangeDetector(const ModelConfig& cfg, Rng& rng);

  ForwardResult forward(const nn::Var& t1, const nn::Var& t2);

  const ModelConfig& config() const { return cfg_; }
  Encoder& encoder() { return encoder_; }
  Decoder& decoder() { return *decoder_; }
  DeepHead* deep_head() { return deep_head_.get(); }

  // Loads "level{y}.conv{k}.weight/bias" conv tensors into the shared image
  // branch (and optionally the difference branch). Shape mismatches throw;
  // unmatched keys on either side are reported, not fatal.
  BackboneLoadReport load_backbone(const std::string& path, bool into_diff_branch);

 private:
  ModelConfig cfg_;
  Encoder encoder_;
  std::unique_ptr<Decoder> decoder_;
  std::unique_ptr<DeepHead> deep_head_;
};

}  // namespace locref
