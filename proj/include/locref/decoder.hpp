#pragma once

#include <array>
#include <memory>

#include "locref/attention.hpp"
#include "locref/nn.hpp"

namespace locref {

// Channel attention: global average and max pooled channel vectors pass
// through a shared two-layer bottleneck; the summed responses gate the
// channels.
class ChannelGate : public nn::Module {
 public:
  ChannelGate(int channels, int reduction, Rng& rng);
  nn::Var weights(const nn::Var& x) const;  // (N,C,1,1) in (0,1)
  nn::Var forward(const nn::Var& x) const { return mul_channel(x, weights(x)); }

 private:
  nn::Conv2d fc1_, fc2_;
};

// One refinement step: transpose-conv x2 upsampling, channel-gated fusion
// with the skip features, two conv units, then spatial gating.
class DecoderBlock : public nn::Module {
 public:
  DecoderBlock(int in_ch, int skip_ch, int cam_reduction, int sam_kernel, Rng& rng);
  nn::Var forward(const nn::Var& deep, const nn::Var& skip);

 private:
  nn::ConvTranspose2x2 up_;
  ChannelGate cam_;
  nn::ConvBnRelu conv1_, conv2_;
  SpatialGate sam_;
};

// 1x1 projection of the deepest features to a change probability map, used
// for deep supervision between the two stages.
class DeepHead : public nn::Module {
 public:
  DeepHead(int in_ch, Rng& rng);
  nn::Var forward(const nn::Var& deep) const { return nn::sigmoid(conv_.forward(deep)); }

 private:
  nn::Conv2d conv_;
};

struct DecoderConfig {
  std::array<int, 5> channels = {64, 128, 256, 512, 512};  // mirrors the encoder plan
  int cam_reduction = 16;
  int sam_kernel = 7;
};

struct RefineResult {
  nn::Var intensity;  // (N,1,H,W) logits
  nn::Var prob;       // sigmoid(intensity)
};

// Chains four decoder blocks over the level-4..1 skips, then a 3x3 head conv
// to a single-channel intensity map at input resolution.
class Decoder : public nn::Module {
 public:
  Decoder(const DecoderConfig& cfg, Rng& rng);
  RefineResult forward(const nn::Var& deep, const std::array<nn::Var, 5>& skips);
  DecoderBlock& block(int level) { return *blocks_[static_cast<size_t>(level - 1)]; }  // 1-based, levels 1..4

 private:
  DecoderConfig cfg_;
  std::array<std::unique_ptr<DecoderBlock>, 4> blocks_;
  std::unique_ptr<nn::Conv2d> head_;
};

}  // namespace locref
