#include "locref/decoder.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace locref {

using nn::Var;

ChannelGate::ChannelGate(int channels, int reduction, Rng& rng)
    : fc1_(channels, std::max(1, channels / reduction), 1, 1, 0, rng),
      fc2_(std::max(1, channels / reduction), channels, 1, 1, 0, rng) {
  register_child("fc1", &fc1_);
  register_child("fc2", &fc2_);
}

Var ChannelGate::weights(const Var& x) const {
  const Var avg = fc2_.forward(nn::relu(fc1_.forward(nn::spatial_mean(x))));
  const Var mx = fc2_.forward(nn::relu(fc1_.forward(nn::spatial_max(x))));
  return nn::sigmoid(nn::add(avg, mx));
}

DecoderBlock::DecoderBlock(int in_ch, int skip_ch, int cam_reduction, int sam_kernel, Rng& rng)
    : up_(in_ch, skip_ch, rng),
      cam_(2 * skip_ch, cam_reduction, rng),
      conv1_(2 * skip_ch, skip_ch, 3, 1, rng),
      conv2_(skip_ch, skip_ch, 3, 1, rng),
      sam_(sam_kernel, rng) {
  register_child("up", &up_);
  register_child("cam", &cam_);
  register_child("conv1", &conv1_);
  register_child("conv2", &conv2_);
  register_child("sam", &sam_);
}

Var DecoderBlock::forward(const Var& deep, const Var& skip) {
  Var up = up_.forward(deep);
  if (up.value().dim(2) != skip.value().dim(2) || up.value().dim(3) != skip.value().dim(3))
    throw std::invalid_argument("DecoderBlock: upsampled resolution does not match skip " + up.value().shape_str() +
                                " vs " + skip.value().shape_str());
  Var fused = cam_.forward(nn::concat_channels(up, skip));
  Var y = conv2_.forward(conv1_.forward(fused));
  return sam_.forward(y);
}

DeepHead::DeepHead(int in_ch, Rng& rng) : conv_(in_ch, 1, 1, 1, 0, rng) { register_child("conv", &conv_); }

Decoder::Decoder(const DecoderConfig& cfg, Rng& rng) : cfg_(cfg) {
  for (int level = 4; level >= 1; --level) {
    const int in_ch = cfg_.channels[static_cast<size_t>(level)];       // level+1 plan entry
    const int skip_ch = cfg_.channels[static_cast<size_t>(level - 1)];
    blocks_[static_cast<size_t>(level - 1)] =
        std::make_unique<DecoderBlock>(in_ch, skip_ch, cfg_.cam_reduction, cfg_.sam_kernel, rng);
    register_child("block" + std::to_string(level), blocks_[static_cast<size_t>(level - 1)].get());
  }
  head_ = std::make_unique<nn::Conv2d>(cfg_.channels[0], 1, 3, 1, 1, rng);
  register_child("head", head_.get());
}

RefineResult Decoder::forward(const Var& deep, const std::array<nn::Var, 5>& skips) {
  Var x = deep;
  for (int level = 4; level >= 1; --level) x = block(level).forward(x, skips[static_cast<size_t>(level - 1)]);
  RefineResult res;
  res.intensity = head_->forward(x);
  res.prob = nn::sigmoid(res.intensity);
  return res;
}

}  // namespace locref
