#include "locref/encoder.hpp"

#include <stdexcept>
#include <string>

namespace locref {

using nn::Var;

VggBlock::VggBlock(int in_ch, int out_ch, int conv_count, Rng& rng) {
  int c = in_ch;
  for (int i = 0; i < conv_count; ++i) {
    convs_.push_back(std::make_unique<nn::ConvBnRelu>(c, out_ch, 3, 1, rng));
    register_child("conv" + std::to_string(i + 1), convs_.back().get());
    c = out_ch;
  }
}

Var VggBlock::forward(const Var& x) {
  Var y = x;
  for (auto& conv : convs_) y = conv->forward(y);
  return y;
}

VggBranch::VggBranch(int in_ch, const std::array<int, 5>& channels, Rng& rng) {
  static constexpr std::array<int, 5> kConvCounts = {2, 2, 3, 3, 3};
  int c = in_ch;
  for (int level = 1; level <= 5; ++level) {
    blocks_[static_cast<size_t>(level - 1)] =
        std::make_unique<VggBlock>(c, channels[static_cast<size_t>(level - 1)], kConvCounts[static_cast<size_t>(level - 1)], rng);
    register_child("level" + std::to_string(level), blocks_[static_cast<size_t>(level - 1)].get());
    c = channels[static_cast<size_t>(level - 1)];
  }
}

Encoder::Encoder(const EncoderConfig& cfg, Rng& rng)
    : cfg_(cfg), shared_(cfg.in_channels, cfg.channels, rng), diff_(cfg.in_channels, cfg.channels, rng) {
  if (cfg_.attention_propagation && !cfg_.align_attention)
    throw std::invalid_argument("Encoder: attention propagation requires align attention");
  register_child("shared", &shared_);
  register_child("diff", &diff_);
  if (cfg_.learned_pool) {
    for (int i = 1; i <= 4; ++i) {
      pools_.push_back(std::make_unique<nn::LearnedPool>(cfg_.channels[static_cast<size_t>(i - 1)]));
      register_child("pool" + std::to_string(i), pools_.back().get());
    }
  }
  if (cfg_.align_attention) {
    for (int level = 1; level <= 5; ++level) {
      aligns_.push_back(
          std::make_unique<AlignAttention>(cfg_.channels[static_cast<size_t>(level - 1)], cfg_.gate_kernel, rng));
      register_child("align" + std::to_string(level), aligns_.back().get());
    }
  }
}

EncoderOutput Encoder::forward(const Var& t1, const Var& t2) {
  const Tensor& v1 = t1.value();
  const Tensor& v2 = t2.value();
  if (!v1.same_shape(v2)) throw std::invalid_argument("Encoder: acquisitions must share a shape");
  if (v1.rank() != 4 || v1.dim(1) != cfg_.in_channels) throw std::invalid_argument("Encoder: bad input layout");
  if (v1.dim(2) % 16 || v1.dim(3) % 16) throw std::invalid_argument("Encoder: spatial dims must be divisible by 16");

  const Var ibd = nn::vabs(nn::sub(t1, t2));

  EncoderOutput out;
  std::vector<Var> finals;
  Var x1 = t1, x2 = t2, xd = ibd;
  for (int level = 1; level <= 5; ++level) {
    if (level > 1) {
      x1 = nn::maxpool2(x1);
      x2 = nn::maxpool2(x2);
    }
    x1 = shared_.block(level).forward(x1);
    x2 = shared_.block(level).forward(x2);
    xd = diff_.block(level).forward(xd);

    Var feat;
    if (cfg_.align_attention) {
      Var pre;
      if (cfg_.attention_propagation && level > 1) pre = propagate_attention(finals, level);
      AlignResult res = align(level).forward(x1, x2, xd, pre.defined() ? &pre : nullptr);
      feat = res.enhanced;
      out.attention[static_cast<size_t>(level - 1)] = res.final_map;
      out.alpha[static_cast<size_t>(level - 1)] = res.alpha;
      finals.push_back(res.final_map);
    } else {
      feat = xd;
    }
    out.features[static_cast<size_t>(level - 1)] = feat;

    if (level < 5) xd = cfg_.learned_pool ? pool(level).forward(feat) : nn::maxpool2(feat);
  }
  return out;
}

}  // namespace locref
