#pragma once

#include <array>
#include <memory>
#include <vector>

#include "locref/attention.hpp"
#include "locref/nn.hpp"

namespace locref {

struct EncoderConfig {
  int in_channels = 3;
  std::array<int, 5> channels = {64, 128, 256, 512, 512};  // VGG16 plan
  bool learned_pool = true;          // off: plain max-pooling in the difference branch
  bool align_attention = true;       // off: difference-branch features pass through unweighted
  bool attention_propagation = true; // off: no cross-level attention priors; requires align_attention
  int gate_kernel = 7;
};

// One VGG16-style level: 2 convs for levels 1-2, 3 for levels 3-5, all
// 3x3/s1/p1 with batch norm and ReLU. Pooling lives outside the block.
class VggBlock : public nn::Module {
 public:
  VggBlock(int in_ch, int out_ch, int conv_count, Rng& rng);
  nn::Var forward(const nn::Var& x);
  int conv_count() const { return static_cast<int>(convs_.size()); }

 private:
  std::vector<std::unique_ptr<nn::ConvBnRelu>> convs_;
};

class VggBranch : public nn::Module {
 public:
  VggBranch(int in_ch, const std::array<int, 5>& channels, Rng& rng);
  VggBlock& block(int level) { return *blocks_[static_cast<size_t>(level - 1)]; }  // 1-based

 private:
  std::array<std::unique_ptr<VggBlock>, 5> blocks_;
};

struct EncoderOutput {
  std::array<nn::Var, 5> features;   // per-level change-enhanced features (index 0 = level 1)
  std::array<nn::Var, 5> attention;  // per-level final attention maps; undefined when attention is off
  std::array<Tensor, 5> alpha;       // detached per-level coefficient maps (diagnostics)
};

// Three-branch encoder: a weight-shared branch applied to both acquisitions,
// and a difference branch fed with |t1-t2|. The two image branches
// downsample with max-pooling; the difference branch downsamples the
// attention-enhanced features with a learned pool (or max-pooling when
// disabled). Attention at each level aligns the three feature sets and feeds
// both the skip connections and the next difference block.
class Encoder : public nn::Module {
 public:
  Encoder(const EncoderConfig& cfg, Rng& rng);

  EncoderOutput forward(const nn::Var& t1, const nn::Var& t2);

  const EncoderConfig& config() const { return cfg_; }
  VggBranch& shared_branch() { return shared_; }
  VggBranch& diff_branch() { return diff_; }
  nn::LearnedPool& pool(int i) { return *pools_[static_cast<size_t>(i - 1)]; }  // 1-based, levels 1..4
  AlignAttention& align(int level) { return *aligns_[static_cast<size_t>(level - 1)]; }

 private:
  EncoderConfig cfg_;
  VggBranch shared_, diff_;
  std::vector<std::unique_ptr<nn::LearnedPool>> pools_;
  std::vector<std::unique_ptr<AlignAttention>> aligns_;
};

}  // namespace locref
