#pragma once

#include <utility>
#include <vector>

#include "locref/nn.hpp"

namespace locref {

// Spatial gating map: channel-wise max and mean maps, concatenated and fused
// by a single conv, squashed to (0,1). Shared by the encoder's attention
// weighting and the decoder's spatial attention.
class SpatialGate : public nn::Module {
 public:
  SpatialGate(int kernel, Rng& rng);
  nn::Var map(const nn::Var& x) const;                                // (N,1,H,W) in (0,1)
  nn::Var forward(const nn::Var& x) const { return mul_map(x, map(x)); }

 private:
  nn::Conv2d conv_;
};

// Per-pixel cosine similarity of the two change features over channels;
// pixels where either vector has zero norm get similarity 0.
Tensor cosine_similarity_map(const Tensor& d1, const Tensor& d2);

// 1 where the attention value >= thr (inclusive), else 0.
Tensor threshold_flags(const Tensor& m, double thr = 0.5);

// Similarity-gated weighting coefficients in [0,2]:
//   sim <= T                  -> T
//   sim > T, both changed     -> 2*sim
//   sim > T, both unchanged   -> 1-sim
//   sim > T, flags disagree   -> T
Tensor alignment_coefficients(const Tensor& sim, const Tensor& flags1, const Tensor& flags2, double T = 0.5);

// cur = alpha .* (m1+m2)/2; final = pre ? (cur+pre)/2 : cur.
// alpha enters as a constant: gradients flow through m1/m2/pre only.
std::pair<nn::Var, nn::Var> fuse_attention(const Tensor& alpha, const nn::Var& m1, const nn::Var& m2,
                                           const nn::Var* pre);

// Top-down attention aggregation: each earlier final map (level j, 1-based)
// is average-pooled by 2^(target-j) down to the target resolution, then all
// pooled maps are averaged. finals[0] is level 1; target_level in {2..5}.
nn::Var propagate_attention(const std::vector<nn::Var>& finals, int target_level);

struct AlignResult {
  nn::Var enhanced;   // final map applied to the difference-branch features
  nn::Var final_map;  // (N,1,H,W), values in [0,2]
  Tensor alpha;       // detached diagnostics
  Tensor sim;
};

// Cross-branch attention for one encoder level: derives two change features
// (from the branch difference and from the difference branch), gates each into
// a preliminary attention map, and fuses them with similarity-derived
// coefficients. `pre` is the propagated attention from earlier levels (null at
// level 1). `frozen_alpha`, when given, replaces the computed coefficients
// (used by the gradient checks, which hold the non-differentiable selector
// fixed).
class AlignAttention : public nn::Module {
 public:
  AlignAttention(int channels, int gate_kernel, Rng& rng);

  AlignResult forward(const nn::Var& f1, const nn::Var& f2, const nn::Var& fd, const nn::Var* pre,
                      const Tensor* frozen_alpha = nullptr);

  // The two convolved change features (exposed for tests).
  std::pair<nn::Var, nn::Var> change_features(const nn::Var& f1, const nn::Var& f2, const nn::Var& fd);

  SpatialGate& gate1() { return gate1_; }
  SpatialGate& gate2() { return gate2_; }

  static constexpr double kSimilarityThreshold = 0.5;
  static constexpr double kFlagThreshold = 0.5;

 private:
  nn::ConvBnRelu conv_diff_;   // on |f1-f2|
  nn::ConvBnRelu conv_fused_;  // on fd
  SpatialGate gate1_, gate2_;
};

}  // namespace locref
