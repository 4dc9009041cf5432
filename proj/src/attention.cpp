#include "locref/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace locref {

using nn::Var;

SpatialGate::SpatialGate(int kernel, Rng& rng) : conv_(2, 1, kernel, 1, kernel / 2, rng) {
  if (kernel % 2 == 0) throw std::invalid_argument("SpatialGate: kernel must be odd");
  register_child("conv", &conv_);
}

Var SpatialGate::map(const Var& x) const {
  return nn::sigmoid(conv_.forward(nn::concat_channels(nn::channel_max(x), nn::channel_mean(x))));
}

Tensor cosine_similarity_map(const Tensor& d1, const Tensor& d2) {
  if (!d1.same_shape(d2) || d1.rank() != 4) throw std::invalid_argument("cosine_similarity_map: shape mismatch");
  const int N = d1.dim(0), C = d1.dim(1);
  const long long hw = static_cast<long long>(d1.dim(2)) * d1.dim(3);
  Tensor sim({N, 1, d1.dim(2), d1.dim(3)});
  for (int n = 0; n < N; ++n)
    for (long long i = 0; i < hw; ++i) {
      const double* a = d1.data() + static_cast<long long>(n) * C * hw + i;
      const double* b = d2.data() + static_cast<long long>(n) * C * hw + i;
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (int c = 0; c < C; ++c) {
        const double av = a[static_cast<long long>(c) * hw];
        const double bv = b[static_cast<long long>(c) * hw];
        dot += av * bv;
        na += av * av;
        nb += bv * bv;
      }
      sim[static_cast<long long>(n) * hw + i] = (na > 0.0 && nb > 0.0) ? dot / (std::sqrt(na) * std::sqrt(nb)) : 0.0;
    }
  return sim;
}

Tensor threshold_flags(const Tensor& m, double thr) {
  Tensor f(m.dims());
  const long long n = m.numel();
  for (long long i = 0; i < n; ++i) f[i] = m[i] >= thr ? 1.0 : 0.0;
  return f;
}

Tensor alignment_coefficients(const Tensor& sim, const Tensor& flags1, const Tensor& flags2, double T) {
  if (!sim.same_shape(flags1) || !sim.same_shape(flags2))
    throw std::invalid_argument("alignment_coefficients: shape mismatch");
  Tensor alpha(sim.dims());
  const long long n = sim.numel();
  for (long long i = 0; i < n; ++i) {
    const double s = sim[i];
    if (s <= T) {
      alpha[i] = T;
    } else if (flags1[i] == flags2[i]) {
      alpha[i] = flags1[i] != 0.0 ? 2.0 * s : 1.0 - s;
    } else {
      alpha[i] = T;
    }
  }
  return alpha;
}

std::pair<Var, Var> fuse_attention(const Tensor& alpha, const Var& m1, const Var& m2, const Var* pre) {
  if (!m1.value().same_shape(m2.value()) || !m1.value().same_shape(alpha))
    throw std::invalid_argument("fuse_attention: shape mismatch");
  Var cur = nn::mul_const(nn::affine(nn::add(m1, m2), 0.5, 0.0), alpha);
  if (!pre) return {cur, cur};
  if (!pre->value().same_shape(cur.value())) throw std::invalid_argument("fuse_attention: pre shape mismatch");
  Var fin = nn::affine(nn::add(cur, *pre), 0.5, 0.0);
  return {cur, fin};
}

Var propagate_attention(const std::vector<Var>& finals, int target_level) {
  if (target_level < 2 || target_level > 5) throw std::invalid_argument("propagate_attention: target level in {2..5}");
  if (static_cast<int>(finals.size()) != target_level - 1)
    throw std::invalid_argument("propagate_attention: need one map per earlier level");
  Var acc;
  for (int j = 1; j < target_level; ++j) {
    const Var& f = finals[static_cast<size_t>(j - 1)];
    Var pooled = nn::avgpool(f, 1 << (target_level - j));
    if (!acc.defined()) {
      acc = pooled;
    } else {
      if (!acc.value().same_shape(pooled.value()))
        throw std::logic_error("propagate_attention: pooled resolutions disagree");
      acc = nn::add(acc, pooled);
    }
  }
  return nn::affine(acc, 1.0 / static_cast<double>(target_level - 1), 0.0);
}

AlignAttention::AlignAttention(int channels, int gate_kernel, Rng& rng)
    : conv_diff_(channels, channels, 3, 1, rng),
      conv_fused_(channels, channels, 3, 1, rng),
      gate1_(gate_kernel, rng),
      gate2_(gate_kernel, rng) {
  register_child("conv_diff", &conv_diff_);
  register_child("conv_fused", &conv_fused_);
  register_child("gate1", &gate1_);
  register_child("gate2", &gate2_);
}

std::pair<Var, Var> AlignAttention::change_features(const Var& f1, const Var& f2, const Var& fd) {
  if (!f1.value().same_shape(f2.value()) || !f1.value().same_shape(fd.value()))
    throw std::invalid_argument("AlignAttention: branch features must share a shape");
  return {conv_diff_.forward(nn::vabs(nn::sub(f1, f2))), conv_fused_.forward(fd)};
}

AlignResult AlignAttention::forward(const Var& f1, const Var& f2, const Var& fd, const Var* pre,
                                    const Tensor* frozen_alpha) {
  auto [d1, d2] = change_features(f1, f2, fd);
  Var m1 = gate1_.map(d1);
  Var m2 = gate2_.map(d2);

  AlignResult res;
  res.sim = cosine_similarity_map(d1.value(), d2.value());
  if (frozen_alpha) {
    res.alpha = *frozen_alpha;
  } else {
    const Tensor fl1 = threshold_flags(m1.value(), kFlagThreshold);
    const Tensor fl2 = threshold_flags(m2.value(), kFlagThreshold);
    res.alpha = alignment_coefficients(res.sim, fl1, fl2, kSimilarityThreshold);
  }

  auto [cur, fin] = fuse_attention(res.alpha, m1, m2, pre);
  (void)cur;
  res.final_map = fin;
  res.enhanced = nn::mul_map(fd, fin);
  return res;
}

}  // namespace locref
