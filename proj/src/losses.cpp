#include "locref/losses.hpp"

#include <stdexcept>

namespace locref {

using nn::Var;

LossMode loss_mode_from_string(const std::string& s) {
  if (s == "bce") return LossMode::kBce;
  if (s == "iou") return LossMode::kIou;
  if (s == "bce+iou" || s == "bce_iou") return LossMode::kBceIou;
  throw std::invalid_argument("unknown loss mode: " + s);
}

std::string to_string(LossMode m) {
  switch (m) {
    case LossMode::kBce: return "bce";
    case LossMode::kIou: return "iou";
    case LossMode::kBceIou: return "bce+iou";
  }
  return "?";
}

Var bce_loss(const Var& pred, const Tensor& gt, double eps) {
  if (!pred.value().same_shape(gt)) throw std::invalid_argument("bce_loss: shape mismatch");
  Tensor one_minus_gt(gt.dims());
  const long long n = gt.numel();
  for (long long i = 0; i < n; ++i) one_minus_gt[i] = 1.0 - gt[i];
  const Var c = nn::clamp(pred, eps, 1.0 - eps);
  const Var pos = nn::dot_const(nn::vlog(c), gt);
  const Var neg = nn::dot_const(nn::vlog(nn::affine(c, -1.0, 1.0)), one_minus_gt);
  return nn::affine(nn::add(pos, neg), -1.0 / static_cast<double>(n), 0.0);
}

namespace {

Var iou_loss_single(const Var& pred, const Tensor& gt, double eps) {
  const Var inter = nn::dot_const(pred, gt);
  double sum_gt = 0.0;
  for (long long i = 0; i < gt.numel(); ++i) sum_gt += gt[i];
  // U = sum(gt) + sum(pred) - I
  const Var uni = nn::add(nn::affine(nn::sum_all(pred), 1.0, sum_gt), nn::affine(inter, -1.0, 0.0));
  return nn::sub(nn::vlog(nn::affine(uni, 1.0, eps)), nn::vlog(nn::affine(inter, 1.0, eps)));
}

Tensor slice_tensor(const Tensor& t, int n) {
  const long long chw = t.numel() / t.dim(0);
  Tensor s({1, t.dim(1), t.dim(2), t.dim(3)});
  for (long long i = 0; i < chw; ++i) s[i] = t[static_cast<long long>(n) * chw + i];
  return s;
}

}  // namespace

Var iou_loss(const Var& pred, const Tensor& gt, double eps) {
  if (!pred.value().same_shape(gt)) throw std::invalid_argument("iou_loss: shape mismatch");
  if (pred.value().rank() != 4 || pred.value().dim(0) == 1) return iou_loss_single(pred, gt, eps);
  const int N = pred.value().dim(0);
  Var acc;
  for (int n = 0; n < N; ++n) {
    Var term = iou_loss_single(nn::slice_batch(pred, n), slice_tensor(gt, n), eps);
    acc = acc.defined() ? nn::add(acc, term) : term;
  }
  return nn::affine(acc, 1.0 / static_cast<double>(N), 0.0);
}

Tensor downsample_mask_max(const Tensor& gt, int k) {
  if (gt.rank() != 4) throw std::invalid_argument("downsample_mask_max: expected rank-4");
  const int N = gt.dim(0), C = gt.dim(1), H = gt.dim(2), W = gt.dim(3);
  if (H % k || W % k) throw std::invalid_argument("downsample_mask_max: dims not divisible by factor");
  const int Ho = H / k, Wo = W / k;
  Tensor out({N, C, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < Ho; ++i)
        for (int j = 0; j < Wo; ++j) {
          double best = 0.0;
          for (int a = 0; a < k && best == 0.0; ++a)
            for (int b = 0; b < k; ++b)
              if (gt.at(n, c, k * i + a, k * j + b) != 0.0) {
                best = 1.0;
                break;
              }
          out.at(n, c, i, j) = best;
        }
  return out;
}

Tensor tensor_boundary(const Tensor& mask) {
  if (mask.rank() != 4 || mask.dim(1) != 1) throw std::invalid_argument("tensor_boundary: expected (N,1,H,W)");
  const int N = mask.dim(0), H = mask.dim(2), W = mask.dim(3);
  Tensor out(mask.dims());
  for (int n = 0; n < N; ++n) {
    Mask m(H, W);
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) m.at(i, j) = mask.at(n, 0, i, j) != 0.0 ? 1 : 0;
    const Mask b = boundary_extract(m);
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) out.at(n, 0, i, j) = b.at(i, j);
  }
  return out;
}

LossParts edge_area_loss(const Var& pred, const Tensor& gt, LossMode mode) {
  if (!pred.value().same_shape(gt)) throw std::invalid_argument("edge_area_loss: shape mismatch");
  LossParts parts;
  switch (mode) {
    case LossMode::kBce:
      parts.area = bce_loss(pred, gt);
      parts.edge = Var(Tensor::scalar(0.0));
      parts.total = parts.area;
      return parts;
    case LossMode::kIou:
      parts.area = iou_loss(pred, gt);
      parts.edge = Var(Tensor::scalar(0.0));
      parts.total = parts.area;
      return parts;
    case LossMode::kBceIou:
      break;
  }

  parts.area = nn::add(bce_loss(pred, gt), iou_loss(pred, gt));

  // Boundary supervision: positions are fixed by the current prediction and
  // the target; values at those positions stay differentiable.
  const Tensor gt_edges = tensor_boundary(gt);
  Tensor pred_mask(pred.value().dims());
  for (long long i = 0; i < pred_mask.numel(); ++i) pred_mask[i] = pred.value()[i] >= 0.5 ? 1.0 : 0.0;
  const Tensor pred_edges = tensor_boundary(pred_mask);
  Tensor selector(gt_edges.dims());
  for (long long i = 0; i < selector.numel(); ++i) selector[i] = (gt_edges[i] != 0.0 || pred_edges[i] != 0.0) ? 1.0 : 0.0;

  parts.edge = iou_loss(nn::mul_const(pred, selector), gt_edges);
  parts.total = nn::add(parts.area, parts.edge);
  return parts;
}

LossParts deep_supervise(const Var& deep_prob, const Tensor& gt_full, LossMode mode) {
  const Tensor& pv = deep_prob.value();
  if (pv.rank() != 4 || gt_full.rank() != 4) throw std::invalid_argument("deep_supervise: expected rank-4");
  const int k = gt_full.dim(2) / pv.dim(2);
  if (k <= 0 || gt_full.dim(2) != k * pv.dim(2) || gt_full.dim(3) != k * pv.dim(3))
    throw std::invalid_argument("deep_supervise: target resolution is not a multiple of the prediction grid");
  return edge_area_loss(deep_prob, downsample_mask_max(gt_full, k), mode);
}

}  // namespace locref
