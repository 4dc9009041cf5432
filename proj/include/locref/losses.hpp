#pragma once

#include <string>

#include "locref/autograd.hpp"
#include "locref/image.hpp"

namespace locref {

enum class LossMode { kBce, kIou, kBceIou };

LossMode loss_mode_from_string(const std::string& s);  // "bce" | "iou" | "bce+iou"
std::string to_string(LossMode m);

// Mean binary cross-entropy with predictions clamped to [eps, 1-eps].
// pred and gt share any shape; gt holds {0,1}.
nn::Var bce_loss(const nn::Var& pred, const Tensor& gt, double eps = 1e-7);

// Soft-intersection-over-union loss -ln((I+eps)/(U+eps)) per sample, averaged
// over the batch. An empty target with an all-zero prediction costs 0.
nn::Var iou_loss(const nn::Var& pred, const Tensor& gt, double eps = 1e-7);

struct LossParts {
  nn::Var area;
  nn::Var edge;   // zero scalar unless mode is bce+iou
  nn::Var total;
};

// Area constraint plus the boundary constraint:
//   bce+iou: area = bce + iou, edge = iou over boundary pixels, total = sum
//   bce:     total = area = bce
//   iou:     total = area = iou
// Boundary pixels are selected (without gradients) as the union of the target
// boundary and the boundary of the thresholded prediction; the prediction's
// probability values at those pixels carry the gradient.
LossParts edge_area_loss(const nn::Var& pred, const Tensor& gt, LossMode mode = LossMode::kBceIou);

// Any-changed downsampling: a coarse cell is 1 if any covered pixel is 1.
Tensor downsample_mask_max(const Tensor& gt, int k);

// Boundary of a {0,1} map, per sample, same rule as boundary_extract.
Tensor tensor_boundary(const Tensor& mask);

// Deep supervision: downsamples the full-resolution target to the prediction
// grid (factor must divide exactly) and applies edge_area_loss.
LossParts deep_supervise(const nn::Var& deep_prob, const Tensor& gt_full, LossMode mode = LossMode::kBceIou);

}  // namespace locref
