#pragma once

#include "contrack/image.hpp"
#include "contrack/tensor.hpp"

namespace contrack {

struct TrainTarget {
    Tensor gauss;   // [H, W], exactly 1 at the center cell
    Box gt_box;     // search-crop pixels
    int center_x = 0, center_y = 0;  // grid cell holding the peak
    double sigma = 0.0;
};

/// Minimal radius keeping IoU >= min_iou between a box and any corner-shifted
/// copy; feeds the size-adaptive Gaussian spread.
double gaussian_radius(double w, double h, double min_iou = 0.7);

/// Gaussian supervision on a (grid_w x grid_h) cell grid; stride maps
/// search-crop pixels to cells.
TrainTarget gaussian_target(const Box& gt, int grid_w, int grid_h, int stride);

/// Penalty-reduced focal loss over the score map, alpha=2, beta=4.
Tensor focal_loss(const Tensor& score_map, const Tensor& gauss);

/// box_pred is the [4] (cx, cy, w, h) tensor in extent-normalized units.
Tensor giou_loss(const Tensor& box_pred, const Box& gt_norm);
Tensor l1_loss(const Tensor& box_pred, const Box& gt_norm);

/// L_s + 2 * L_giou + 5 * L_1.
Tensor total_loss(const Tensor& score_map, const Tensor& gauss, const Tensor& box_pred,
                  const Box& gt_norm);

inline constexpr double kFocalAlpha = 2.0;
inline constexpr double kFocalBeta = 4.0;
inline constexpr double kIouWeight = 2.0;
inline constexpr double kL1Weight = 5.0;
inline constexpr double kScoreClamp = 1e-6;

}  // namespace contrack
