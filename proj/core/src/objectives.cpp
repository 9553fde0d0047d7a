#include "contrack/objectives.hpp"

#include <algorithm>
#include <cmath>

namespace contrack {

double gaussian_radius(double w, double h, double min_iou) {
    // Smallest r for which a box whose corners move by r keeps IoU >= min_iou.
    // Three contact cases, each a quadratic in r; take the tightest root.
    double a1 = 1.0;
    double b1 = w + h;
    double c1 = w * h * (1.0 - min_iou) / (1.0 + min_iou);
    double r1 = (b1 - std::sqrt(b1 * b1 - 4.0 * a1 * c1)) / (2.0 * a1);

    double a2 = 4.0;
    double b2 = 2.0 * (w + h);
    double c2 = (1.0 - min_iou) * w * h;
    double r2 = (b2 - std::sqrt(b2 * b2 - 4.0 * a2 * c2)) / (2.0 * a2);

    double a3 = 4.0 * min_iou;
    double b3 = -2.0 * min_iou * (w + h);
    double c3 = (min_iou - 1.0) * w * h;
    double r3 = (-b3 + std::sqrt(b3 * b3 - 4.0 * a3 * c3)) / (2.0 * a3);

    return std::max(0.0, std::min({r1, r2, r3}));
}

TrainTarget gaussian_target(const Box& gt, int grid_w, int grid_h, int stride) {
    check(gt.w > 0.0 && gt.h > 0.0, "gaussian_target: degenerate ground-truth box");
    TrainTarget t;
    t.gt_box = gt;
    double cx = gt.cx() / stride, cy = gt.cy() / stride;
    t.center_x = std::clamp(static_cast<int>(std::floor(cx)), 0, grid_w - 1);
    t.center_y = std::clamp(static_cast<int>(std::floor(cy)), 0, grid_h - 1);
    double r = gaussian_radius(gt.w / stride, gt.h / stride);
    t.sigma = std::max((2.0 * r + 1.0) / 6.0, 1e-3);

    std::vector<double> g(static_cast<std::size_t>(grid_h) * grid_w);
    double denom = 2.0 * t.sigma * t.sigma;
    for (int y = 0; y < grid_h; ++y)
        for (int x = 0; x < grid_w; ++x) {
            double dx = x - t.center_x, dy = y - t.center_y;
            g[static_cast<std::size_t>(y) * grid_w + x] = std::exp(-(dx * dx + dy * dy) / denom);
        }
    t.gauss = Tensor({grid_h, grid_w}, std::move(g));
    return t;
}

Tensor focal_loss(const Tensor& score_map, const Tensor& gauss) {
    check(score_map.numel() == gauss.numel(), "focal_loss: map and target size mismatch");
    int n = gauss.numel();

    // constant masks from the target
    std::vector<double> pos(n), neg_w(n);
    for (int i = 0; i < n; ++i) {
        double g = gauss.at(i);
        pos[i] = (g == 1.0) ? 1.0 : 0.0;
        neg_w[i] = (g == 1.0) ? 0.0 : std::pow(1.0 - g, kFocalBeta);
    }
    Tensor pos_mask(score_map.shape(), std::move(pos));
    Tensor neg_mask(score_map.shape(), std::move(neg_w));

    Tensor p = clamp(score_map, kScoreClamp, 1.0 - kScoreClamp);
    Tensor one_minus = add_scalar(neg(p), 1.0);
    Tensor pos_term = mul(pos_mask, mul(pow_scalar(one_minus, kFocalAlpha), log_(p)));
    Tensor neg_term = mul(neg_mask, mul(pow_scalar(p, kFocalAlpha), log_(one_minus)));
    return neg(sum(add(pos_term, neg_term)));
}

namespace {

Tensor scalar_max(const Tensor& a, const Tensor& b) { return maximum(a, b); }

struct Corners {
    Tensor x1, y1, x2, y2;
};

Corners to_corners(const Tensor& box) {
    Tensor cx = reshape(gather_rows(reshape(box, {4, 1}), {0}), {1});
    Tensor cy = reshape(gather_rows(reshape(box, {4, 1}), {1}), {1});
    Tensor w = reshape(gather_rows(reshape(box, {4, 1}), {2}), {1});
    Tensor h = reshape(gather_rows(reshape(box, {4, 1}), {3}), {1});
    Corners c;
    c.x1 = sub(cx, mul_scalar(w, 0.5));
    c.y1 = sub(cy, mul_scalar(h, 0.5));
    c.x2 = add(cx, mul_scalar(w, 0.5));
    c.y2 = add(cy, mul_scalar(h, 0.5));
    return c;
}

}  // namespace

Tensor giou_loss(const Tensor& box_pred, const Box& gt) {
    check(box_pred.numel() == 4, "giou_loss: prediction must be a 4-vector");
    check(gt.w > 0.0 && gt.h > 0.0, "giou_loss: degenerate ground-truth box");
    Corners p = to_corners(box_pred);
    Tensor gx1 = Tensor::scalar(gt.x), gy1 = Tensor::scalar(gt.y);
    Tensor gx2 = Tensor::scalar(gt.x + gt.w), gy2 = Tensor::scalar(gt.y + gt.h);

    Tensor zero = Tensor::scalar(0.0);
    Tensor iw = scalar_max(sub(minimum(p.x2, gx2), maximum(p.x1, gx1)), zero);
    Tensor ih = scalar_max(sub(minimum(p.y2, gy2), maximum(p.y1, gy1)), zero);
    Tensor inter = mul(iw, ih);

    Tensor pa = mul(sub(p.x2, p.x1), sub(p.y2, p.y1));
    Tensor uni = add_scalar(sub(pa, inter), gt.area());

    Tensor cw = sub(maximum(p.x2, gx2), minimum(p.x1, gx1));
    Tensor ch = sub(maximum(p.y2, gy2), minimum(p.y1, gy1));
    Tensor hull = mul(cw, ch);

    Tensor iou_t = div(inter, uni);
    Tensor penalty = div(sub(hull, uni), hull);
    // 1 - GIoU
    return add_scalar(sub(penalty, iou_t), 1.0);
}

Tensor l1_loss(const Tensor& box_pred, const Box& gt) {
    check(box_pred.numel() == 4, "l1_loss: prediction must be a 4-vector");
    Tensor target({4}, {gt.cx(), gt.cy(), gt.w, gt.h});
    Tensor diff = sub(box_pred, target);
    return mean(maximum(diff, neg(diff)));
}

Tensor total_loss(const Tensor& score_map, const Tensor& gauss, const Tensor& box_pred,
                  const Box& gt_norm) {
    Tensor ls = focal_loss(score_map, gauss);
    Tensor lg = mul_scalar(giou_loss(box_pred, gt_norm), kIouWeight);
    Tensor l1 = mul_scalar(l1_loss(box_pred, gt_norm), kL1Weight);
    return add(ls, add(lg, l1));
}

}  // namespace contrack
