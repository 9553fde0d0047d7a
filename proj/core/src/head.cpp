#include "contrack/head.hpp"

#include <cmath>
#include <random>

namespace contrack {

namespace {

Tensor conv_init(Shape shape, std::mt19937_64& rng) {
    int fan_in = shape[1] * shape[2] * shape[3];
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    std::vector<double> data(static_cast<std::size_t>(numel(shape)));
    for (double& v : data) v = dist(rng);
    Tensor t(std::move(shape), std::move(data));
    t.set_requires_grad(true);
    return t;
}

/// One element of a tensor as a [1] tensor, keeping the grad path.
Tensor pick(const Tensor& t, int index) {
    Tensor flat = reshape(t, {t.numel(), 1});
    return reshape(gather_rows(flat, {index}), {1});
}

}  // namespace

TrackHead::TrackHead(int embed_dim, int stride, std::uint64_t seed)
    : embed_dim_(embed_dim), stride_(stride) {
    std::mt19937_64 rng(seed);
    auto build = [&](int out_ch) {
        Branch br;
        int c = embed_dim_;
        for (int i = 0; i < 3; ++i) {
            int next = std::max(c / 2, 4);
            br.w.push_back(conv_init({next, c, 3, 3}, rng));
            br.b.push_back(Tensor::zeros({next}).set_requires_grad(true));
            c = next;
        }
        br.w.push_back(conv_init({out_ch, c, 1, 1}, rng));
        br.b.push_back(Tensor::zeros({out_ch}).set_requires_grad(true));
        return br;
    };
    score_ = build(1);
    offset_ = build(2);
    size_ = build(2);
}

Tensor TrackHead::run_branch(const Branch& br, const Tensor& grid) const {
    Tensor x = grid;
    for (int i = 0; i < 3; ++i) x = gelu(conv2d(x, br.w[i], br.b[i], 1));
    return conv2d(x, br.w[3], br.b[3], 0);
}

TrackOutput TrackHead::forward(const Tensor& grid) const {
    check(grid.ndim() == 3 && grid.size(0) == embed_dim_,
          "head: expected grid [embed_dim, H, W]");
    TrackOutput out;
    out.grid_h = grid.size(1);
    out.grid_w = grid.size(2);
    out.stride = stride_;
    out.score_logits = run_branch(score_, grid);
    out.score_map = sigmoid(out.score_logits);
    out.offsets = sigmoid(run_branch(offset_, grid));
    out.sizes = sigmoid(run_branch(size_, grid));
    return out;
}

void decode(TrackOutput& out, int search_extent) {
    int h = out.grid_h, w = out.grid_w;
    const auto& score = out.score_map.data();
    int best = 0;
    for (int i = 1; i < h * w; ++i)
        if (score[i] > score[best]) best = i;  // strict: ties keep the lowest index
    out.peak_y = best / w;
    out.peak_x = best % w;
    out.confidence = score[best];

    int cell = out.peak_y * w + out.peak_x;
    Tensor dx = pick(out.offsets, cell);
    Tensor dy = pick(out.offsets, h * w + cell);
    Tensor bw = pick(out.sizes, cell);
    Tensor bh = pick(out.sizes, h * w + cell);

    // (x_hat + dx, y_hat + dy) in grid cells, sizes as a fraction of the extent
    double inv_w = 1.0 / w, inv_h = 1.0 / h;
    Tensor cx = mul_scalar(add_scalar(dx, out.peak_x), inv_w);
    Tensor cy = mul_scalar(add_scalar(dy, out.peak_y), inv_h);
    out.box_norm = concat({cx, cy, bw, bh}, 0);

    double ext = search_extent;
    Box b = Box::from_center(out.box_norm.at(0) * ext, out.box_norm.at(1) * ext,
                             out.box_norm.at(2) * ext, out.box_norm.at(3) * ext);
    out.box = clamp_box(b, ext, ext);
}

std::vector<NamedParam> TrackHead::parameters() {
    std::vector<NamedParam> out;
    auto add_branch = [&out](const char* name, Branch& br) {
        for (std::size_t i = 0; i < br.w.size(); ++i) {
            std::string p = std::string("head.") + name + std::to_string(i);
            out.push_back({p + ".w", br.w[i]});
            out.push_back({p + ".b", br.b[i]});
        }
    };
    add_branch("score", score_);
    add_branch("offset", offset_);
    add_branch("size", size_);
    return out;
}

}  // namespace contrack
