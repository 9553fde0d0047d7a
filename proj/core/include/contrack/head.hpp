#pragma once

#include <cstdint>
#include <vector>

#include "contrack/image.hpp"
#include "contrack/optim.hpp"
#include "contrack/tensor.hpp"

namespace contrack {

struct TrackOutput {
    Tensor score_logits;  // [1, H, W]
    Tensor score_map;     // [1, H, W], sigmoid of logits
    Tensor offsets;       // [2, H, W], fraction of a cell, (dx, dy)
    Tensor sizes;         // [2, H, W], fraction of the search extent, (w, h)
    int grid_w = 0, grid_h = 0;
    int stride = 0;

    int peak_x = 0, peak_y = 0;  // argmax cell, ties at the lowest row-major index
    double confidence = 0.0;     // max of score_map
    Box box;                     // decoded box, search-crop pixels, clamped
    Tensor box_norm;             // [4] (cx, cy, w, h) / search extent; grad path for box losses
};

/// Score, offset, and size branches over the reassembled search feature.
/// Each branch: three 3x3 local-mixing layers with channel halving, then a
/// 1x1 projection.
class TrackHead {
public:
    TrackHead(int embed_dim, int stride, std::uint64_t seed);

    TrackOutput forward(const Tensor& grid) const;  // grid [embed_dim, H, W]
    std::vector<NamedParam> parameters();

private:
    struct Branch {
        std::vector<Tensor> w, b;  // three 3x3 convs + final 1x1
    };
    int embed_dim_;
    int stride_;
    Branch score_, offset_, size_;

    Tensor run_branch(const Branch& br, const Tensor& grid) const;
};

/// Fills peak/confidence/box/box_norm from the raw head maps.
void decode(TrackOutput& out, int search_extent);

}  // namespace contrack
