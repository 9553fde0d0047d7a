#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "contrack/image.hpp"
#include "contrack/optim.hpp"
#include "contrack/tensor.hpp"

namespace contrack {

struct EncoderConfig {
    int patch_size = 16;
    int embed_dim = 64;
    int num_heads = 4;
    int num_blocks = 6;
    double mlp_ratio = 4.0;
    int template_resolution = 32;
    int search_resolution = 64;
    int num_scales = 2;      // m
    bool use_dynamic = true;

    void validate() const;
    int template_grid() const { return template_resolution / patch_size; }
    int search_grid() const { return search_resolution / patch_size; }
    int template_tokens() const { return template_grid() * template_grid(); }
    int search_tokens() const { return search_grid() * search_grid(); }
    int template_groups() const { return num_scales * (use_dynamic ? 2 : 1); }
    int total_tokens() const { return template_groups() * template_tokens() + search_tokens(); }
    int mlp_hidden() const { return static_cast<int>(mlp_ratio * embed_dim + 0.5); }
    bool operator==(const EncoderConfig&) const = default;
};

enum class Segment : std::uint8_t { Static, Dynamic, Search };

struct TokenSequence {
    Tensor embeddings;  // [N, embed_dim]
    std::vector<Segment> segments;
    std::vector<int> scale_index;                 // template scale slot, -1 for search
    std::vector<std::pair<int, int>> grid_coords; // (row, col) in the source patch grid
    std::vector<bool> center_flags;

    int size() const { return static_cast<int>(segments.size()); }
    int count(Segment s) const;
    std::vector<int> indices(Segment s) const;
    std::vector<int> center_indices() const;
};

struct AttentionBlock {
    Tensor wq, wk, wv, wo;  // [d, d]
    Tensor bq, bk, bv, bo;  // [d]
    Tensor ln1_g, ln1_b, ln2_g, ln2_b;
    Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

struct AttentionOut {
    Tensor context;  // [N, d] = per-head softmax(QK^T/sqrt(dk)) V, heads concatenated
    Tensor weights;  // [heads*N, N] post-softmax rows, head-major
};

/// Scaled-dot-product multi-head attention over the whole sequence.
/// Output projection is applied by the caller (block residual path).
AttentionOut attention(const AttentionBlock& blk, const Tensor& x, int num_heads);

struct PruneConfig;
struct PruneDecision;

struct EncoderTrace {
    TokenSequence seq;
    std::vector<PruneDecision> decisions;                  // one per executed stage
    std::vector<std::pair<int, int>> kept_search_coords;   // grid coords of survivors
};

class Encoder {
public:
    Encoder(EncoderConfig cfg, std::uint64_t seed);

    const EncoderConfig& config() const { return cfg_; }
    std::vector<AttentionBlock>& blocks() { return blocks_; }
    const std::vector<AttentionBlock>& blocks() const { return blocks_; }

    /// Patch embedding + positional + segment-type embedding over
    /// [statics; dynamics; search]. Crop vectors are scale-ordered.
    TokenSequence embed(const std::vector<Image>& static_crops,
                        const std::vector<Image>& dynamic_crops,
                        const Image& search_crop) const;

    EncoderTrace forward(TokenSequence seq, const PruneConfig& schedule) const;

    std::vector<NamedParam> parameters();

private:
    EncoderConfig cfg_;
    Tensor patch_w_, patch_b_;         // [3*ps*ps, d], [d]
    Tensor pos_template_, pos_search_; // [T, d], [N_x, d]
    Tensor seg_embed_;                 // [3, d]
    std::vector<AttentionBlock> blocks_;

    Tensor embed_one(const Image& crop, int grid, const Tensor& pos, Segment seg) const;
    Tensor block_forward(const AttentionBlock& blk, const Tensor& x, Tensor* weights_out) const;
};

}  // namespace contrack
