#include "contrack/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "contrack/pruning.hpp"

namespace contrack {

void EncoderConfig::validate() const {
    check(patch_size > 0, "config: patch_size must be positive");
    check(template_resolution % patch_size == 0,
          "config: template_resolution must be a multiple of patch_size");
    check(search_resolution % patch_size == 0,
          "config: search_resolution must be a multiple of patch_size");
    check(embed_dim % num_heads == 0, "config: embed_dim must be divisible by num_heads");
    check(num_blocks > 0, "config: num_blocks must be positive");
    check(num_scales > 0, "config: num_scales must be positive");
    check(mlp_ratio > 0.0, "config: mlp_ratio must be positive");
}

int TokenSequence::count(Segment s) const {
    int n = 0;
    for (Segment seg : segments)
        if (seg == s) ++n;
    return n;
}

std::vector<int> TokenSequence::indices(Segment s) const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
        if (segments[i] == s) out.push_back(i);
    return out;
}

std::vector<int> TokenSequence::center_indices() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
        if (center_flags[i]) out.push_back(i);
    return out;
}

namespace {

Tensor init_param(Shape shape, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> data(static_cast<std::size_t>(numel(shape)));
    for (double& v : data) v = dist(rng);
    Tensor t(std::move(shape), std::move(data));
    t.set_requires_grad(true);
    return t;
}

/// Center token flags on a g x g patch grid: the middle token when g is odd,
/// the four tokens around the center when g is even.
bool is_center_cell(int row, int col, int g) {
    if (g % 2 == 1) return row == g / 2 && col == g / 2;
    return (row == g / 2 - 1 || row == g / 2) && (col == g / 2 - 1 || col == g / 2);
}

}  // namespace

Encoder::Encoder(EncoderConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(seed);
    int d = cfg_.embed_dim;
    int plen = 3 * cfg_.patch_size * cfg_.patch_size;
    double w_std = 0.02;
    patch_w_ = init_param({plen, d}, w_std, rng);
    patch_b_ = Tensor::zeros({d}).set_requires_grad(true);
    pos_template_ = init_param({cfg_.template_tokens(), d}, w_std, rng);
    pos_search_ = init_param({cfg_.search_tokens(), d}, w_std, rng);
    seg_embed_ = init_param({3, d}, w_std, rng);
    int hidden = cfg_.mlp_hidden();
    blocks_.resize(cfg_.num_blocks);
    for (auto& b : blocks_) {
        b.wq = init_param({d, d}, w_std, rng);
        b.wk = init_param({d, d}, w_std, rng);
        b.wv = init_param({d, d}, w_std, rng);
        b.wo = init_param({d, d}, w_std, rng);
        b.bq = Tensor::zeros({d}).set_requires_grad(true);
        b.bk = Tensor::zeros({d}).set_requires_grad(true);
        b.bv = Tensor::zeros({d}).set_requires_grad(true);
        b.bo = Tensor::zeros({d}).set_requires_grad(true);
        b.ln1_g = Tensor::full({d}, 1.0).set_requires_grad(true);
        b.ln1_b = Tensor::zeros({d}).set_requires_grad(true);
        b.ln2_g = Tensor::full({d}, 1.0).set_requires_grad(true);
        b.ln2_b = Tensor::zeros({d}).set_requires_grad(true);
        b.mlp_w1 = init_param({d, hidden}, w_std, rng);
        b.mlp_b1 = Tensor::zeros({hidden}).set_requires_grad(true);
        b.mlp_w2 = init_param({hidden, d}, w_std, rng);
        b.mlp_b2 = Tensor::zeros({d}).set_requires_grad(true);
    }
}

Tensor Encoder::embed_one(const Image& crop, int grid, const Tensor& pos, Segment seg) const {
    int ps = cfg_.patch_size;
    int res = grid * ps;
    check(crop.width == res && crop.height == res,
          "embed: crop is " + std::to_string(crop.width) + "x" + std::to_string(crop.height) +
              ", config expects " + std::to_string(res) + "x" + std::to_string(res));
    int plen = 3 * ps * ps;
    std::vector<double> patches(static_cast<std::size_t>(grid) * grid * plen);
    for (int pr = 0; pr < grid; ++pr)
        for (int pc = 0; pc < grid; ++pc) {
            std::size_t base = (static_cast<std::size_t>(pr) * grid + pc) * plen;
            std::size_t o = 0;
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < ps; ++y)
                    for (int x = 0; x < ps; ++x)
                        patches[base + o++] = crop.at(c, pr * ps + y, pc * ps + x);
        }
    Tensor patch_mat({grid * grid, plen}, std::move(patches));
    Tensor emb = add_rowvec(matmul(patch_mat, patch_w_), patch_b_);
    emb = add(emb, pos);
    Tensor seg_row = reshape(gather_rows(seg_embed_, {static_cast<int>(seg)}), {cfg_.embed_dim});
    return add_rowvec(emb, seg_row);
}

TokenSequence Encoder::embed(const std::vector<Image>& static_crops,
                             const std::vector<Image>& dynamic_crops,
                             const Image& search_crop) const {
    check(static_cast<int>(static_crops.size()) == cfg_.num_scales,
          "embed: expected one static crop per scale");
    if (cfg_.use_dynamic)
        check(static_cast<int>(dynamic_crops.size()) == cfg_.num_scales,
              "embed: expected one dynamic crop per scale");
    else
        check(dynamic_crops.empty(), "embed: dynamic crops supplied but use_dynamic is off");

    TokenSequence seq;
    std::vector<Tensor> parts;
    int tg = cfg_.template_grid(), sg = cfg_.search_grid();

    auto push_template = [&](const Image& crop, Segment seg, int scale) {
        parts.push_back(embed_one(crop, tg, pos_template_, seg));
        for (int r = 0; r < tg; ++r)
            for (int c = 0; c < tg; ++c) {
                seq.segments.push_back(seg);
                seq.scale_index.push_back(scale);
                seq.grid_coords.emplace_back(r, c);
                seq.center_flags.push_back(is_center_cell(r, c, tg));
            }
    };

    for (int s = 0; s < cfg_.num_scales; ++s) push_template(static_crops[s], Segment::Static, s);
    if (cfg_.use_dynamic)
        for (int s = 0; s < cfg_.num_scales; ++s)
            push_template(dynamic_crops[s], Segment::Dynamic, s);

    parts.push_back(embed_one(search_crop, sg, pos_search_, Segment::Search));
    for (int r = 0; r < sg; ++r)
        for (int c = 0; c < sg; ++c) {
            seq.segments.push_back(Segment::Search);
            seq.scale_index.push_back(-1);
            seq.grid_coords.emplace_back(r, c);
            seq.center_flags.push_back(false);
        }

    seq.embeddings = concat(parts, 0);
    return seq;
}

AttentionOut attention(const AttentionBlock& blk, const Tensor& x, int num_heads) {
    check(x.ndim() == 2 && x.size(0) > 0, "attention: sequence must be nonempty [N,d]");
    int d = x.size(1);
    check(d % num_heads == 0, "attention: embed dim not divisible by head count");
    int dk = d / num_heads;
    double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    Tensor q = add_rowvec(matmul(x, blk.wq), blk.bq);
    Tensor k = add_rowvec(matmul(x, blk.wk), blk.bk);
    Tensor v = add_rowvec(matmul(x, blk.wv), blk.bv);

    std::vector<Tensor> contexts, weight_parts;
    for (int h = 0; h < num_heads; ++h) {
        Tensor qh = slice_cols(q, h * dk, dk);
        Tensor kh = slice_cols(k, h * dk, dk);
        Tensor vh = slice_cols(v, h * dk, dk);
        Tensor scores = mul_scalar(matmul(qh, transpose(kh)), inv_sqrt_dk);
        Tensor a = softmax_rows(scores);
        weight_parts.push_back(a);
        contexts.push_back(matmul(a, vh));
    }
    AttentionOut out;
    out.context = contexts.size() == 1 ? contexts[0] : concat(contexts, 1);
    out.weights = weight_parts.size() == 1 ? weight_parts[0] : concat(weight_parts, 0);
    return out;
}

Tensor Encoder::block_forward(const AttentionBlock& blk, const Tensor& x, Tensor* weights_out) const {
    AttentionOut att = attention(blk, layer_norm(x, blk.ln1_g, blk.ln1_b), cfg_.num_heads);
    if (weights_out) *weights_out = att.weights;
    Tensor h = add(x, add_rowvec(matmul(att.context, blk.wo), blk.bo));
    Tensor m = layer_norm(h, blk.ln2_g, blk.ln2_b);
    m = gelu(add_rowvec(matmul(m, blk.mlp_w1), blk.mlp_b1));
    m = add_rowvec(matmul(m, blk.mlp_w2), blk.mlp_b2);
    return add(h, m);
}

EncoderTrace Encoder::forward(TokenSequence seq, const PruneConfig& schedule) const {
    schedule.validate(cfg_.num_blocks);
    EncoderTrace trace;
    Tensor prev_weights;
    for (int b = 0; b < cfg_.num_blocks; ++b) {
        bool stage = std::find(schedule.stage_indices.begin(), schedule.stage_indices.end(), b) !=
                     schedule.stage_indices.end();
        if (stage) {
            std::vector<double> omega = score_tokens(prev_weights, cfg_.num_heads, seq);
            auto [pruned, decision] = prune(seq, omega, schedule.keep_ratio);
            seq = std::move(pruned);
            trace.decisions.push_back(std::move(decision));
        }
        seq.embeddings = block_forward(blocks_[b], seq.embeddings, &prev_weights);
    }
    for (int i = 0; i < seq.size(); ++i)
        if (seq.segments[i] == Segment::Search)
            trace.kept_search_coords.push_back(seq.grid_coords[i]);
    trace.seq = std::move(seq);
    return trace;
}

std::vector<NamedParam> Encoder::parameters() {
    std::vector<NamedParam> out;
    out.push_back({"encoder.patch_w", patch_w_});
    out.push_back({"encoder.patch_b", patch_b_});
    out.push_back({"encoder.pos_template", pos_template_});
    out.push_back({"encoder.pos_search", pos_search_});
    out.push_back({"encoder.seg_embed", seg_embed_});
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        auto& b = blocks_[i];
        std::string p = "encoder.block" + std::to_string(i) + ".";
        out.push_back({p + "wq", b.wq});
        out.push_back({p + "wk", b.wk});
        out.push_back({p + "wv", b.wv});
        out.push_back({p + "wo", b.wo});
        out.push_back({p + "bq", b.bq});
        out.push_back({p + "bk", b.bk});
        out.push_back({p + "bv", b.bv});
        out.push_back({p + "bo", b.bo});
        out.push_back({p + "ln1_g", b.ln1_g});
        out.push_back({p + "ln1_b", b.ln1_b});
        out.push_back({p + "ln2_g", b.ln2_g});
        out.push_back({p + "ln2_b", b.ln2_b});
        out.push_back({p + "mlp_w1", b.mlp_w1});
        out.push_back({p + "mlp_b1", b.mlp_b1});
        out.push_back({p + "mlp_w2", b.mlp_w2});
        out.push_back({p + "mlp_b2", b.mlp_b2});
    }
    return out;
}

}  // namespace contrack
