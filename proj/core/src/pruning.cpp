#include "contrack/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace contrack {

void PruneConfig::validate(int num_blocks) const {
    check(keep_ratio > 0.0 && keep_ratio <= 1.0, "prune: keep_ratio must be in (0,1]");
    int prev = 0;
    for (int s : stage_indices) {
        check(s >= 1, "prune: stage 0 has no attention weights to score with");
        check(s > prev || prev == 0, "prune: stage indices must be strictly increasing");
        check(s < num_blocks, "prune: stage index past the last block");
        prev = s;
    }
}

std::vector<double> score_tokens(const Tensor& attention_weights, int num_heads,
                                 const TokenSequence& seq) {
    check(attention_weights.defined(), "score_tokens: no attention weights available");
    int n = seq.size();
    check(attention_weights.ndim() == 2 && attention_weights.size(0) == num_heads * n &&
              attention_weights.size(1) == n,
          "score_tokens: weight matrix must be [heads*N, N]");
    std::vector<int> centers = seq.center_indices();
    check(!centers.empty(), "score_tokens: sequence has no center-flagged template tokens");

    std::vector<double> omega;
    for (int j = 0; j < n; ++j) {
        if (seq.segments[j] != Segment::Search) continue;
        double s = 0.0;
        for (int h = 0; h < num_heads; ++h)
            for (int r : centers) s += attention_weights.at(h * n + r, j);
        omega.push_back(s / num_heads);
    }
    return omega;
}

std::pair<TokenSequence, PruneDecision> prune(const TokenSequence& seq,
                                              const std::vector<double>& omega, double rho) {
    check(rho > 0.0 && rho <= 1.0, "prune: rho must be in (0,1]");
    std::vector<int> search_idx = seq.indices(Segment::Search);
    int n = static_cast<int>(search_idx.size());
    check(static_cast<int>(omega.size()) == n, "prune: omega length must match search count");

    int keep = static_cast<int>(std::ceil(rho * n));
    // order: omega descending, ties by ascending original grid index
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (omega[a] != omega[b]) return omega[a] > omega[b];
        return seq.grid_coords[search_idx[a]] < seq.grid_coords[search_idx[b]];
    });

    PruneDecision decision;
    decision.omega = omega;
    std::vector<bool> kept(n, false);
    for (int i = 0; i < keep; ++i) kept[order[i]] = true;
    for (int i = 0; i < n; ++i) {
        if (kept[i])
            decision.kept_indices.push_back(search_idx[i]);
        else
            decision.dropped_grid_coords.push_back(seq.grid_coords[search_idx[i]]);
    }

    std::vector<int> all_kept;
    for (int i = 0; i < seq.size(); ++i)
        if (seq.segments[i] != Segment::Search) all_kept.push_back(i);
    all_kept.insert(all_kept.end(), decision.kept_indices.begin(), decision.kept_indices.end());
    std::sort(all_kept.begin(), all_kept.end());

    TokenSequence out;
    out.embeddings = gather_rows(seq.embeddings, all_kept);
    for (int i : all_kept) {
        out.segments.push_back(seq.segments[i]);
        out.scale_index.push_back(seq.scale_index[i]);
        out.grid_coords.push_back(seq.grid_coords[i]);
        out.center_flags.push_back(seq.center_flags[i]);
    }
    return {std::move(out), std::move(decision)};
}

Tensor scatter_to_grid(const TokenSequence& seq, int grid_w, int grid_h) {
    std::vector<int> search_idx = seq.indices(Segment::Search);
    std::vector<int> targets;
    for (int i : search_idx) {
        auto [r, c] = seq.grid_coords[i];
        check(r >= 0 && r < grid_h && c >= 0 && c < grid_w,
              "scatter_to_grid: grid coordinate out of range");
        targets.push_back(r * grid_w + c);
    }
    Tensor rows = gather_rows(seq.embeddings, search_idx);
    Tensor grid = scatter_rows(rows, targets, grid_w * grid_h);  // [H*W, d]
    int d = grid.size(1);
    return reshape(transpose(grid), {d, grid_h, grid_w});
}

std::vector<int> search_tokens_per_block(const EncoderConfig& cfg, const PruneConfig& prune) {
    prune.validate(cfg.num_blocks);
    std::vector<int> counts(cfg.num_blocks);
    int n = cfg.search_tokens();
    for (int b = 0; b < cfg.num_blocks; ++b) {
        bool stage = std::find(prune.stage_indices.begin(), prune.stage_indices.end(), b) !=
                     prune.stage_indices.end();
        if (stage) n = static_cast<int>(std::ceil(prune.keep_ratio * n));
        counts[b] = n;
    }
    return counts;
}

std::int64_t block_macs(const EncoderConfig& cfg, std::int64_t tokens) {
    std::int64_t e = cfg.embed_dim;
    std::int64_t h = cfg.mlp_hidden();
    // q/k/v/o projections + QK^T + AV + two MLP matmuls
    return 4 * tokens * e * e + 2 * tokens * tokens * e + 2 * tokens * e * h;
}

FlopsReport flops(const EncoderConfig& cfg, const PruneConfig& prune) {
    cfg.validate();
    FlopsReport rep;
    std::int64_t templ = static_cast<std::int64_t>(cfg.template_groups()) * cfg.template_tokens();
    for (int n : search_tokens_per_block(cfg, prune)) {
        std::int64_t tokens = templ + n;
        rep.tokens_per_block.push_back(tokens);
        rep.per_block_macs.push_back(block_macs(cfg, tokens));
        rep.total_macs += rep.per_block_macs.back();
    }
    return rep;
}

std::uint64_t config_hash(const EncoderConfig& cfg, const PruneConfig& prune) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 1099511628211ull;
    };
    mix(cfg.patch_size);
    mix(cfg.embed_dim);
    mix(cfg.num_heads);
    mix(cfg.num_blocks);
    mix(static_cast<std::uint64_t>(cfg.mlp_ratio * 1000));
    mix(cfg.template_resolution);
    mix(cfg.search_resolution);
    mix(cfg.num_scales);
    mix(cfg.use_dynamic ? 1 : 0);
    mix(static_cast<std::uint64_t>(prune.keep_ratio * 1000));
    for (int s : prune.stage_indices) mix(static_cast<std::uint64_t>(s) + 17);
    return h;
}

std::string flops_csv_header() { return "config_hash,rho,stages,per_block_macs,total_macs"; }

std::string flops_csv_row(const EncoderConfig& cfg, const PruneConfig& prune,
                          const FlopsReport& report) {
    std::ostringstream os;
    os << std::hex << config_hash(cfg, prune) << std::dec << "," << prune.keep_ratio << ",";
    for (std::size_t i = 0; i < prune.stage_indices.size(); ++i)
        os << (i ? ";" : "") << prune.stage_indices[i];
    os << ",";
    for (std::size_t i = 0; i < report.per_block_macs.size(); ++i)
        os << (i ? ";" : "") << report.per_block_macs[i];
    os << "," << report.total_macs;
    return os.str();
}

}  // namespace contrack
