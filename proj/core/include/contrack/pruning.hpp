#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "contrack/encoder.hpp"
#include "contrack/tensor.hpp"

namespace contrack {

struct PruneConfig {
    double keep_ratio = 0.7;          // rho in (0, 1]
    std::vector<int> stage_indices;   // prune runs before block i (0-based), each >= 1

    void validate(int num_blocks) const;
    bool empty() const { return stage_indices.empty(); }
};

struct PruneDecision {
    std::vector<double> omega;                         // one score per current search token
    std::vector<int> kept_indices;                     // into the current sequence
    std::vector<std::pair<int, int>> dropped_grid_coords;
};

/// Relevance of each search token: mean over heads of the summed attention
/// mass that center-flagged template rows place on it.
std::vector<double> score_tokens(const Tensor& attention_weights, int num_heads,
                                 const TokenSequence& seq);

/// Keeps the top-ceil(rho * n) search tokens; template tokens pass through.
/// Ties break toward the lowest original grid index (row-major).
std::pair<TokenSequence, PruneDecision> prune(const TokenSequence& seq,
                                              const std::vector<double>& omega, double rho);

/// Survivors return to their original grid positions; pruned cells are zero.
/// Result is [embed_dim, H_x, W_x].
Tensor scatter_to_grid(const TokenSequence& seq, int grid_w, int grid_h);

/// Search-token counts alive before each block, after applying the schedule.
std::vector<int> search_tokens_per_block(const EncoderConfig& cfg, const PruneConfig& prune);

struct FlopsReport {
    std::vector<std::int64_t> tokens_per_block;
    std::vector<std::int64_t> per_block_macs;
    std::int64_t total_macs = 0;
};

/// Analytic multiply-accumulate counts for the attention/MLP stack given the
/// token counts alive at each block.
FlopsReport flops(const EncoderConfig& cfg, const PruneConfig& prune);

std::int64_t block_macs(const EncoderConfig& cfg, std::int64_t tokens);

std::uint64_t config_hash(const EncoderConfig& cfg, const PruneConfig& prune);
std::string flops_csv_header();
std::string flops_csv_row(const EncoderConfig& cfg, const PruneConfig& prune,
                          const FlopsReport& report);

}  // namespace contrack
