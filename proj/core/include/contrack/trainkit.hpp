#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "contrack/config.hpp"
#include "contrack/model.hpp"
#include "contrack/objectives.hpp"

namespace contrack {

struct TrainSample {
    const SequenceRecord* seq = nullptr;
    int t_dynamic = 0, t_search = 0;  // 0-based frames; static crops come from frame 0
    std::vector<Image> static_crops;
    std::vector<Image> dynamic_crops;
    Image search_crop;
    Box gt_in_crop;      // ground truth in search-crop pixels
    TrainTarget target;
};

/// Uniform t_dynamic, then t_search in (t_dynamic, t_dynamic + max_gap];
/// crops are built from ground-truth boxes. Resamples if the target ends up
/// outside the search crop.
TrainSample sample(const SequenceRecord& seq, std::mt19937_64& rng, const RunConfig& cfg);

/// Horizontal flip with flip_prob, template scale jitter, and search-center
/// jitter; rebuilds the crops from the source frames.
TrainSample augment(const TrainSample& s, std::mt19937_64& rng, const RunConfig& cfg);

/// Loss for one sample under an active tape.
Tensor sample_loss(const Model& model, const TrainSample& s);

struct TrainResult {
    std::vector<double> epoch_loss;  // mean total loss per epoch
};

/// Mini-batch training with mean-of-batch gradients. `workers > 1` splits a
/// batch across threads over per-thread model clones; gradients are summed
/// in worker order so results stay deterministic.
TrainResult train(Model& model, const std::vector<SequenceRecord>& dataset,
                  const RunConfig& cfg, std::uint64_t seed, int workers = 1,
                  bool verbose = false);

void write_loss_csv(const std::string& path, const TrainResult& result);

struct AblationRow {
    std::string label;
    double ao = 0.0, sr50 = 0.0, sr75 = 0.0;
    std::int64_t total_macs = 0;
};

std::string ablation_table(const std::vector<AblationRow>& rows);

/// Trains cfg on train_seqs, tracks eval_seqs, and reports mean AO/SR.
AblationRow train_and_evaluate(const RunConfig& cfg, std::uint64_t seed,
                               const std::vector<SequenceRecord>& train_seqs,
                               const std::vector<SequenceRecord>& eval_seqs,
                               const std::string& label, int workers = 1, bool verbose = false);

std::vector<SequenceRecord> generate_benchmark(const GeneratorParams& params, int count,
                                               std::uint64_t seed);

// Ablation grids: static-scale count, dynamic templates on/off, keep ratio.
std::vector<AblationRow> ablate_scales(const RunConfig& base, std::uint64_t seed, int workers,
                                       bool verbose = false);
std::vector<AblationRow> ablate_dynamic(const RunConfig& base, std::uint64_t seed, int workers,
                                        bool verbose = false);
std::vector<AblationRow> ablate_pruning(const RunConfig& base, std::uint64_t seed, int workers,
                                        bool verbose = false);

}  // namespace contrack
