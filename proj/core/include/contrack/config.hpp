#pragma once

#include <string>
#include <vector>

#include "contrack/encoder.hpp"
#include "contrack/evalkit.hpp"
#include "contrack/pruning.hpp"
#include "contrack/tracker.hpp"

namespace contrack {

struct OptimConfig {
    double lr = 1e-4;
    double weight_decay = 1e-4;
    int batch_size = 16;
    int epochs = 30;
    int samples_per_epoch = 256;
};

struct SamplerConfig {
    int max_gap = 10;          // t_s - t_d upper bound
    double flip_prob = 0.5;
    double scale_jitter = 0.1;   // templates scaled by U(1-j, 1+j)
    double center_jitter = 0.05; // center shift up to this fraction of the side
};

/// Every tunable in one flat bag; the on-disk form is one `key = value` per
/// line and an unknown key is a hard error.
struct RunConfig {
    EncoderConfig encoder;
    PruneConfig prune{0.7, {2, 4}};
    TrackerConfig tracker;
    OptimConfig optim;
    SamplerConfig sampler;
    GeneratorParams bench;
    int bench_train_sequences = 50;
    int bench_eval_sequences = 20;

    void validate() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
std::string config_to_text(const RunConfig& cfg);

}  // namespace contrack
