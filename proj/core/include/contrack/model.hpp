#pragma once

#include <string>
#include <vector>

#include "contrack/encoder.hpp"
#include "contrack/head.hpp"
#include "contrack/pruning.hpp"

namespace contrack {

struct ModelForward {
    EncoderTrace trace;
    TrackOutput out;
};

/// Encoder + tracking head behind one parameter list and checkpoint.
class Model {
public:
    Model(EncoderConfig enc_cfg, PruneConfig prune_cfg, std::uint64_t seed);

    const EncoderConfig& encoder_config() const { return encoder_.config(); }
    const PruneConfig& prune_config() const { return prune_cfg_; }
    Encoder& encoder() { return encoder_; }
    const Encoder& encoder() const { return encoder_; }
    TrackHead& head() { return head_; }

    ModelForward forward(const std::vector<Image>& static_crops,
                         const std::vector<Image>& dynamic_crops,
                         const Image& search_crop) const;

    std::vector<NamedParam> parameters();

    void save(const std::string& path);
    /// Loads a checkpoint written by save(); the stored encoder config must
    /// match this model's config exactly.
    void load(const std::string& path);

private:
    PruneConfig prune_cfg_;
    Encoder encoder_;
    TrackHead head_;
};

/// Checkpoint container: versioned text manifest (config + named tensor
/// shapes) followed by little-endian float64 buffers in manifest order.
void save_checkpoint(const std::string& path, const EncoderConfig& cfg,
                     const std::vector<NamedParam>& params);
void load_checkpoint(const std::string& path, const EncoderConfig& expected_cfg,
                     std::vector<NamedParam>& params);
EncoderConfig peek_checkpoint_config(const std::string& path);

}  // namespace contrack
