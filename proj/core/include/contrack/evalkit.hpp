#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "contrack/image.hpp"

namespace contrack {

struct GeneratorParams {
    int frame_size = 256;
    int num_frames = 40;
    double target_size = 64.0;   // initial box side
    int num_distractors = 3;
    double hue_drift = 0.004;    // hue change per frame (hue in [0,1))
    double scale_drift = 0.01;   // per-frame relative size step bound
    double max_step = 6.0;       // walk velocity bound, pixels/frame
    int shape_sides = 0;         // 0 = ellipse, otherwise regular polygon

    void validate() const;
};

struct SequenceRecord {
    std::vector<Image> frames;
    std::vector<Box> gt;       // one per frame
    std::vector<double> hues;  // target hue per frame, bookkeeping for tests
    GeneratorParams params;
    std::uint64_t seed = 0;
};

/// A drifting target plus similar-looking distractors on a constant
/// background; bitwise deterministic for a fixed seed.
SequenceRecord generate(const GeneratorParams& params, std::uint64_t seed);

void write_sequence_dir(const SequenceRecord& rec, const std::string& dir);
SequenceRecord load_sequence_dir(const std::string& dir);

struct EvalReport {
    std::vector<double> iou_trace;  // frames 2..n
    double ao = 0.0;
    double sr50 = 0.0;
    double sr75 = 0.0;
};

/// AO = mean IoU over frames 2..n (frame 1 is the given init); SR_theta is
/// the fraction of those frames with IoU > theta.
EvalReport evaluate(const std::vector<Box>& pred, const std::vector<Box>& gt);

void write_report_csv(const std::string& path, const std::vector<EvalReport>& reports);
void write_report_text(const std::string& path, const std::vector<EvalReport>& reports);
double mean_ao(const std::vector<EvalReport>& reports);

void hsv_to_rgb(double h, double s, double v, double rgb[3]);

}  // namespace contrack
