#pragma once

#include <optional>
#include <string>
#include <vector>

#include "contrack/image.hpp"
#include "contrack/model.hpp"

namespace contrack {

struct TemplateEntry {
    Image crop;
    Box source_box;  // frame coordinates the crop was taken from
};

struct TemplateSet {
    std::vector<TemplateEntry> statics;
    std::vector<TemplateEntry> dynamics;
    std::vector<double> scales;
};

struct TrackerConfig {
    std::vector<double> scales = {2.0, 4.0};  // template scale factors
    double search_scale = 4.0;
    double tau = 0.7;  // dynamic-template update gate

    void validate() const;
};

struct FrameResult {
    Box box;         // frame coordinates
    double score = 0.0;
    bool updated_dynamic = false;
};

/// Per-sequence tracking state machine: crops the search area around the last
/// prediction, runs the model, and refreshes dynamic templates when the
/// confidence clears tau.
class Tracker {
public:
    Tracker(const Model& model, TrackerConfig cfg);

    void init(const Image& first_frame, const Box& init_box);
    FrameResult track_frame(const Image& frame);

    bool initialized() const { return initialized_; }
    const TemplateSet& templates() const { return templates_; }
    const Box& last_box() const { return last_box_; }
    int frame_index() const { return frame_index_; }

private:
    const Model& model_;
    TrackerConfig cfg_;
    TemplateSet templates_;
    Box last_box_;
    int frame_index_ = 0;
    bool initialized_ = false;

    std::vector<TemplateEntry> crop_templates(const Image& frame, const Box& box) const;
};

struct SequenceResult {
    std::vector<Box> boxes;
    std::vector<double> scores;
};

SequenceResult track_sequence(const Model& model, const TrackerConfig& cfg,
                              const std::vector<Image>& frames, const Box& init_box);

/// Sequence directory: numbered .ppm frames + init.txt with "x y w h".
struct SequenceDir {
    std::vector<std::string> frame_paths;
    Box init_box;
};
SequenceDir scan_sequence_dir(const std::string& dir);
void write_boxes_csv(const std::string& path, const SequenceResult& result);
void draw_box(Image& frame, const Box& box, double r, double g, double b);

}  // namespace contrack
