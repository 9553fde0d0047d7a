#include "contrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fs = std::filesystem;

namespace contrack {

void TrackerConfig::validate() const {
    check(!scales.empty(), "tracker: at least one template scale required");
    for (double k : scales) check(k >= 1.0, "tracker: scale factors must be >= 1");
    check(search_scale >= 1.0, "tracker: search scale must be >= 1");
    check(tau > 0.0 && tau < 1.0, "tracker: tau must lie in (0,1)");
}

Tracker::Tracker(const Model& model, TrackerConfig cfg) : model_(model), cfg_(std::move(cfg)) {
    cfg_.validate();
    check(static_cast<int>(cfg_.scales.size()) == model_.encoder_config().num_scales,
          "tracker: scale list length must equal the model's num_scales");
}

std::vector<TemplateEntry> Tracker::crop_templates(const Image& frame, const Box& box) const {
    int res = model_.encoder_config().template_resolution;
    std::vector<TemplateEntry> out;
    for (double k : cfg_.scales) {
        CropResult c = crop_region(frame, box, k, res);
        out.push_back({std::move(c.crop), box});
    }
    return out;
}

void Tracker::init(const Image& first_frame, const Box& init_box) {
    check(init_box.w > 0.0 && init_box.h > 0.0, "tracker: init box has no area");
    templates_.scales = cfg_.scales;
    templates_.statics = crop_templates(first_frame, init_box);
    templates_.dynamics = templates_.statics;  // D = S at frame 1
    last_box_ = clamp_box(init_box, first_frame.width, first_frame.height);
    frame_index_ = 1;
    initialized_ = true;
}

FrameResult Tracker::track_frame(const Image& frame) {
    check(initialized_, "tracker: track_frame before init");
    const EncoderConfig& ecfg = model_.encoder_config();
    double min_side = cfg_.search_scale * std::sqrt(last_box_.w * last_box_.h);
    check(frame.width >= 4 && frame.height >= 4 && min_side >= 1.0,
          "tracker: frame too small for the search crop");

    CropResult search = crop_region(frame, last_box_, cfg_.search_scale, ecfg.search_resolution);

    std::vector<Image> statics, dynamics;
    for (const auto& t : templates_.statics) statics.push_back(t.crop);
    if (ecfg.use_dynamic)
        for (const auto& t : templates_.dynamics) dynamics.push_back(t.crop);

    ModelForward f = model_.forward(statics, dynamics, search.crop);

    Box frame_box = search.map.box_to_frame(f.out.box);
    frame_box = clamp_box(frame_box, frame.width, frame.height);

    FrameResult res;
    res.box = frame_box;
    res.score = f.out.confidence;
    if (res.score > cfg_.tau) {  // strict inequality gates the update
        templates_.dynamics = crop_templates(frame, frame_box);
        res.updated_dynamic = true;
    }
    last_box_ = frame_box;
    ++frame_index_;
    return res;
}

SequenceResult track_sequence(const Model& model, const TrackerConfig& cfg,
                              const std::vector<Image>& frames, const Box& init_box) {
    check(!frames.empty(), "track_sequence: no frames");
    SequenceResult out;
    Tracker tracker(model, cfg);
    tracker.init(frames[0], init_box);
    out.boxes.push_back(init_box);
    out.scores.push_back(1.0);
    for (std::size_t i = 1; i < frames.size(); ++i) {
        FrameResult r = tracker.track_frame(frames[i]);
        out.boxes.push_back(r.box);
        out.scores.push_back(r.score);
    }
    return out;
}

SequenceDir scan_sequence_dir(const std::string& dir) {
    SequenceDir out;
    check(fs::is_directory(dir), "sequence: " + dir + " is not a directory");
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".ppm") out.frame_paths.push_back(e.path().string());
    }
    std::sort(out.frame_paths.begin(), out.frame_paths.end());
    check(!out.frame_paths.empty(), "sequence: no .ppm frames in " + dir);
    std::ifstream init(dir + "/init.txt");
    check(init.good(), "sequence: missing init.txt in " + dir);
    init >> out.init_box.x >> out.init_box.y >> out.init_box.w >> out.init_box.h;
    check(init.good() && out.init_box.w > 0 && out.init_box.h > 0,
          "sequence: init.txt must contain 'x y w h' with positive extent");
    return out;
}

void write_boxes_csv(const std::string& path, const SequenceResult& result) {
    std::ofstream out(path);
    check(out.good(), "boxes.csv: cannot open " + path);
    out << "frame_index,x,y,w,h,score\n";
    out << std::setprecision(6);
    for (std::size_t i = 0; i < result.boxes.size(); ++i) {
        const Box& b = result.boxes[i];
        out << i << "," << b.x << "," << b.y << "," << b.w << "," << b.h << ","
            << result.scores[i] << "\n";
    }
    check(out.good(), "boxes.csv: write failed");
}

void draw_box(Image& frame, const Box& box, double r, double g, double b) {
    int x0 = std::clamp(static_cast<int>(box.x), 0, frame.width - 1);
    int x1 = std::clamp(static_cast<int>(box.x + box.w), 0, frame.width - 1);
    int y0 = std::clamp(static_cast<int>(box.y), 0, frame.height - 1);
    int y1 = std::clamp(static_cast<int>(box.y + box.h), 0, frame.height - 1);
    double rgb[3] = {r, g, b};
    for (int x = x0; x <= x1; ++x)
        for (int c = 0; c < 3; ++c) {
            frame.at(c, y0, x) = rgb[c];
            frame.at(c, y1, x) = rgb[c];
        }
    for (int y = y0; y <= y1; ++y)
        for (int c = 0; c < 3; ++c) {
            frame.at(c, y, x0) = rgb[c];
            frame.at(c, y, x1) = rgb[c];
        }
}

}  // namespace contrack
