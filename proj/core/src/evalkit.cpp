#include "contrack/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "contrack/tensor.hpp"

namespace fs = std::filesystem;

namespace contrack {

void GeneratorParams::validate() const {
    check(frame_size >= 4 * static_cast<int>(target_size),
          "generator: frame must be at least 4x the object size");
    check(num_frames >= 1, "generator: need at least one frame");
    check(target_size >= 4.0, "generator: target too small to rasterize");
    check(num_distractors >= 0, "generator: negative distractor count");
}

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
    h = h - std::floor(h);
    double c = v * s;
    double hp = h * 6.0;
    double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(hp)) {
        case 0: r = c; g = x; break;
        case 1: r = x; g = c; break;
        case 2: g = c; b = x; break;
        case 3: g = x; b = c; break;
        case 4: r = x; b = c; break;
        default: r = c; b = x; break;
    }
    double m = v - c;
    rgb[0] = r + m;
    rgb[1] = g + m;
    rgb[2] = b + m;
}

namespace {

struct Blob {
    double cx, cy, vx, vy;
    double size;   // box side
    double hue;
    double sat, val;
};

/// Inside test for the blob shape: ellipse, or a regular polygon inscribed in
/// the box.
bool inside_shape(double px, double py, const Blob& b, int sides) {
    double dx = (px - b.cx) / (b.size / 2.0);
    double dy = (py - b.cy) / (b.size / 2.0);
    if (sides == 0) return dx * dx + dy * dy <= 1.0;
    double r = std::hypot(dx, dy);
    if (r < 1e-9) return true;
    double ang = std::atan2(dy, dx);
    double sector = 2.0 * M_PI / sides;
    double a = std::fmod(ang + 2.0 * M_PI, sector) - sector / 2.0;
    // distance to the polygon edge along this direction
    double edge = std::cos(sector / 2.0) / std::cos(a);
    return r <= edge;
}

void draw_blob(Image& img, const Blob& b, int sides) {
    double rgb[3];
    hsv_to_rgb(b.hue, b.sat, b.val, rgb);
    int x0 = std::max(0, static_cast<int>(std::floor(b.cx - b.size / 2.0)));
    int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(b.cx + b.size / 2.0)));
    int y0 = std::max(0, static_cast<int>(std::floor(b.cy - b.size / 2.0)));
    int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(b.cy + b.size / 2.0)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if (inside_shape(x + 0.5, y + 0.5, b, sides))
                for (int c = 0; c < 3; ++c) img.at(c, y, x) = rgb[c];
}

void step_blob(Blob& b, std::mt19937_64& rng, const GeneratorParams& p, int frame_size) {
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    b.vx = std::clamp(b.vx + jitter(rng) * p.max_step * 0.3, -p.max_step, p.max_step);
    b.vy = std::clamp(b.vy + jitter(rng) * p.max_step * 0.3, -p.max_step, p.max_step);
    b.cx += b.vx;
    b.cy += b.vy;
    double margin = b.size / 2.0 + 1.0;
    if (b.cx < margin) { b.cx = margin; b.vx = std::fabs(b.vx); }
    if (b.cx > frame_size - margin) { b.cx = frame_size - margin; b.vx = -std::fabs(b.vx); }
    if (b.cy < margin) { b.cy = margin; b.vy = std::fabs(b.vy); }
    if (b.cy > frame_size - margin) { b.cy = frame_size - margin; b.vy = -std::fabs(b.vy); }
    b.size = std::clamp(b.size * (1.0 + jitter(rng) * p.scale_drift), p.target_size * 0.5,
                        p.target_size * 1.5);
}

}  // namespace

SequenceRecord generate(const GeneratorParams& params, std::uint64_t seed) {
    params.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    SequenceRecord rec;
    rec.params = params;
    rec.seed = seed;
    int fs = params.frame_size;

    // constant background: soft two-corner gradient
    double bg_hue = u01(rng);
    double bg_rgb_a[3], bg_rgb_b[3];
    hsv_to_rgb(bg_hue, 0.2, 0.35, bg_rgb_a);
    hsv_to_rgb(bg_hue + 0.08, 0.2, 0.55, bg_rgb_b);
    Image background(fs, fs);
    for (int y = 0; y < fs; ++y)
        for (int x = 0; x < fs; ++x) {
            double t = (x + y) / (2.0 * (fs - 1));
            for (int c = 0; c < 3; ++c)
                background.at(c, y, x) = bg_rgb_a[c] * (1.0 - t) + bg_rgb_b[c] * t;
        }

    auto spawn = [&](double size, double hue) {
        Blob b;
        double margin = size / 2.0 + 2.0;
        b.cx = margin + u01(rng) * (fs - 2.0 * margin);
        b.cy = margin + u01(rng) * (fs - 2.0 * margin);
        b.vx = (u01(rng) * 2.0 - 1.0) * params.max_step * 0.5;
        b.vy = (u01(rng) * 2.0 - 1.0) * params.max_step * 0.5;
        b.size = size;
        b.hue = hue;
        b.sat = 0.8;
        b.val = 0.9;
        return b;
    };

    double target_hue = u01(rng);
    Blob target = spawn(params.target_size, target_hue);
    target.cx = fs / 2.0;  // target starts centered; distractors roam
    target.cy = fs / 2.0;

    std::vector<Blob> distractors;
    for (int i = 0; i < params.num_distractors; ++i) {
        double off = (u01(rng) * 2.0 - 1.0) * 0.06;  // crowded: near-target hue
        distractors.push_back(spawn(params.target_size * (0.8 + 0.4 * u01(rng)),
                                    target_hue + off));
    }

    for (int f = 0; f < params.num_frames; ++f) {
        if (f > 0) {
            step_blob(target, rng, params, fs);
            for (Blob& d : distractors) step_blob(d, rng, params, fs);
            target.hue = target_hue + params.hue_drift * f;
        }
        Image frame = background;
        for (const Blob& d : distractors) draw_blob(frame, d, params.shape_sides);
        draw_blob(frame, target, params.shape_sides);
        rec.frames.push_back(std::move(frame));
        rec.gt.push_back(Box::from_center(target.cx, target.cy, target.size, target.size));
        rec.hues.push_back(target.hue);
    }
    return rec;
}

void write_sequence_dir(const SequenceRecord& rec, const std::string& dir) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < rec.frames.size(); ++i) {
        std::ostringstream name;
        name << dir << "/frame_" << std::setw(4) << std::setfill('0') << i << ".ppm";
        save_ppm(rec.frames[i], name.str());
    }
    std::ofstream gt(dir + "/gt.txt");
    gt << std::setprecision(10);
    for (const Box& b : rec.gt) gt << b.x << " " << b.y << " " << b.w << " " << b.h << "\n";
    std::ofstream init(dir + "/init.txt");
    init << std::setprecision(10);
    init << rec.gt[0].x << " " << rec.gt[0].y << " " << rec.gt[0].w << " " << rec.gt[0].h << "\n";
    std::ofstream params(dir + "/params.txt");
    params << "frame_size = " << rec.params.frame_size << "\n"
           << "num_frames = " << rec.params.num_frames << "\n"
           << "target_size = " << rec.params.target_size << "\n"
           << "num_distractors = " << rec.params.num_distractors << "\n"
           << "hue_drift = " << rec.params.hue_drift << "\n"
           << "scale_drift = " << rec.params.scale_drift << "\n"
           << "max_step = " << rec.params.max_step << "\n"
           << "shape_sides = " << rec.params.shape_sides << "\n"
           << "seed = " << rec.seed << "\n";
}

SequenceRecord load_sequence_dir(const std::string& dir) {
    SequenceRecord rec;
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".ppm") paths.push_back(e.path().string());
    std::sort(paths.begin(), paths.end());
    check(!paths.empty(), "load_sequence_dir: no frames in " + dir);
    for (const auto& p : paths) rec.frames.push_back(load_ppm(p));
    std::ifstream gt(dir + "/gt.txt");
    check(gt.good(), "load_sequence_dir: missing gt.txt in " + dir);
    Box b;
    while (gt >> b.x >> b.y >> b.w >> b.h) rec.gt.push_back(b);
    check(rec.gt.size() == rec.frames.size(),
          "load_sequence_dir: gt.txt row count does not match frame count");
    return rec;
}

EvalReport evaluate(const std::vector<Box>& pred, const std::vector<Box>& gt) {
    check(pred.size() == gt.size(), "evaluate: prediction/ground-truth length mismatch");
    check(!pred.empty(), "evaluate: empty input");
    EvalReport rep;
    for (std::size_t i = 1; i < pred.size(); ++i) rep.iou_trace.push_back(iou(pred[i], gt[i]));
    if (rep.iou_trace.empty()) return rep;
    double s = 0.0;
    int n50 = 0, n75 = 0;
    for (double v : rep.iou_trace) {
        s += v;
        if (v > 0.5) ++n50;
        if (v > 0.75) ++n75;
    }
    rep.ao = s / rep.iou_trace.size();
    rep.sr50 = static_cast<double>(n50) / rep.iou_trace.size();
    rep.sr75 = static_cast<double>(n75) / rep.iou_trace.size();
    return rep;
}

double mean_ao(const std::vector<EvalReport>& reports) {
    double s = 0.0;
    for (const auto& r : reports) s += r.ao;
    return reports.empty() ? 0.0 : s / reports.size();
}

void write_report_csv(const std::string& path, const std::vector<EvalReport>& reports) {
    std::ofstream out(path);
    check(out.good(), "report: cannot open " + path);
    out << "sequence,ao,sr50,sr75\n" << std::setprecision(6);
    for (std::size_t i = 0; i < reports.size(); ++i)
        out << i << "," << reports[i].ao << "," << reports[i].sr50 << "," << reports[i].sr75
            << "\n";
    double ao = 0, s50 = 0, s75 = 0;
    for (const auto& r : reports) {
        ao += r.ao;
        s50 += r.sr50;
        s75 += r.sr75;
    }
    int n = std::max<std::size_t>(reports.size(), 1);
    out << "mean," << ao / n << "," << s50 / n << "," << s75 / n << "\n";
}

void write_report_text(const std::string& path, const std::vector<EvalReport>& reports) {
    std::ofstream out(path);
    check(out.good(), "report: cannot open " + path);
    out << std::setprecision(4);
    for (std::size_t i = 0; i < reports.size(); ++i) {
        out << "sequence " << i << ": AO=" << reports[i].ao << " SR0.5=" << reports[i].sr50
            << " SR0.75=" << reports[i].sr75 << "\n";
    }
    out << "sequences: " << reports.size() << "\n";
    out << "mean AO: " << mean_ao(reports) << "\n";
}

}  // namespace contrack
