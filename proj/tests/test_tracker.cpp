#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "contrack/evalkit.hpp"
#include "contrack/tracker.hpp"

using namespace contrack;

namespace {

EncoderConfig tiny_cfg() {
    EncoderConfig cfg;
    cfg.embed_dim = 32;
    cfg.num_heads = 2;
    cfg.num_blocks = 2;
    cfg.num_scales = 1;
    return cfg;
}

Image noise_frame(int size, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(size, size);
    for (double& v : img.pix) v = u(rng);
    return img;
}

}  // namespace

TEST_CASE("crop side is k * sqrt(w * h) and round-trips within 1e-9") {
    std::mt19937_64 rng(3);
    Image frame = noise_frame(128, rng);
    Box box{40.0, 50.0, 10.0, 10.0};
    CropResult res = crop_region(frame, box, 2.0, 32);
    CHECK(res.map.scale == doctest::Approx(20.0 / 32.0).epsilon(1e-12));  // 20x20 source square

    Box probe{3.0, 7.5, 11.0, 4.25};
    Box frame_box = res.map.box_to_frame(probe);
    Box back = res.map.box_to_crop(frame_box);
    CHECK(std::fabs(back.x - probe.x) <= 1e-9);
    CHECK(std::fabs(back.y - probe.y) <= 1e-9);
    CHECK(std::fabs(back.w - probe.w) <= 1e-9);
    CHECK(std::fabs(back.h - probe.h) <= 1e-9);

    CHECK_THROWS(crop_region(frame, Box{10, 10, 0.0, 5.0}, 2.0, 32));
}

TEST_CASE("k=1 crop of an axis-aligned square region resamples the box content") {
    Image frame(64, 64);
    for (int y = 20; y < 40; ++y)
        for (int x = 20; x < 40; ++x) frame.at(0, y, x) = 1.0;
    CropResult res = crop_region(frame, Box{20, 20, 20, 20}, 1.0, 20);
    for (int y = 2; y < 18; ++y)
        for (int x = 2; x < 18; ++x) CHECK(res.crop.at(0, y, x) == doctest::Approx(1.0));
}

TEST_CASE("frame one returns the init box and copies statics to dynamics") {
    Model model(tiny_cfg(), PruneConfig{0.7, {}}, 11);
    TrackerConfig tc;
    tc.scales = {2.0};
    Tracker tracker(model, tc);
    std::mt19937_64 rng(4);
    Image frame = noise_frame(128, rng);
    Box init{30, 40, 20, 24};
    tracker.init(frame, init);
    REQUIRE(tracker.templates().statics.size() == 1);
    REQUIRE(tracker.templates().dynamics.size() == 1);
    CHECK(tracker.templates().dynamics[0].crop.pix == tracker.templates().statics[0].crop.pix);
    CHECK(tracker.last_box().x == init.x);
}

TEST_CASE("dynamic update gate follows score > tau strictly") {
    Model model(tiny_cfg(), PruneConfig{0.7, {}}, 11);
    std::mt19937_64 rng(5);
    std::vector<Image> frames;
    for (int i = 0; i < 4; ++i) frames.push_back(noise_frame(128, rng));
    Box init{40, 40, 24, 24};

    {
        TrackerConfig open;
        open.scales = {2.0};
        open.tau = 1e-9;  // effectively always open
        Tracker tracker(model, open);
        tracker.init(frames[0], init);
        for (int i = 1; i < 4; ++i) {
            FrameResult r = tracker.track_frame(frames[i]);
            CHECK(r.updated_dynamic == (r.score > open.tau));
            CHECK(r.updated_dynamic);
        }
    }
    {
        TrackerConfig closed;
        closed.scales = {2.0};
        closed.tau = 1.0 - 1e-12;  // never open
        Tracker tracker(model, closed);
        tracker.init(frames[0], init);
        std::vector<double> before = tracker.templates().dynamics[0].crop.pix;
        for (int i = 1; i < 4; ++i) {
            FrameResult r = tracker.track_frame(frames[i]);
            CHECK(!r.updated_dynamic);
        }
        CHECK(tracker.templates().dynamics[0].crop.pix == before);  // bitwise unchanged
    }
}

TEST_CASE("tau equal to the score does not update (strict inequality)") {
    Model model(tiny_cfg(), PruneConfig{0.7, {}}, 11);
    std::mt19937_64 rng(6);
    std::vector<Image> frames = {noise_frame(128, rng), noise_frame(128, rng)};
    Box init{40, 40, 24, 24};
    TrackerConfig probe;
    probe.scales = {2.0};
    probe.tau = 0.5;
    Tracker first(model, probe);
    first.init(frames[0], init);
    double score = first.track_frame(frames[1]).score;

    TrackerConfig exact = probe;
    exact.tau = score;  // deterministic rerun hits score == tau
    Tracker second(model, exact);
    second.init(frames[0], init);
    FrameResult r = second.track_frame(frames[1]);
    CHECK(r.score == score);
    CHECK(!r.updated_dynamic);
}

TEST_CASE("statics never change and updates replace every dynamic scale") {
    EncoderConfig cfg = tiny_cfg();
    cfg.num_scales = 2;
    Model model(cfg, PruneConfig{0.7, {}}, 13);
    TrackerConfig tc;  // scales {2,4}, tau 0.7
    tc.tau = 1e-9;
    std::mt19937_64 rng(7);
    std::vector<Image> frames;
    for (int i = 0; i < 3; ++i) frames.push_back(noise_frame(160, rng));
    Tracker tracker(model, tc);
    tracker.init(frames[0], Box{60, 60, 30, 30});
    auto s0 = tracker.templates().statics[0].crop.pix;
    auto s1 = tracker.templates().statics[1].crop.pix;
    auto d0 = tracker.templates().dynamics[0].crop.pix;
    auto d1 = tracker.templates().dynamics[1].crop.pix;
    FrameResult r = tracker.track_frame(frames[1]);
    REQUIRE(r.updated_dynamic);
    CHECK(tracker.templates().statics[0].crop.pix == s0);
    CHECK(tracker.templates().statics[1].crop.pix == s1);
    CHECK(tracker.templates().dynamics[0].crop.pix != d0);
    CHECK(tracker.templates().dynamics[1].crop.pix != d1);
}

TEST_CASE("track_sequence contract: length, first box, determinism") {
    Model model(tiny_cfg(), PruneConfig{0.7, {}}, 17);
    TrackerConfig tc;
    tc.scales = {2.0};
    std::mt19937_64 rng(8);
    std::vector<Image> frames;
    for (int i = 0; i < 5; ++i) frames.push_back(noise_frame(128, rng));
    Box init{30, 36, 28, 22};

    SequenceResult a = track_sequence(model, tc, frames, init);
    SequenceResult b = track_sequence(model, tc, frames, init);
    REQUIRE(a.boxes.size() == 5);
    CHECK(a.boxes[0].x == init.x);
    CHECK(a.boxes[0].w == init.w);
    CHECK(a.scores[0] == 1.0);
    for (int i = 0; i < 5; ++i) {
        CHECK(a.boxes[i].x == b.boxes[i].x);  // bitwise rerun
        CHECK(a.boxes[i].y == b.boxes[i].y);
        CHECK(a.scores[i] == b.scores[i]);
    }

    SequenceResult single = track_sequence(model, tc, {frames[0]}, init);
    CHECK(single.boxes.size() == 1);
    CHECK(single.boxes[0].x == init.x);
}

TEST_CASE("boxes csv and sequence dir round trip") {
    std::mt19937_64 rng(9);
    GeneratorParams params;
    params.num_frames = 3;
    SequenceRecord rec = generate(params, 99);
    std::string dir = "tracker_io_seq";
    write_sequence_dir(rec, dir);
    SequenceDir scanned = scan_sequence_dir(dir);
    CHECK(scanned.frame_paths.size() == 3);
    CHECK(scanned.init_box.w == doctest::Approx(rec.gt[0].w).epsilon(1e-4));

    SequenceResult res;
    res.boxes = {rec.gt[0], rec.gt[1], rec.gt[2]};
    res.scores = {1.0, 0.5, 0.25};
    write_boxes_csv(dir + "/boxes.csv", res);
    std::ifstream in(dir + "/boxes.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "frame_index,x,y,w,h,score");
    int rows = 0;
    for (std::string line; std::getline(in, line);) rows += !line.empty();
    CHECK(rows == 3);
}
