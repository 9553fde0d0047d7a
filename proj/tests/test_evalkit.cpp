#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "contrack/evalkit.hpp"

using namespace contrack;

TEST_CASE("iou hand cases") {
    Box a{0, 0, 2, 2};
    CHECK(iou(a, a) == 1.0);
    CHECK(iou(a, Box{5, 5, 2, 2}) == 0.0);
    CHECK(iou(a, Box{1, 1, 2, 2}) == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("generation is bitwise deterministic in the seed") {
    GeneratorParams params;
    params.num_frames = 6;
    SequenceRecord a = generate(params, 42);
    SequenceRecord b = generate(params, 42);
    REQUIRE(a.frames.size() == 6);
    REQUIRE(a.gt.size() == 6);
    for (int i = 0; i < 6; ++i) {
        CHECK(a.frames[i].pix == b.frames[i].pix);
        CHECK(a.gt[i].x == b.gt[i].x);
        CHECK(a.gt[i].w == b.gt[i].w);
    }
    SequenceRecord c = generate(params, 43);
    CHECK(a.frames[1].pix != c.frames[1].pix);
}

TEST_CASE("boxes stay inside the frame") {
    GeneratorParams params;
    params.num_frames = 60;
    params.max_step = 12.0;
    SequenceRecord rec = generate(params, 7);
    for (const Box& b : rec.gt) {
        CHECK(b.x >= 0.0);
        CHECK(b.y >= 0.0);
        CHECK(b.x + b.w <= params.frame_size);
        CHECK(b.y + b.h <= params.frame_size);
        CHECK(b.w > 0.0);
    }
}

TEST_CASE("zero drift keeps the target appearance constant") {
    GeneratorParams params;
    params.num_frames = 8;
    params.hue_drift = 0.0;
    params.scale_drift = 0.0;
    params.num_distractors = 0;
    SequenceRecord rec = generate(params, 5);
    for (double h : rec.hues) CHECK(h == rec.hues[0]);
    for (const Box& b : rec.gt) {
        CHECK(b.w == doctest::Approx(rec.gt[0].w).epsilon(1e-12));
        CHECK(b.h == doctest::Approx(rec.gt[0].h).epsilon(1e-12));
    }
}

TEST_CASE("hue drift bookkeeping matches rate times frames") {
    GeneratorParams params;
    params.num_frames = 20;
    params.hue_drift = 0.004;
    SequenceRecord rec = generate(params, 5);
    REQUIRE(rec.hues.size() == 20);
    CHECK(rec.hues[19] - rec.hues[0] == doctest::Approx(0.004 * 19).epsilon(1e-9));
}

TEST_CASE("infeasible generator parameters are rejected") {
    GeneratorParams params;
    params.frame_size = 100;
    params.target_size = 64.0;  // frame must be >= 4x target
    CHECK_THROWS(params.validate());
    CHECK_THROWS(generate(params, 1));
}

TEST_CASE("evaluate on the hand trace") {
    // frame 1 is the given init; the remaining IoUs are 1.0, 0.6, 0.4
    std::vector<Box> gt = {{0, 0, 10, 10}, {0, 0, 10, 10}, {0, 0, 10, 10}, {0, 0, 10, 10}};
    std::vector<Box> pred = gt;
    pred[1] = Box{0.0, 0.0, 10, 10};          // IoU 1.0
    pred[2] = Box{2.5, 0.0, 10, 10};          // IoU (10-2.5)/(10+2.5) = 0.6
    pred[3] = Box{30.0 / 7.0, 0.0, 10, 10};   // IoU 0.4
    EvalReport r = evaluate(pred, gt);
    REQUIRE(r.iou_trace.size() == 3);
    CHECK(r.iou_trace[1] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(r.ao == doctest::Approx(2.0 / 3.0).epsilon(1e-4));
    CHECK(r.sr50 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.sr75 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("evaluate edge cases and contract") {
    std::vector<Box> gt = {{0, 0, 4, 4}, {0, 0, 4, 4}};
    EvalReport perfect = evaluate(gt, gt);
    CHECK(perfect.ao == 1.0);
    CHECK(perfect.sr50 == 1.0);
    CHECK(perfect.sr75 == 1.0);

    std::vector<Box> miss = {{0, 0, 4, 4}, {100, 100, 4, 4}};
    EvalReport bad = evaluate(miss, gt);
    CHECK(bad.ao == 0.0);
    CHECK(bad.sr50 == 0.0);

    CHECK_THROWS(evaluate(std::vector<Box>{{0, 0, 1, 1}}, gt));
}

TEST_CASE("success rate is non-increasing in the threshold") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 8.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Box> gt, pred;
        for (int i = 0; i < 10; ++i) {
            gt.push_back(Box{10, 10, 10, 10});
            pred.push_back(Box{10 + u(rng), 10 + u(rng), 10, 10});
        }
        EvalReport r = evaluate(pred, gt);
        CHECK(r.sr75 <= r.sr50);
        CHECK(r.ao >= 0.0);
        CHECK(r.ao <= 1.0);
    }
}

TEST_CASE("AO is invariant under uniform rescaling") {
    std::mt19937_64 rng(78);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    std::vector<Box> gt, pred;
    for (int i = 0; i < 6; ++i) {
        gt.push_back(Box{20 + u(rng), 20 + u(rng), 15, 12});
        pred.push_back(Box{20 + u(rng), 20 + u(rng), 14, 13});
    }
    auto scale_all = [](std::vector<Box> v) {
        for (Box& b : v) b = Box{b.x * 3, b.y * 3, b.w * 3, b.h * 3};
        return v;
    };
    EvalReport a = evaluate(pred, gt);
    EvalReport b = evaluate(scale_all(pred), scale_all(gt));
    CHECK(a.ao == doctest::Approx(b.ao).epsilon(1e-12));
}

TEST_CASE("sequence directory round trip") {
    GeneratorParams params;
    params.num_frames = 4;
    SequenceRecord rec = generate(params, 31);
    write_sequence_dir(rec, "evalkit_io_seq");
    SequenceRecord back = load_sequence_dir("evalkit_io_seq");
    REQUIRE(back.frames.size() == 4);
    REQUIRE(back.gt.size() == 4);
    CHECK(back.frames[0].width == params.frame_size);
    for (int i = 0; i < 4; ++i) {
        CHECK(back.gt[i].x == doctest::Approx(rec.gt[i].x).epsilon(1e-6));
        CHECK(back.gt[i].h == doctest::Approx(rec.gt[i].h).epsilon(1e-6));
    }
    // 8-bit image round trip: equal up to quantization
    for (std::size_t p = 0; p < back.frames[0].pix.size(); p += 999)
        CHECK(std::fabs(back.frames[0].pix[p] - rec.frames[0].pix[p]) <= 1.0 / 255.0);
}
