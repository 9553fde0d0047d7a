#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "contrack/head.hpp"

using namespace contrack;

namespace {

// hand-built maps: score peaked at (px, py) on a w x h grid
TrackOutput hand_output(int grid, int stride, int px, int py, double dx, double dy, double sw,
                        double sh) {
    TrackOutput out;
    out.grid_w = out.grid_h = grid;
    out.stride = stride;
    std::vector<double> score(grid * grid, 0.1);
    score[py * grid + px] = 0.9;
    out.score_map = Tensor({1, grid, grid}, score);
    std::vector<double> offs(2 * grid * grid, 0.0);
    offs[py * grid + px] = dx;
    offs[grid * grid + py * grid + px] = dy;
    out.offsets = Tensor({2, grid, grid}, offs);
    std::vector<double> sizes(2 * grid * grid, 0.25);
    sizes[py * grid + px] = sw;
    sizes[grid * grid + py * grid + px] = sh;
    out.sizes = Tensor({2, grid, grid}, sizes);
    return out;
}

}  // namespace

TEST_CASE("decode evaluates the center-plus-offset box formula") {
    TrackOutput out = hand_output(4, 16, 2, 1, 0.0, 0.0, 0.5, 0.5);
    decode(out, 64);
    CHECK(out.peak_x == 2);
    CHECK(out.peak_y == 1);
    CHECK(out.confidence == doctest::Approx(0.9));
    CHECK(out.box.cx() == doctest::Approx(32.0).epsilon(1e-12));
    CHECK(out.box.cy() == doctest::Approx(16.0).epsilon(1e-12));
    CHECK(out.box.w == doctest::Approx(32.0).epsilon(1e-12));
    CHECK(out.box.h == doctest::Approx(32.0).epsilon(1e-12));
    // box_norm mirrors the decoded box in extent units
    CHECK(out.box_norm.at(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out.box_norm.at(1) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(out.box_norm.at(2) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out.box_norm.at(3) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("offsets shift the center inside the cell") {
    TrackOutput out = hand_output(4, 16, 2, 1, 0.5, 0.25, 0.5, 0.5);
    decode(out, 64);
    CHECK(out.box.cx() == doctest::Approx(40.0).epsilon(1e-12));  // (2 + 0.5) * 16
    CHECK(out.box.cy() == doctest::Approx(20.0).epsilon(1e-12));  // (1 + 0.25) * 16
}

TEST_CASE("uniform score map ties to cell (0,0)") {
    TrackOutput out = hand_output(4, 16, 0, 0, 0.0, 0.0, 0.25, 0.25);
    out.score_map = Tensor::full({1, 4, 4}, 0.5);
    decode(out, 64);
    CHECK(out.peak_x == 0);
    CHECK(out.peak_y == 0);
}

TEST_CASE("one-hot score map has confidence 1") {
    TrackOutput out = hand_output(4, 16, 3, 2, 0.0, 0.0, 0.25, 0.25);
    std::vector<double> score(16, 0.0);
    score[2 * 4 + 3] = 1.0;
    out.score_map = Tensor({1, 4, 4}, score);
    decode(out, 64);
    CHECK(out.confidence == 1.0);
    CHECK(out.peak_x == 3);
    CHECK(out.peak_y == 2);
}

TEST_CASE("decoded boxes stay inside the search crop") {
    TrackOutput out = hand_output(4, 16, 3, 3, 0.99, 0.99, 1.0, 1.0);
    decode(out, 64);
    CHECK(out.box.x >= 0.0);
    CHECK(out.box.y >= 0.0);
    CHECK(out.box.x + out.box.w <= 64.0 + 1e-9);
    CHECK(out.box.y + out.box.h <= 64.0 + 1e-9);
    CHECK(out.box.w > 0.0);
    CHECK(out.box.h > 0.0);
}

TEST_CASE("head forward produces the contract shapes and ranges") {
    TrackHead head(64, 16, 12345);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> grid(64 * 4 * 4);
    for (double& v : grid) v = nd(rng);
    TrackOutput out = head.forward(Tensor({64, 4, 4}, grid));
    CHECK(out.score_map.shape() == Shape{1, 4, 4});
    CHECK(out.offsets.shape() == Shape{2, 4, 4});
    CHECK(out.sizes.shape() == Shape{2, 4, 4});
    double mx = 0.0;
    for (int i = 0; i < 16; ++i) {
        CHECK(out.score_map.at(i) >= 0.0);
        CHECK(out.score_map.at(i) <= 1.0);
        mx = std::max(mx, out.score_map.at(i));
    }
    decode(out, 64);
    CHECK(out.confidence == mx);
    CHECK(out.box.w > 0.0);
    CHECK(out.box.h > 0.0);
}

TEST_CASE("scaling logits by a positive constant keeps the argmax") {
    TrackHead head(32, 16, 99);
    std::mt19937_64 rng(6);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> grid(32 * 4 * 4);
    for (double& v : grid) v = nd(rng);
    TrackOutput out = head.forward(Tensor({32, 4, 4}, grid));
    decode(out, 64);
    TrackOutput scaled = out;
    scaled.score_map = sigmoid(mul_scalar(out.score_logits, 3.0));
    decode(scaled, 64);
    CHECK(scaled.peak_x == out.peak_x);
    CHECK(scaled.peak_y == out.peak_y);
}

TEST_CASE("decode is deterministic for a fixed head seed") {
    TrackHead a(32, 16, 7), b(32, 16, 7);
    std::vector<double> grid(32 * 16, 0.3);
    TrackOutput oa = a.forward(Tensor({32, 4, 4}, grid));
    TrackOutput ob = b.forward(Tensor({32, 4, 4}, grid));
    CHECK(oa.score_map.data() == ob.score_map.data());
    CHECK(oa.offsets.data() == ob.offsets.data());
    CHECK(oa.sizes.data() == ob.sizes.data());
}
