#include <benchmark/benchmark.h>

#include <random>

#include "contrack/model.hpp"
#include "contrack/objectives.hpp"
#include "contrack/tracker.hpp"

using namespace contrack;

namespace {

Image noise_image(int size, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(size, size);
    for (double& v : img.pix) v = u(rng);
    return img;
}

struct Fixture {
    EncoderConfig cfg;
    std::vector<Image> statics, dynamics;
    Image search;

    Fixture() : search(64, 64) {
        std::mt19937_64 rng(1);
        for (int i = 0; i < cfg.num_scales; ++i) {
            statics.push_back(noise_image(32, rng));
            dynamics.push_back(noise_image(32, rng));
        }
        search = noise_image(64, rng);
    }
};

void bm_model_forward(benchmark::State& state) {
    Fixture fx;
    double rho = state.range(0) / 100.0;
    PruneConfig prune = state.range(0) == 100 ? PruneConfig{1.0, {}} : PruneConfig{rho, {2, 4}};
    Model model(fx.cfg, prune, 7);
    for (auto _ : state) {
        ModelForward f = model.forward(fx.statics, fx.dynamics, fx.search);
        benchmark::DoNotOptimize(f.out.confidence);
    }
}
BENCHMARK(bm_model_forward)->Arg(100)->Arg(90)->Arg(70)->Arg(50)->Unit(benchmark::kMillisecond);

void bm_forward_backward(benchmark::State& state) {
    Fixture fx;
    Model model(fx.cfg, PruneConfig{0.7, {2, 4}}, 7);
    TrainTarget target = gaussian_target(Box{20, 24, 18, 14}, 4, 4, 16);
    Box gt{20.0 / 64, 24.0 / 64, 18.0 / 64, 14.0 / 64};
    for (auto _ : state) {
        GradTape tape;
        ModelForward f = model.forward(fx.statics, fx.dynamics, fx.search);
        Tensor score = reshape(f.out.score_map, {f.out.grid_h, f.out.grid_w});
        Tensor loss = total_loss(score, target.gauss, f.out.box_norm, gt);
        tape.backward(loss);
        benchmark::DoNotOptimize(loss.value());
    }
}
BENCHMARK(bm_forward_backward)->Unit(benchmark::kMillisecond);

void bm_track_frame(benchmark::State& state) {
    EncoderConfig cfg;
    Model model(cfg, PruneConfig{0.7, {2, 4}}, 7);
    TrackerConfig tc;
    std::mt19937_64 rng(2);
    Image frame = noise_image(256, rng);
    for (auto _ : state) {
        Tracker tracker(model, tc);
        tracker.init(frame, Box{96, 96, 64, 64});
        benchmark::DoNotOptimize(tracker.track_frame(frame).score);
    }
}
BENCHMARK(bm_track_frame)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
