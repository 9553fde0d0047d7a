#include "contrack/trainkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "contrack/evalkit.hpp"
#include "contrack/optim.hpp"
#include "contrack/pruning.hpp"
#include "contrack/tracker.hpp"

namespace contrack {

namespace {

struct AugmentParams {
    bool flip = false;
    std::vector<double> template_scale;    // multiplicative, one per scale slot
    std::vector<double> template_shift_x;  // fraction of the crop side
    std::vector<double> template_shift_y;
};

Box shifted(const Box& b, double frac_x, double frac_y, double k) {
    double side = k * std::sqrt(b.w * b.h);
    return Box::from_center(b.cx() + frac_x * side, b.cy() + frac_y * side, b.w, b.h);
}

TrainSample materialize(const SequenceRecord& seq, int t_d, int t_s, const AugmentParams& aug,
                        const RunConfig& cfg) {
    TrainSample s;
    s.seq = &seq;
    s.t_dynamic = t_d;
    s.t_search = t_s;
    int tres = cfg.encoder.template_resolution;
    int sres = cfg.encoder.search_resolution;

    auto template_crops = [&](const Image& frame, const Box& box) {
        std::vector<Image> out;
        for (std::size_t i = 0; i < cfg.tracker.scales.size(); ++i) {
            double k = cfg.tracker.scales[i] * (aug.template_scale.empty() ? 1.0
                                                                           : aug.template_scale[i]);
            Box b = aug.template_shift_x.empty()
                        ? box
                        : shifted(box, aug.template_shift_x[i], aug.template_shift_y[i],
                                  cfg.tracker.scales[i]);
            Image crop = crop_region(frame, b, std::max(k, 1.0), tres).crop;
            out.push_back(aug.flip ? hflip(crop) : std::move(crop));
        }
        return out;
    };

    s.static_crops = template_crops(seq.frames[0], seq.gt[0]);
    if (cfg.encoder.use_dynamic)
        s.dynamic_crops = template_crops(seq.frames[t_d], seq.gt[t_d]);

    // search area centered on the previous frame's box, as at inference time
    const Box& center_box = seq.gt[t_s - 1];
    CropResult search = crop_region(seq.frames[t_s], center_box, cfg.tracker.search_scale, sres);
    s.gt_in_crop = search.map.box_to_crop(seq.gt[t_s]);
    s.search_crop = std::move(search.crop);
    if (aug.flip) {
        s.search_crop = hflip(s.search_crop);
        s.gt_in_crop.x = sres - s.gt_in_crop.x - s.gt_in_crop.w;
    }
    s.target = gaussian_target(s.gt_in_crop, cfg.encoder.search_grid(), cfg.encoder.search_grid(),
                               cfg.encoder.patch_size);
    return s;
}

bool target_inside(const TrainSample& s, int sres) {
    const Box& b = s.gt_in_crop;
    return b.cx() >= 0.0 && b.cy() >= 0.0 && b.cx() < sres && b.cy() < sres;
}

}  // namespace

TrainSample sample(const SequenceRecord& seq, std::mt19937_64& rng, const RunConfig& cfg) {
    int n = static_cast<int>(seq.frames.size());
    check(n >= 3, "sample: sequence must have at least 3 frames");
    int sres = cfg.encoder.search_resolution;
    for (int attempt = 0; attempt < 32; ++attempt) {
        std::uniform_int_distribution<int> d_dist(0, n - 2);
        int t_d = d_dist(rng);
        int hi = std::min(t_d + cfg.sampler.max_gap, n - 1);
        std::uniform_int_distribution<int> s_dist(t_d + 1, hi);
        int t_s = s_dist(rng);
        TrainSample s = materialize(seq, t_d, t_s, AugmentParams{}, cfg);
        if (target_inside(s, sres)) return s;
    }
    fail("sample: target repeatedly fell outside the search crop");
}

TrainSample augment(const TrainSample& s, std::mt19937_64& rng, const RunConfig& cfg) {
    check(s.seq != nullptr, "augment: sample has no source sequence");
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    AugmentParams aug;
    aug.flip = u01(rng) < cfg.sampler.flip_prob;
    double sj = cfg.sampler.scale_jitter, cj = cfg.sampler.center_jitter;
    for (std::size_t i = 0; i < cfg.tracker.scales.size(); ++i) {
        aug.template_scale.push_back(1.0 + (u01(rng) * 2.0 - 1.0) * sj);
        aug.template_shift_x.push_back((u01(rng) * 2.0 - 1.0) * cj);
        aug.template_shift_y.push_back((u01(rng) * 2.0 - 1.0) * cj);
    }
    TrainSample out = materialize(*s.seq, s.t_dynamic, s.t_search, aug, cfg);
    if (!target_inside(out, cfg.encoder.search_resolution)) return s;  // keep the unaugmented one
    return out;
}

Tensor sample_loss(const Model& model, const TrainSample& s) {
    ModelForward f = model.forward(s.static_crops, s.dynamic_crops, s.search_crop);
    double ext = model.encoder_config().search_resolution;
    Box gt_norm{s.gt_in_crop.x / ext, s.gt_in_crop.y / ext, s.gt_in_crop.w / ext,
                s.gt_in_crop.h / ext};
    Tensor score = reshape(f.out.score_map, {f.out.grid_h, f.out.grid_w});
    return total_loss(score, s.target.gauss, f.out.box_norm, gt_norm);
}

namespace {

void scale_grads(std::vector<NamedParam>& params, double factor) {
    for (auto& p : params) {
        p.tensor.grad();  // ensure sized
        for (double& g : p.tensor.node()->grad) g *= factor;
    }
}

double run_batch_worker(Model& model, const std::vector<TrainSample>& items, std::size_t begin,
                        std::size_t stride) {
    double loss_sum = 0.0;
    for (std::size_t i = begin; i < items.size(); i += stride) {
        GradTape tape;
        Tensor loss = sample_loss(model, items[i]);
        tape.backward(loss);
        loss_sum += loss.value();
    }
    return loss_sum;
}

}  // namespace

TrainResult train(Model& model, const std::vector<SequenceRecord>& dataset, const RunConfig& cfg,
                  std::uint64_t seed, int workers, bool verbose) {
    check(!dataset.empty(), "train: empty dataset");
    workers = std::max(workers, 1);
    std::mt19937_64 rng(seed);
    AdamW optimizer({cfg.optim.lr, 0.9, 0.999, 1e-8, cfg.optim.weight_decay});
    auto params = model.parameters();

    // worker clones share nothing with the main model; parameters are copied
    // in before each batch and gradients merged back in worker order
    std::vector<std::unique_ptr<Model>> clones;
    std::vector<std::vector<NamedParam>> clone_params;
    for (int w = 1; w < workers; ++w) {
        clones.push_back(std::make_unique<Model>(model.encoder_config(), model.prune_config(), 0));
        clone_params.push_back(clones.back()->parameters());
    }

    TrainResult result;
    int batches = std::max(cfg.optim.samples_per_epoch / cfg.optim.batch_size, 1);
    for (int epoch = 0; epoch < cfg.optim.epochs; ++epoch) {
        double epoch_loss = 0.0;
        int epoch_items = 0;
        for (int b = 0; b < batches; ++b) {
            // all randomness is drawn here so worker count cannot change it
            std::vector<TrainSample> items;
            std::uniform_int_distribution<std::size_t> pick_seq(0, dataset.size() - 1);
            for (int i = 0; i < cfg.optim.batch_size; ++i) {
                TrainSample s = sample(dataset[pick_seq(rng)], rng, cfg);
                items.push_back(augment(s, rng, cfg));
            }

            zero_grads(params);
            double batch_loss = 0.0;
            if (workers == 1) {
                batch_loss = run_batch_worker(model, items, 0, 1);
            } else {
                for (auto& cp : clone_params)
                    for (std::size_t i = 0; i < params.size(); ++i) {
                        cp[i].tensor.data() = params[i].tensor.data();
                        cp[i].tensor.zero_grad();
                    }
                std::vector<double> losses(workers, 0.0);
                std::vector<std::thread> threads;
                for (int w = 1; w < workers; ++w)
                    threads.emplace_back([&, w]() {
                        losses[w] = run_batch_worker(*clones[w - 1], items, w, workers);
                    });
                losses[0] = run_batch_worker(model, items, 0, workers);
                for (auto& t : threads) t.join();
                for (double l : losses) batch_loss += l;
                for (auto& cp : clone_params)  // fixed order keeps sums bitwise stable
                    for (std::size_t i = 0; i < params.size(); ++i) {
                        const auto& src = cp[i].tensor.grad();
                        auto& dst = params[i].tensor.node()->grad;
                        for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
                    }
            }
            check(std::isfinite(batch_loss), "train: loss diverged to non-finite values");
            scale_grads(params, 1.0 / cfg.optim.batch_size);
            optimizer.step(params);
            epoch_loss += batch_loss;
            epoch_items += cfg.optim.batch_size;
        }
        result.epoch_loss.push_back(epoch_loss / epoch_items);
        if (verbose)
            std::cout << "epoch " << epoch + 1 << "/" << cfg.optim.epochs
                      << " mean loss " << std::setprecision(6) << result.epoch_loss.back()
                      << std::endl;
    }
    return result;
}

void write_loss_csv(const std::string& path, const TrainResult& result) {
    std::ofstream out(path);
    check(out.good(), "loss csv: cannot open " + path);
    out << "epoch,mean_loss\n" << std::setprecision(6);
    for (std::size_t i = 0; i < result.epoch_loss.size(); ++i)
        out << i + 1 << "," << result.epoch_loss[i] << "\n";
}

std::vector<SequenceRecord> generate_benchmark(const GeneratorParams& params, int count,
                                               std::uint64_t seed) {
    std::vector<SequenceRecord> out;
    for (int i = 0; i < count; ++i) out.push_back(generate(params, seed + 1000003ull * i));
    return out;
}

AblationRow train_and_evaluate(const RunConfig& cfg, std::uint64_t seed,
                               const std::vector<SequenceRecord>& train_seqs,
                               const std::vector<SequenceRecord>& eval_seqs,
                               const std::string& label, int workers, bool verbose) {
    cfg.validate();
    Model model(cfg.encoder, cfg.prune, seed);
    train(model, train_seqs, cfg, seed + 1, workers, verbose);

    std::vector<EvalReport> reports;
    for (const auto& seq : eval_seqs) {
        SequenceResult res = track_sequence(model, cfg.tracker, seq.frames, seq.gt[0]);
        reports.push_back(evaluate(res.boxes, seq.gt));
    }
    AblationRow row;
    row.label = label;
    double s50 = 0, s75 = 0;
    for (const auto& r : reports) {
        s50 += r.sr50;
        s75 += r.sr75;
    }
    row.ao = mean_ao(reports);
    row.sr50 = reports.empty() ? 0.0 : s50 / reports.size();
    row.sr75 = reports.empty() ? 0.0 : s75 / reports.size();
    row.total_macs = flops(cfg.encoder, cfg.prune).total_macs;
    return row;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(28) << "config" << std::right << std::setw(8) << "AO"
       << std::setw(8) << "SR0.5" << std::setw(8) << "SR0.75" << std::setw(14) << "MMACs" << "\n";
    for (const auto& r : rows)
        os << std::left << std::setw(28) << r.label << std::right << std::fixed
           << std::setprecision(3) << std::setw(8) << r.ao << std::setw(8) << r.sr50
           << std::setw(8) << r.sr75 << std::setw(14) << r.total_macs / 1000000 << "\n";
    return os.str();
}

namespace {

struct BenchPair {
    std::vector<SequenceRecord> train, eval;
};

BenchPair shared_benchmark(const RunConfig& cfg, std::uint64_t seed) {
    BenchPair bp;
    bp.train = generate_benchmark(cfg.bench, cfg.bench_train_sequences, seed);
    bp.eval = generate_benchmark(cfg.bench, cfg.bench_eval_sequences, seed + 777777ull);
    return bp;
}

}  // namespace

std::vector<AblationRow> ablate_scales(const RunConfig& base, std::uint64_t seed, int workers,
                                       bool verbose) {
    BenchPair bp = shared_benchmark(base, seed);
    std::vector<std::vector<double>> grids = {
        {2.0}, {2.0, 4.0}, {2.0, 3.0, 4.0}, {2.0, 2.7, 3.3, 4.0}};
    std::vector<AblationRow> rows;
    for (const auto& k : grids) {
        RunConfig cfg = base;
        cfg.tracker.scales = k;
        cfg.encoder.num_scales = static_cast<int>(k.size());
        std::ostringstream label;
        label << "scales=" << k.size();
        rows.push_back(train_and_evaluate(cfg, seed, bp.train, bp.eval, label.str(), workers,
                                          verbose));
    }
    return rows;
}

std::vector<AblationRow> ablate_dynamic(const RunConfig& base, std::uint64_t seed, int workers,
                                        bool verbose) {
    BenchPair bp = shared_benchmark(base, seed);
    struct Variant {
        std::vector<double> scales;
        bool dynamic;
        const char* label;
    };
    std::vector<Variant> variants = {{{2.0}, false, "K=[2.0] static-only"},
                                     {{2.0}, true, "K=[2.0] +dynamic"},
                                     {{2.0, 4.0}, true, "K=[2.0,4.0] +dynamic"}};
    std::vector<AblationRow> rows;
    for (const auto& v : variants) {
        RunConfig cfg = base;
        cfg.tracker.scales = v.scales;
        cfg.encoder.num_scales = static_cast<int>(v.scales.size());
        cfg.encoder.use_dynamic = v.dynamic;
        rows.push_back(train_and_evaluate(cfg, seed, bp.train, bp.eval, v.label, workers, verbose));
    }
    return rows;
}

std::vector<AblationRow> ablate_pruning(const RunConfig& base, std::uint64_t seed, int workers,
                                        bool verbose) {
    BenchPair bp = shared_benchmark(base, seed);
    std::vector<AblationRow> rows;
    for (double rho : {0.6, 0.7, 0.8, 0.9, 1.0}) {
        RunConfig cfg = base;
        cfg.prune.keep_ratio = rho;
        std::ostringstream label;
        label << "rho=" << rho;
        rows.push_back(train_and_evaluate(cfg, seed, bp.train, bp.eval, label.str(), workers,
                                          verbose));
    }
    return rows;
}

}  // namespace contrack
