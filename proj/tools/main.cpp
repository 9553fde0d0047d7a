#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "contrack/config.hpp"
#include "contrack/gradcheck.hpp"
#include "contrack/model.hpp"
#include "contrack/tracker.hpp"
#include "contrack/trainkit.hpp"

namespace fs = std::filesystem;
using namespace contrack;

namespace {

struct Overrides {
    std::string rho, scales, dynamic, tau;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--rho", ov.rho, "override pruning keep ratio");
    cmd->add_option("--scales", ov.scales, "override template scale list, e.g. 2.0,4.0");
    cmd->add_option("--dynamic", ov.dynamic, "dynamic templates on/off")
        ->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--tau", ov.tau, "override template-update threshold");
}

RunConfig load_with_overrides(const std::string& config_path, const Overrides& ov) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    std::ostringstream patch;
    if (!ov.rho.empty()) patch << "keep_ratio = " << ov.rho << "\n";
    if (!ov.scales.empty()) {
        patch << "scales = " << ov.scales << "\n";
        patch << "num_scales = " << 1 + std::count(ov.scales.begin(), ov.scales.end(), ',')
              << "\n";
    }
    if (!ov.dynamic.empty()) patch << "use_dynamic = " << ov.dynamic << "\n";
    if (!ov.tau.empty()) patch << "tau = " << ov.tau << "\n";
    if (!patch.str().empty()) {
        std::string text = config_to_text(cfg) + patch.str();
        cfg = parse_config_text(text);
    }
    cfg.validate();
    return cfg;
}

std::vector<Box> read_boxes_csv(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), "cannot open " + path);
    std::string line;
    check(static_cast<bool>(std::getline(in, line)), path + ": empty file");
    std::vector<Box> boxes;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        for (char& c : line)
            if (c == ',') c = ' ';
        std::istringstream ls(line);
        int frame;
        Box b;
        double score;
        check(static_cast<bool>(ls >> frame >> b.x >> b.y >> b.w >> b.h >> score),
              path + ": bad row: " + line);
        boxes.push_back(b);
    }
    return boxes;
}

std::vector<Box> read_gt(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), "cannot open " + path);
    std::vector<Box> boxes;
    Box b;
    while (in >> b.x >> b.y >> b.w >> b.h) boxes.push_back(b);
    check(!boxes.empty(), path + ": no boxes");
    return boxes;
}

int cmd_train(const std::string& config_path, const Overrides& ov, std::uint64_t seed,
              std::string out_dir, int workers) {
    RunConfig cfg = load_with_overrides(config_path, ov);
    if (out_dir.empty()) out_dir = ".";
    fs::create_directories(out_dir);
    std::cout << "generating " << cfg.bench_train_sequences << " training sequences\n";
    auto dataset = generate_benchmark(cfg.bench, cfg.bench_train_sequences, seed);
    Model model(cfg.encoder, cfg.prune, seed);
    TrainResult result = train(model, dataset, cfg, seed + 1, workers, /*verbose=*/true);
    model.save(out_dir + "/checkpoint.bin");
    write_loss_csv(out_dir + "/loss.csv", result);
    std::ofstream(out_dir + "/run.cfg") << config_to_text(cfg);
    std::cout << "wrote " << out_dir << "/checkpoint.bin and loss.csv\n";
    return 0;
}

int cmd_track(const std::string& config_path, const Overrides& ov, std::uint64_t seed,
              const std::string& seq_dir, const std::string& checkpoint, std::string out,
              const std::string& overlays) {
    RunConfig cfg = load_with_overrides(config_path, ov);
    Model model(cfg.encoder, cfg.prune, seed);
    if (!checkpoint.empty()) model.load(checkpoint);
    SequenceDir seq = scan_sequence_dir(seq_dir);
    std::vector<Image> frames;
    for (const auto& p : seq.frame_paths) frames.push_back(load_ppm(p));
    SequenceResult result = track_sequence(model, cfg.tracker, frames, seq.init_box);
    if (out.empty()) out = "boxes.csv";
    write_boxes_csv(out, result);
    if (!overlays.empty()) {
        fs::create_directories(overlays);
        for (std::size_t i = 0; i < frames.size(); ++i) {
            draw_box(frames[i], result.boxes[i], 1.0, 1.0, 0.0);
            std::ostringstream name;
            name << overlays << "/overlay_" << std::setw(4) << std::setfill('0') << i << ".ppm";
            save_ppm(frames[i], name.str());
        }
    }
    std::cout << "wrote " << out << " (" << result.boxes.size() << " frames)\n";
    return 0;
}

int cmd_eval(const std::string& boxes_path, const std::string& gt_path, std::string out) {
    std::vector<Box> pred = read_boxes_csv(boxes_path);
    std::string gt_file = fs::is_directory(gt_path) ? gt_path + "/gt.txt" : gt_path;
    std::vector<Box> gt = read_gt(gt_file);
    check(pred.size() == gt.size(), "prediction/ground-truth length mismatch");
    std::vector<EvalReport> reports = {evaluate(pred, gt)};
    if (out.empty()) out = "report";
    write_report_csv(out + ".csv", reports);
    write_report_text(out + ".txt", reports);
    std::cout << "AO " << std::fixed << std::setprecision(4) << reports[0].ao << "  SR0.5 "
              << reports[0].sr50 << "  SR0.75 " << reports[0].sr75 << "\n";
    std::cout << "wrote " << out << ".csv and " << out << ".txt\n";
    return 0;
}

int cmd_ablate(const std::string& config_path, const Overrides& ov, const std::string& which,
               std::uint64_t seed, const std::string& out, int workers) {
    RunConfig cfg = load_with_overrides(config_path, ov);
    std::vector<AblationRow> rows;
    if (which == "scales")
        rows = ablate_scales(cfg, seed, workers, true);
    else if (which == "dynamic")
        rows = ablate_dynamic(cfg, seed, workers, true);
    else
        rows = ablate_pruning(cfg, seed, workers, true);
    std::string table = ablation_table(rows);
    std::cout << table;
    if (!out.empty()) {
        std::ofstream f(out);
        check(f.good(), "cannot open " + out);
        f << table;
        std::cout << "wrote " << out << "\n";
    }
    return 0;
}

int cmd_flops(const std::string& config_path, const Overrides& ov, const std::string& out) {
    RunConfig cfg = load_with_overrides(config_path, ov);
    FlopsReport report = flops(cfg.encoder, cfg.prune);
    std::ostringstream csv;
    csv << flops_csv_header() << "\n" << flops_csv_row(cfg.encoder, cfg.prune, report) << "\n";
    if (out.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream f(out);
        check(f.good(), "cannot open " + out);
        f << csv.str();
        std::cout << "total MACs " << report.total_macs << ", wrote " << out << "\n";
    }
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    auto checks = run_gradchecks(seed);
    bool ok = true;
    for (const auto& c : checks) {
        bool pass = c.max_err <= 1e-4;
        ok = ok && pass;
        std::cout << std::left << std::setw(18) << c.name << " max rel err " << std::scientific
                  << std::setprecision(3) << c.max_err << (pass ? "  pass" : "  FAIL") << "\n";
    }
    std::cout << (ok ? "gradcheck: all passed" : "gradcheck: FAILURES") << "\n";
    return ok ? 0 : 1;
}

int cmd_genbench(const std::string& config_path, const Overrides& ov, std::uint64_t seed,
                 std::string out_dir, int count) {
    RunConfig cfg = load_with_overrides(config_path, ov);
    if (out_dir.empty()) out_dir = "bench";
    if (count <= 0) count = cfg.bench_eval_sequences;
    for (int i = 0; i < count; ++i) {
        SequenceRecord rec = generate(cfg.bench, seed + 1000003ull * i);
        std::ostringstream dir;
        dir << out_dir << "/seq_" << std::setw(4) << std::setfill('0') << i;
        fs::create_directories(dir.str());
        write_sequence_dir(rec, dir.str());
    }
    std::cout << "wrote " << count << " sequences under " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-template transformer tracker with token pruning"};
    app.require_subcommand(1);

    std::string config_path, out, seq_dir, checkpoint, overlays, boxes_path, gt_path, which;
    std::uint64_t seed = 0;
    int workers = 1, count = 0;
    Overrides ov;

    auto* tr = app.add_subcommand("train", "train on a generated benchmark");
    tr->add_option("--config", config_path);
    tr->add_option("--seed", seed);
    tr->add_option("--out", out, "output directory");
    tr->add_option("--workers", workers);
    add_override_flags(tr, ov);

    auto* tk = app.add_subcommand("track", "track a sequence directory");
    tk->add_option("sequence", seq_dir, "directory with frames + init.txt")->required();
    tk->add_option("--config", config_path);
    tk->add_option("--checkpoint", checkpoint);
    tk->add_option("--seed", seed);
    tk->add_option("--out", out, "boxes csv path");
    tk->add_option("--overlays", overlays, "directory for overlay frames");
    add_override_flags(tk, ov);

    auto* ev = app.add_subcommand("eval", "score a boxes csv against ground truth");
    ev->add_option("boxes", boxes_path, "boxes csv from track")->required();
    ev->add_option("truth", gt_path, "gt.txt or a sequence directory")->required();
    ev->add_option("--out", out, "report path stem");

    auto* ab = app.add_subcommand("ablate", "train/evaluate a config grid");
    ab->add_option("which", which)->check(CLI::IsMember({"scales", "dynamic", "pruning"}))
        ->required();
    ab->add_option("--config", config_path);
    ab->add_option("--seed", seed);
    ab->add_option("--out", out);
    ab->add_option("--workers", workers);
    add_override_flags(ab, ov);

    auto* fl = app.add_subcommand("flops", "analytic compute model");
    fl->add_option("--config", config_path);
    fl->add_option("--out", out);
    add_override_flags(fl, ov);

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    gc->add_option("--seed", seed);

    auto* gb = app.add_subcommand("genbench", "write synthetic benchmark sequences");
    gb->add_option("--config", config_path);
    gb->add_option("--seed", seed);
    gb->add_option("--out", out, "output directory");
    gb->add_option("--count", count, "number of sequences");
    add_override_flags(gb, ov);

    CLI11_PARSE(app, argc, argv);

    try {
        if (tr->parsed()) return cmd_train(config_path, ov, seed, out, workers);
        if (tk->parsed()) return cmd_track(config_path, ov, seed, seq_dir, checkpoint, out,
                                           overlays);
        if (ev->parsed()) return cmd_eval(boxes_path, gt_path, out);
        if (ab->parsed()) return cmd_ablate(config_path, ov, which, seed, out, workers);
        if (fl->parsed()) return cmd_flops(config_path, ov, out);
        if (gc->parsed()) return cmd_gradcheck(seed);
        if (gb->parsed()) return cmd_genbench(config_path, ov, seed, out, count);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
