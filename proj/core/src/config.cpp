#include "contrack/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace contrack {

void RunConfig::validate() const {
    encoder.validate();
    prune.validate(encoder.num_blocks);
    tracker.validate();
    check(static_cast<int>(tracker.scales.size()) == encoder.num_scales,
          "config: scales list length must equal num_scales");
    check(optim.lr > 0.0 && optim.batch_size > 0 && optim.epochs >= 0,
          "config: bad optimizer settings");
    check(sampler.max_gap >= 1, "config: max_gap must be >= 1");
    check(sampler.flip_prob >= 0.0 && sampler.flip_prob <= 1.0, "config: bad flip_prob");
    bench.validate();
}

namespace {

std::vector<double> parse_list(const std::string& v) {
    std::vector<double> out;
    std::string item;
    std::istringstream is(v);
    while (std::getline(is, item, ',')) out.push_back(std::stod(item));
    return out;
}

std::vector<int> parse_int_list(const std::string& v) {
    std::vector<int> out;
    for (double d : parse_list(v)) out.push_back(static_cast<int>(d));
    return out;
}

std::string join(const std::vector<double>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

std::string join(const std::vector<int>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::map<std::string, std::function<void(const std::string&)>> setters;
    auto set_int = [](int& target) {
        return [&target](const std::string& v) { target = std::stoi(v); };
    };
    auto set_double = [](double& target) {
        return [&target](const std::string& v) { target = std::stod(v); };
    };
    auto set_bool = [](bool& target) {
        return [&target](const std::string& v) {
            check(v == "on" || v == "off" || v == "0" || v == "1",
                  "config: boolean value must be on/off/0/1, got " + v);
            target = (v == "on" || v == "1");
        };
    };

    setters["patch_size"] = set_int(cfg.encoder.patch_size);
    setters["embed_dim"] = set_int(cfg.encoder.embed_dim);
    setters["num_heads"] = set_int(cfg.encoder.num_heads);
    setters["num_blocks"] = set_int(cfg.encoder.num_blocks);
    setters["mlp_ratio"] = set_double(cfg.encoder.mlp_ratio);
    setters["template_resolution"] = set_int(cfg.encoder.template_resolution);
    setters["search_resolution"] = set_int(cfg.encoder.search_resolution);
    setters["num_scales"] = set_int(cfg.encoder.num_scales);
    setters["use_dynamic"] = set_bool(cfg.encoder.use_dynamic);
    setters["keep_ratio"] = set_double(cfg.prune.keep_ratio);
    setters["prune_stages"] = [&cfg](const std::string& v) {
        cfg.prune.stage_indices = v == "none" ? std::vector<int>{} : parse_int_list(v);
    };
    setters["scales"] = [&cfg](const std::string& v) { cfg.tracker.scales = parse_list(v); };
    setters["search_scale"] = set_double(cfg.tracker.search_scale);
    setters["tau"] = set_double(cfg.tracker.tau);
    setters["lr"] = set_double(cfg.optim.lr);
    setters["weight_decay"] = set_double(cfg.optim.weight_decay);
    setters["batch_size"] = set_int(cfg.optim.batch_size);
    setters["epochs"] = set_int(cfg.optim.epochs);
    setters["samples_per_epoch"] = set_int(cfg.optim.samples_per_epoch);
    setters["max_gap"] = set_int(cfg.sampler.max_gap);
    setters["flip_prob"] = set_double(cfg.sampler.flip_prob);
    setters["scale_jitter"] = set_double(cfg.sampler.scale_jitter);
    setters["center_jitter"] = set_double(cfg.sampler.center_jitter);
    setters["bench_frame_size"] = set_int(cfg.bench.frame_size);
    setters["bench_num_frames"] = set_int(cfg.bench.num_frames);
    setters["bench_target_size"] = set_double(cfg.bench.target_size);
    setters["bench_distractors"] = set_int(cfg.bench.num_distractors);
    setters["bench_hue_drift"] = set_double(cfg.bench.hue_drift);
    setters["bench_scale_drift"] = set_double(cfg.bench.scale_drift);
    setters["bench_max_step"] = set_double(cfg.bench.max_step);
    setters["bench_shape_sides"] = set_int(cfg.bench.shape_sides);
    setters["bench_train_sequences"] = set_int(cfg.bench_train_sequences);
    setters["bench_eval_sequences"] = set_int(cfg.bench_eval_sequences);

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string key, eq, value;
        if (!(ls >> key)) continue;  // blank line
        check(static_cast<bool>(ls >> eq >> value) && eq == "=",
              "config line " + std::to_string(lineno) + ": expected 'key = value'");
        auto it = setters.find(key);
        check(it != setters.end(),
              "config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        it->second(value);
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), "config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string config_to_text(const RunConfig& cfg) {
    std::ostringstream os;
    os << "patch_size = " << cfg.encoder.patch_size << "\n"
       << "embed_dim = " << cfg.encoder.embed_dim << "\n"
       << "num_heads = " << cfg.encoder.num_heads << "\n"
       << "num_blocks = " << cfg.encoder.num_blocks << "\n"
       << "mlp_ratio = " << cfg.encoder.mlp_ratio << "\n"
       << "template_resolution = " << cfg.encoder.template_resolution << "\n"
       << "search_resolution = " << cfg.encoder.search_resolution << "\n"
       << "num_scales = " << cfg.encoder.num_scales << "\n"
       << "use_dynamic = " << (cfg.encoder.use_dynamic ? "on" : "off") << "\n"
       << "keep_ratio = " << cfg.prune.keep_ratio << "\n"
       << "prune_stages = "
       << (cfg.prune.stage_indices.empty() ? "none" : join(cfg.prune.stage_indices)) << "\n"
       << "scales = " << join(cfg.tracker.scales) << "\n"
       << "search_scale = " << cfg.tracker.search_scale << "\n"
       << "tau = " << cfg.tracker.tau << "\n"
       << "lr = " << cfg.optim.lr << "\n"
       << "weight_decay = " << cfg.optim.weight_decay << "\n"
       << "batch_size = " << cfg.optim.batch_size << "\n"
       << "epochs = " << cfg.optim.epochs << "\n"
       << "samples_per_epoch = " << cfg.optim.samples_per_epoch << "\n"
       << "max_gap = " << cfg.sampler.max_gap << "\n"
       << "flip_prob = " << cfg.sampler.flip_prob << "\n"
       << "scale_jitter = " << cfg.sampler.scale_jitter << "\n"
       << "center_jitter = " << cfg.sampler.center_jitter << "\n"
       << "bench_frame_size = " << cfg.bench.frame_size << "\n"
       << "bench_num_frames = " << cfg.bench.num_frames << "\n"
       << "bench_target_size = " << cfg.bench.target_size << "\n"
       << "bench_distractors = " << cfg.bench.num_distractors << "\n"
       << "bench_hue_drift = " << cfg.bench.hue_drift << "\n"
       << "bench_scale_drift = " << cfg.bench.scale_drift << "\n"
       << "bench_max_step = " << cfg.bench.max_step << "\n"
       << "bench_shape_sides = " << cfg.bench.shape_sides << "\n"
       << "bench_train_sequences = " << cfg.bench_train_sequences << "\n"
       << "bench_eval_sequences = " << cfg.bench_eval_sequences << "\n";
    return os.str();
}

}  // namespace contrack
