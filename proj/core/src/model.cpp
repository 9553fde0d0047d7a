#include "contrack/model.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace contrack {

Model::Model(EncoderConfig enc_cfg, PruneConfig prune_cfg, std::uint64_t seed)
    : prune_cfg_(std::move(prune_cfg)),
      encoder_(enc_cfg, seed),
      head_(enc_cfg.embed_dim, enc_cfg.patch_size, seed ^ 0x9e3779b97f4a7c15ull) {
    prune_cfg_.validate(enc_cfg.num_blocks);
}

ModelForward Model::forward(const std::vector<Image>& static_crops,
                            const std::vector<Image>& dynamic_crops,
                            const Image& search_crop) const {
    const EncoderConfig& cfg = encoder_.config();
    ModelForward f;
    TokenSequence seq = encoder_.embed(static_crops, dynamic_crops, search_crop);
    f.trace = encoder_.forward(std::move(seq), prune_cfg_);
    Tensor grid = scatter_to_grid(f.trace.seq, cfg.search_grid(), cfg.search_grid());
    f.out = head_.forward(grid);
    decode(f.out, cfg.search_resolution);
    return f;
}

std::vector<NamedParam> Model::parameters() {
    std::vector<NamedParam> out = encoder_.parameters();
    auto head_params = head_.parameters();
    out.insert(out.end(), head_params.begin(), head_params.end());
    return out;
}

void Model::save(const std::string& path) {
    save_checkpoint(path, encoder_.config(), parameters());
}

void Model::load(const std::string& path) {
    auto params = parameters();
    load_checkpoint(path, encoder_.config(), params);
}

namespace {

constexpr int kCheckpointVersion = 1;

void write_config(std::ostream& os, const EncoderConfig& c) {
    os << "config patch_size " << c.patch_size << "\n"
       << "config embed_dim " << c.embed_dim << "\n"
       << "config num_heads " << c.num_heads << "\n"
       << "config num_blocks " << c.num_blocks << "\n"
       << "config mlp_ratio " << c.mlp_ratio << "\n"
       << "config template_resolution " << c.template_resolution << "\n"
       << "config search_resolution " << c.search_resolution << "\n"
       << "config num_scales " << c.num_scales << "\n"
       << "config use_dynamic " << (c.use_dynamic ? 1 : 0) << "\n";
}

}  // namespace

void save_checkpoint(const std::string& path, const EncoderConfig& cfg,
                     const std::vector<NamedParam>& params) {
    std::ofstream out(path, std::ios::binary);
    check(out.good(), "checkpoint: cannot open " + path + " for writing");
    out << "contrack-checkpoint " << kCheckpointVersion << "\n";
    write_config(out, cfg);
    for (const auto& p : params) {
        out << "tensor " << p.name << " f64";
        for (int e : p.tensor.shape()) out << " " << e;
        out << "\n";
    }
    out << "data\n";
    for (const auto& p : params) {
        const auto& d = p.tensor.data();
        out.write(reinterpret_cast<const char*>(d.data()),
                  static_cast<std::streamsize>(d.size() * sizeof(double)));
    }
    check(out.good(), "checkpoint: write to " + path + " failed");
}

namespace {

struct ManifestEntry {
    std::string name;
    Shape shape;
};

struct Manifest {
    EncoderConfig cfg;
    std::vector<ManifestEntry> entries;
    std::streampos data_start;
};

Manifest read_manifest(std::ifstream& in, const std::string& path) {
    Manifest m;
    std::string line;
    check(static_cast<bool>(std::getline(in, line)), "checkpoint: empty file " + path);
    std::istringstream head(line);
    std::string magic;
    int version = -1;
    head >> magic >> version;
    check(magic == "contrack-checkpoint", "checkpoint: bad magic in " + path);
    check(version == kCheckpointVersion,
          "checkpoint: unsupported version " + std::to_string(version));

    std::map<std::string, std::string> cfg_kv;
    while (std::getline(in, line)) {
        if (line == "data") break;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "config") {
            std::string key, val;
            ls >> key >> val;
            cfg_kv[key] = val;
        } else if (kind == "tensor") {
            ManifestEntry e;
            std::string dtype;
            ls >> e.name >> dtype;
            check(dtype == "f64", "checkpoint: unsupported dtype " + dtype);
            int ext;
            while (ls >> ext) e.shape.push_back(ext);
            m.entries.push_back(std::move(e));
        } else {
            fail("checkpoint: unrecognized manifest line: " + line);
        }
    }
    auto geti = [&cfg_kv](const char* k) {
        check(cfg_kv.count(k), std::string("checkpoint: missing config key ") + k);
        return std::stoi(cfg_kv[k]);
    };
    m.cfg.patch_size = geti("patch_size");
    m.cfg.embed_dim = geti("embed_dim");
    m.cfg.num_heads = geti("num_heads");
    m.cfg.num_blocks = geti("num_blocks");
    m.cfg.mlp_ratio = std::stod(cfg_kv["mlp_ratio"]);
    m.cfg.template_resolution = geti("template_resolution");
    m.cfg.search_resolution = geti("search_resolution");
    m.cfg.num_scales = geti("num_scales");
    m.cfg.use_dynamic = geti("use_dynamic") != 0;
    m.data_start = in.tellg();
    return m;
}

}  // namespace

EncoderConfig peek_checkpoint_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "checkpoint: cannot open " + path);
    return read_manifest(in, path).cfg;
}

void load_checkpoint(const std::string& path, const EncoderConfig& expected_cfg,
                     std::vector<NamedParam>& params) {
    std::ifstream in(path, std::ios::binary);
    check(in.good(), "checkpoint: cannot open " + path);
    Manifest m = read_manifest(in, path);
    check(m.cfg == expected_cfg,
          "checkpoint: stored encoder config does not match the model definition");
    check(m.entries.size() == params.size(),
          "checkpoint: tensor count mismatch (" + std::to_string(m.entries.size()) + " stored, " +
              std::to_string(params.size()) + " expected)");
    for (std::size_t i = 0; i < params.size(); ++i) {
        check(m.entries[i].name == params[i].name,
              "checkpoint: tensor order mismatch at " + m.entries[i].name);
        check(m.entries[i].shape == params[i].tensor.shape(),
              "checkpoint: shape mismatch for " + m.entries[i].name);
        auto& d = params[i].tensor.data();
        in.read(reinterpret_cast<char*>(d.data()),
                static_cast<std::streamsize>(d.size() * sizeof(double)));
        check(in.gcount() == static_cast<std::streamsize>(d.size() * sizeof(double)),
              "checkpoint: truncated data for " + m.entries[i].name);
    }
}

}  // namespace contrack
