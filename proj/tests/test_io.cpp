#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "contrack/config.hpp"
#include "contrack/model.hpp"

using namespace contrack;

TEST_CASE("config text round trip") {
    RunConfig cfg;
    cfg.encoder.embed_dim = 48;
    cfg.encoder.num_heads = 3;
    cfg.prune = PruneConfig{0.8, {1, 3}};
    cfg.tracker.scales = {2.0, 3.0};
    cfg.tracker.tau = 0.55;
    cfg.optim.epochs = 4;
    cfg.bench.hue_drift = 0.01;
    RunConfig back = parse_config_text(config_to_text(cfg));
    CHECK(back.encoder == cfg.encoder);
    CHECK(back.prune.keep_ratio == cfg.prune.keep_ratio);
    CHECK(back.prune.stage_indices == cfg.prune.stage_indices);
    CHECK(back.tracker.scales == cfg.tracker.scales);
    CHECK(back.tracker.tau == cfg.tracker.tau);
    CHECK(back.optim.epochs == 4);
    CHECK(back.bench.hue_drift == cfg.bench.hue_drift);
}

TEST_CASE("config parsing: comments, booleans, stage lists") {
    RunConfig cfg = parse_config_text(
        "# comment line\n"
        "\n"
        "use_dynamic = off\n"
        "prune_stages = none\n"
        "scales = 2.5\n"
        "num_scales = 1\n"
        "tau = 0.8\n");
    CHECK(!cfg.encoder.use_dynamic);
    CHECK(cfg.prune.stage_indices.empty());
    CHECK(cfg.tracker.scales == std::vector<double>{2.5});
    CHECK(cfg.tracker.tau == 0.8);
}

TEST_CASE("unknown keys and malformed lines are hard errors") {
    CHECK_THROWS(parse_config_text("no_such_key = 1\n"));
    CHECK_THROWS(parse_config_text("patch_size 16\n"));
    CHECK_THROWS(parse_config_text("use_dynamic = maybe\n"));
}

TEST_CASE("checkpoint round trip is bitwise") {
    EncoderConfig enc;
    enc.embed_dim = 32;
    enc.num_heads = 2;
    enc.num_blocks = 2;
    enc.num_scales = 1;
    PruneConfig prune{0.7, {1}};
    Model a(enc, prune, 77);
    a.save("ckpt_roundtrip.bin");
    Model b(enc, prune, 12345);  // different init, must be overwritten
    b.load("ckpt_roundtrip.bin");
    auto pa = a.parameters(), pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].name == pb[i].name);
        CHECK(pa[i].tensor.data() == pb[i].tensor.data());
    }
    CHECK(peek_checkpoint_config("ckpt_roundtrip.bin") == enc);
}

TEST_CASE("checkpoint config mismatch is a hard error") {
    EncoderConfig enc;
    enc.embed_dim = 32;
    enc.num_heads = 2;
    enc.num_blocks = 2;
    enc.num_scales = 1;
    Model a(enc, PruneConfig{0.7, {1}}, 1);
    a.save("ckpt_mismatch.bin");
    EncoderConfig other = enc;
    other.num_blocks = 3;
    Model b(other, PruneConfig{0.7, {1}}, 1);
    CHECK_THROWS(b.load("ckpt_mismatch.bin"));
}

TEST_CASE("corrupt checkpoints are rejected") {
    {
        std::ofstream f("ckpt_corrupt.bin");
        f << "not a checkpoint\n";
    }
    EncoderConfig enc;
    enc.embed_dim = 32;
    enc.num_heads = 2;
    enc.num_blocks = 2;
    enc.num_scales = 1;
    Model m(enc, PruneConfig{0.7, {1}}, 1);
    CHECK_THROWS(m.load("ckpt_corrupt.bin"));
    CHECK_THROWS(m.load("ckpt_does_not_exist.bin"));
}
