#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "contrack/encoder.hpp"
#include "contrack/pruning.hpp"

using namespace contrack;

namespace {

// 1 static center, 1 dynamic center, then n_search search tokens on a 1-row grid
TokenSequence tiny_seq(int n_search) {
    TokenSequence seq;
    auto push = [&](Segment s, bool center, int r, int c) {
        seq.segments.push_back(s);
        seq.scale_index.push_back(s == Segment::Search ? -1 : 0);
        seq.grid_coords.emplace_back(r, c);
        seq.center_flags.push_back(center);
    };
    push(Segment::Static, true, 0, 0);
    push(Segment::Dynamic, true, 0, 0);
    for (int j = 0; j < n_search; ++j) push(Segment::Search, false, 0, j);
    int n = seq.size();
    std::vector<double> emb(n * 2);
    for (int i = 0; i < n * 2; ++i) emb[i] = i + 1.0;
    seq.embeddings = Tensor({n, 2}, emb);
    return seq;
}

}  // namespace

TEST_CASE("uniform attention gives a constant omega") {
    TokenSequence seq = tiny_seq(3);
    int n = seq.size();
    Tensor a = Tensor::full({n, n}, 1.0 / n);
    auto omega = score_tokens(a, 1, seq);
    REQUIRE(omega.size() == 3);
    for (double w : omega) CHECK(w == doctest::Approx(omega[0]).epsilon(1e-14));
}

TEST_CASE("omega is the hand sum over template-center rows") {
    TokenSequence seq = tiny_seq(2);
    Tensor a({4, 4}, {0.0, 0.0, 0.6, 0.4,   // static center row
                      0.0, 0.0, 0.1, 0.9,   // dynamic center row
                      0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25});
    auto omega = score_tokens(a, 1, seq);
    REQUIRE(omega.size() == 2);
    CHECK(omega[0] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(omega[1] == doctest::Approx(1.3).epsilon(1e-12));
}

TEST_CASE("omega ignores non-center template rows") {
    TokenSequence seq = tiny_seq(2);
    seq.segments.push_back(Segment::Static);  // extra non-center template token
    seq.scale_index.push_back(0);
    seq.grid_coords.emplace_back(0, 1);
    seq.center_flags.push_back(false);
    std::vector<double> emb(5 * 2, 1.0);
    seq.embeddings = Tensor({5, 2}, emb);
    Tensor a({5, 5}, {0.0, 0.0, 0.6, 0.4, 0.0,
                      0.0, 0.0, 0.1, 0.9, 0.0,
                      0.2, 0.2, 0.2, 0.2, 0.2,
                      0.2, 0.2, 0.2, 0.2, 0.2,
                      0.0, 0.0, 0.9, 0.1, 0.0});  // non-center row must not count
    auto omega = score_tokens(a, 1, seq);
    CHECK(omega[0] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(omega[1] == doctest::Approx(1.3).epsilon(1e-12));
}

TEST_CASE("score_tokens requires center flags") {
    TokenSequence seq = tiny_seq(2);
    seq.center_flags.assign(seq.center_flags.size(), false);
    Tensor a = Tensor::full({4, 4}, 0.25);
    CHECK_THROWS(score_tokens(a, 1, seq));
}

TEST_CASE("prune keeps the top tokens by omega") {
    TokenSequence seq = tiny_seq(4);
    auto [pruned, decision] = prune(seq, {0.1, 0.9, 0.5, 0.4}, 0.5);
    REQUIRE(decision.kept_indices.size() == 2);
    // sequence indices 2..5 are the search tokens; 0.9 is token 3, 0.5 is token 4
    CHECK(decision.kept_indices[0] == 3);
    CHECK(decision.kept_indices[1] == 4);
    CHECK(pruned.count(Segment::Search) == 2);
    CHECK(pruned.count(Segment::Static) == 1);
    CHECK(pruned.count(Segment::Dynamic) == 1);
    REQUIRE(decision.dropped_grid_coords.size() == 2);
    CHECK(decision.dropped_grid_coords[0] == std::make_pair(0, 0));
    CHECK(decision.dropped_grid_coords[1] == std::make_pair(0, 3));
}

TEST_CASE("ties break toward the lowest original grid index") {
    TokenSequence seq = tiny_seq(4);
    auto [pruned, decision] = prune(seq, {0.25, 0.25, 0.25, 0.25}, 0.5);
    REQUIRE(decision.kept_indices.size() == 2);
    CHECK(decision.kept_indices[0] == 2);
    CHECK(decision.kept_indices[1] == 3);
}

TEST_CASE("rho = 1 prune is the bitwise identity") {
    TokenSequence seq = tiny_seq(5);
    auto [pruned, decision] = prune(seq, {5, 4, 3, 2, 1}, 1.0);
    CHECK(pruned.size() == seq.size());
    CHECK(pruned.embeddings.data() == seq.embeddings.data());
    CHECK(static_cast<int>(decision.kept_indices.size()) == 5);
    CHECK(decision.dropped_grid_coords.empty());
}

TEST_CASE("survivor counts follow the compounded ceiling") {
    EncoderConfig paper;
    paper.template_resolution = 192;
    paper.search_resolution = 384;
    paper.num_blocks = 12;
    PruneConfig prune_cfg{0.7, {4, 7, 10}};
    CHECK(paper.search_tokens() == 576);
    auto counts = search_tokens_per_block(paper, prune_cfg);
    REQUIRE(counts.size() == 12);
    CHECK(counts[3] == 576);
    CHECK(counts[4] == 404);   // ceil(0.7 * 576)
    CHECK(counts[7] == 283);   // ceil(0.7 * 404)
    CHECK(counts[10] == 199);  // ceil(0.7 * 283)
    CHECK(counts[11] == 199);
}

TEST_CASE("scatter_to_grid with no pruning is a pure reshape") {
    TokenSequence seq = tiny_seq(4);
    Tensor grid = scatter_to_grid(seq, 4, 1);
    CHECK(grid.shape() == Shape{2, 1, 4});
    // search token j sits at embeddings row 2 + j
    for (int j = 0; j < 4; ++j)
        for (int c = 0; c < 2; ++c) CHECK(grid.at(c * 4 + j) == seq.embeddings.at(2 + j, c));
}

TEST_CASE("scatter_to_grid zeroes pruned cells and rejects duplicates") {
    TokenSequence seq = tiny_seq(4);
    auto [pruned, decision] = prune(seq, {0.1, 0.9, 0.5, 0.4}, 0.25);
    Tensor grid = scatter_to_grid(pruned, 4, 1);
    int nonzero_cols = 0;
    for (int j = 0; j < 4; ++j) {
        bool nz = grid.at(j) != 0.0 || grid.at(4 + j) != 0.0;
        nonzero_cols += nz;
    }
    CHECK(nonzero_cols == 1);

    TokenSequence dup = tiny_seq(2);
    dup.grid_coords[3] = dup.grid_coords[2];
    CHECK_THROWS(scatter_to_grid(dup, 2, 1));
}

TEST_CASE("flops: uniform blocks without pruning, savings with it") {
    EncoderConfig cfg;  // desk config
    FlopsReport full = flops(cfg, PruneConfig{1.0, {2, 4}});
    for (auto m : full.per_block_macs) CHECK(m == full.per_block_macs[0]);
    CHECK(full.total_macs == cfg.num_blocks * full.per_block_macs[0]);

    FlopsReport none = flops(cfg, PruneConfig{0.7, {}});
    CHECK(none.total_macs == full.total_macs);

    double prev = 0.0;
    for (double rho : {0.6, 0.7, 0.8, 0.9, 1.0}) {
        FlopsReport r = flops(cfg, PruneConfig{rho, {2, 4}});
        CHECK(r.total_macs > prev);  // strictly increasing in rho
        prev = r.total_macs;
    }

    EncoderConfig paper;
    paper.template_resolution = 192;
    paper.search_resolution = 384;
    paper.num_blocks = 12;
    CHECK(flops(paper, PruneConfig{0.7, {4, 7, 10}}).total_macs <
          flops(paper, PruneConfig{1.0, {4, 7, 10}}).total_macs);
}

TEST_CASE("config validation") {
    CHECK_THROWS(PruneConfig{0.0, {2}}.validate(6));
    CHECK_THROWS(PruneConfig{1.1, {2}}.validate(6));
    CHECK_THROWS(PruneConfig{0.7, {0}}.validate(6));
    CHECK_THROWS(PruneConfig{0.7, {4, 2}}.validate(6));
    CHECK_THROWS(PruneConfig{0.7, {2, 8}}.validate(6));
    PruneConfig{0.7, {2, 4}}.validate(6);  // fine
}

TEST_CASE("csv row carries the per-block counts") {
    EncoderConfig cfg;
    PruneConfig p{0.7, {2, 4}};
    FlopsReport r = flops(cfg, p);
    std::string row = flops_csv_row(cfg, p, r);
    CHECK(row.find("0.7") != std::string::npos);
    CHECK(row.find("2;4") != std::string::npos);
    CHECK(row.find(std::to_string(r.total_macs)) != std::string::npos);
    CHECK(flops_csv_header().find("total_macs") != std::string::npos);
}
