#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "contrack/gradcheck.hpp"
#include "contrack/optim.hpp"
#include "contrack/tensor.hpp"

using namespace contrack;

TEST_CASE("matmul identity and hand product") {
    Tensor i2 = Tensor::eye(2);
    Tensor p = matmul(i2, i2);
    CHECK(p.at(0, 0) == 1.0);
    CHECK(p.at(0, 1) == 0.0);
    CHECK(p.at(1, 1) == 1.0);

    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 1}, {5, 6});
    Tensor c = matmul(a, b);
    CHECK(c.at(0, 0) == 17.0);
    CHECK(c.at(1, 0) == 39.0);

    CHECK_THROWS(matmul(a, Tensor({3, 2}, {1, 2, 3, 4, 5, 6})));
}

TEST_CASE("matmul gradient of sum(A*B) w.r.t. A is row sums of B") {
    Tensor a({2, 3}, {0.3, -1.2, 0.5, 2.0, 0.1, -0.4});
    Tensor b({3, 2}, {1.0, 2.0, -0.5, 0.25, 3.0, -1.0});
    a.set_requires_grad(true);
    GradTape tape;
    tape.backward(sum(matmul(a, b)));
    for (int r = 0; r < 2; ++r)
        for (int k = 0; k < 3; ++k) {
            double expect = b.at(k, 0) + b.at(k, 1);
            CHECK(a.grad()[r * 3 + k] == doctest::Approx(expect).epsilon(1e-12));
        }
}

TEST_CASE("softmax rows") {
    Tensor eq({1, 4}, {3.0, 3.0, 3.0, 3.0});
    Tensor s = softmax_rows(eq);
    for (int j = 0; j < 4; ++j) CHECK(s.at(0, j) == doctest::Approx(0.25).epsilon(1e-14));

    Tensor t({1, 2}, {0.0, std::log(3.0)});
    Tensor u = softmax_rows(t);
    CHECK(u.at(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(u.at(0, 1) == doctest::Approx(0.75).epsilon(1e-12));

    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd(0.0, 3.0);
    std::vector<double> data(40);
    for (double& v : data) v = nd(rng);
    Tensor r = softmax_rows(Tensor({5, 8}, data));
    for (int i = 0; i < 5; ++i) {
        double row = 0.0;
        for (int j = 0; j < 8; ++j) row += r.at(i, j);
        CHECK(std::fabs(row - 1.0) <= 1e-12);
    }
}

TEST_CASE("softmax gradient vs finite differences") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> xd(12), wd(12);
    for (double& v : xd) v = nd(rng);
    for (double& v : wd) v = nd(rng);
    Tensor w({3, 4}, wd);
    double err = finite_diff_error(
        [&](const std::vector<Tensor>& in) { return sum(mul(softmax_rows(in[0]), w)); },
        {Tensor({3, 4}, xd)});
    CHECK(err <= 1e-6);
}

TEST_CASE("backward basics") {
    Tensor x({3}, {1.0, -2.0, 0.5});
    x.set_requires_grad(true);
    {
        GradTape tape;
        tape.backward(sum(x));
        for (double g : x.grad()) CHECK(g == 1.0);
    }
    x.zero_grad();
    {
        GradTape tape;
        tape.backward(sum(mul(x, x)));
        for (int i = 0; i < 3; ++i)
            CHECK(x.grad()[i] == doctest::Approx(2.0 * x.at(i)).epsilon(1e-12));
    }
}

TEST_CASE("backward contract errors") {
    Tensor x({2}, {1.0, 2.0});
    x.set_requires_grad(true);
    GradTape tape;
    Tensor y = mul(x, x);
    CHECK_THROWS(tape.backward(y));  // non-scalar loss
    Tensor s = sum(y);
    tape.backward(s);
    CHECK_THROWS(tape.backward(s));  // tape already consumed
}

TEST_CASE("non-finite forward values are rejected") {
    Tensor z({2}, {0.0, 1.0});
    CHECK_THROWS(log_(z));
    CHECK_THROWS(div(Tensor({1}, {1.0}), Tensor({1}, {0.0})));
    CHECK_THROWS(exp_(Tensor({1}, {1e9})));
}

TEST_CASE("reshape and transpose round-trip exactly") {
    Tensor a({3, 4}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    Tensor b = reshape(reshape(a, {2, 6}), {3, 4});
    Tensor c = transpose(transpose(a));
    for (int i = 0; i < 12; ++i) {
        CHECK(b.at(i) == a.at(i));
        CHECK(c.at(i) == a.at(i));
    }
}

TEST_CASE("concat, slice, gather, scatter semantics") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({1, 2}, {5, 6});
    Tensor cat = concat({a, b}, 0);
    CHECK(cat.shape() == Shape{3, 2});
    CHECK(cat.at(2, 1) == 6.0);

    Tensor sl = slice_cols(cat, 1, 1);
    CHECK(sl.shape() == Shape{3, 1});
    CHECK(sl.at(1, 0) == 4.0);

    Tensor g = gather_rows(cat, {2, 0});
    CHECK(g.at(0, 0) == 5.0);
    CHECK(g.at(1, 0) == 1.0);

    Tensor sc = scatter_rows(b, {2}, 4);
    CHECK(sc.shape() == Shape{4, 2});
    CHECK(sc.at(2, 0) == 5.0);
    CHECK(sc.at(0, 0) == 0.0);
    CHECK_THROWS(scatter_rows(a, {1, 1}, 4));  // duplicate destination
}

TEST_CASE("every differentiable op passes finite differences") {
    auto checks = run_gradchecks(17);
    for (const auto& c : checks) {
        INFO(c.name);
        CHECK(c.max_err <= 1e-4);
    }
    CHECK(all_pass(checks));
}

TEST_CASE("optimizer: decoupled decay and quadratic descent") {
    // zero gradient: the update must be exactly the decay term
    Tensor p({2}, {1.0, -2.0});
    p.set_requires_grad(true);
    std::vector<NamedParam> params{{"p", p}};
    AdamW opt({0.1, 0.9, 0.999, 1e-8, 0.5});
    zero_grads(params);
    opt.step(params);
    CHECK(p.at(0) == doctest::Approx(1.0 - 0.1 * 0.5 * 1.0).epsilon(1e-12));
    CHECK(p.at(1) == doctest::Approx(-2.0 - 0.1 * 0.5 * -2.0).epsilon(1e-12));

    // minimize (x - 3)^2
    Tensor x({1}, {0.0});
    x.set_requires_grad(true);
    std::vector<NamedParam> ps{{"x", x}};
    AdamW opt2({0.05, 0.9, 0.999, 1e-8, 0.0});
    for (int i = 0; i < 400; ++i) {
        zero_grads(ps);
        GradTape tape;
        Tensor diff = add_scalar(x, -3.0);
        tape.backward(sum(mul(diff, diff)));
        opt2.step(ps);
    }
    CHECK(x.at(0) == doctest::Approx(3.0).epsilon(1e-2));
}

TEST_CASE("optimizer state survives parameter list rebuilds") {
    Tensor x({1}, {1.0});
    x.set_requires_grad(true);
    AdamW opt({0.1, 0.9, 0.999, 1e-8, 0.0});
    for (int i = 0; i < 3; ++i) {
        std::vector<NamedParam> ps{{"x", x}};  // rebuilt each step, same name
        zero_grads(ps);
        GradTape tape;
        tape.backward(sum(mul(x, x)));
        opt.step(ps);
    }
    CHECK(opt.steps_taken() == 3);
    CHECK(x.at(0) < 1.0);
}

TEST_CASE("shape contract errors") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    CHECK_THROWS(add(a, Tensor({3}, {1, 2, 3})));
    CHECK_THROWS(reshape(a, {3, 3}));
    CHECK_THROWS(gather_rows(a, {5}));
    CHECK_THROWS(Tensor({2}, {1.0, 2.0, 3.0}));
}
