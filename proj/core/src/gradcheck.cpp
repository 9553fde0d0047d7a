#include "contrack/gradcheck.hpp"

#include <cmath>
#include <random>

#include "contrack/model.hpp"
#include "contrack/objectives.hpp"

namespace contrack {

namespace {

double rel_err(double a, double n) {
    double denom = std::max(std::fabs(a), std::fabs(n));
    if (denom < 1e-6) return std::fabs(a - n);
    return std::fabs(a - n) / denom;
}

std::vector<std::vector<double>> analytic_grads(const ScalarFn& fn, std::vector<Tensor>& inputs) {
    for (auto& t : inputs) {
        t.set_requires_grad(true);
        t.zero_grad();
    }
    GradTape tape;
    Tensor loss = fn(inputs);
    tape.backward(loss);
    std::vector<std::vector<double>> grads;
    for (auto& t : inputs) grads.push_back(t.grad());
    return grads;
}

double eval(const ScalarFn& fn, const std::vector<Tensor>& inputs) {
    return fn(inputs).value();  // no active tape: values only
}

}  // namespace

double finite_diff_error(const ScalarFn& fn, std::vector<Tensor> inputs, double eps) {
    auto grads = analytic_grads(fn, inputs);
    double worst = 0.0;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        auto& data = inputs[t].data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            double keep = data[i];
            data[i] = keep + eps;
            double hi = eval(fn, inputs);
            data[i] = keep - eps;
            double lo = eval(fn, inputs);
            data[i] = keep;
            worst = std::max(worst, rel_err(grads[t][i], (hi - lo) / (2.0 * eps)));
        }
    }
    return worst;
}

double directional_diff_error(const ScalarFn& fn, std::vector<Tensor> inputs, std::uint64_t seed,
                              int directions, double eps) {
    auto grads = analytic_grads(fn, inputs);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0.0;
    for (int d = 0; d < directions; ++d) {
        std::vector<std::vector<double>> dir;
        double norm2 = 0.0;
        for (auto& t : inputs) {
            dir.emplace_back(t.numel());
            for (double& v : dir.back()) {
                v = normal(rng);
                norm2 += v * v;
            }
        }
        double inv_norm = 1.0 / std::sqrt(norm2);
        double analytic = 0.0;
        for (std::size_t t = 0; t < inputs.size(); ++t)
            for (std::size_t i = 0; i < dir[t].size(); ++i) {
                dir[t][i] *= inv_norm;
                analytic += grads[t][i] * dir[t][i];
            }
        auto shift = [&](double sign) {
            for (std::size_t t = 0; t < inputs.size(); ++t) {
                auto& data = inputs[t].data();
                for (std::size_t i = 0; i < data.size(); ++i) data[i] += sign * eps * dir[t][i];
            }
        };
        shift(+1.0);
        double hi = eval(fn, inputs);
        shift(-2.0);
        double lo = eval(fn, inputs);
        shift(+1.0);
        worst = std::max(worst, rel_err(analytic, (hi - lo) / (2.0 * eps)));
    }
    return worst;
}

namespace {

Tensor randn(Shape shape, std::mt19937_64& rng, double mean = 0.0, double sd = 1.0) {
    std::normal_distribution<double> normal(mean, sd);
    std::vector<double> data(numel(shape));
    for (double& v : data) v = normal(rng);
    return Tensor(std::move(shape), std::move(data));
}

Tensor rand_pos(Shape shape, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.5, 2.0);
    std::vector<double> data(numel(shape));
    for (double& v : data) v = u(rng);
    return Tensor(std::move(shape), std::move(data));
}

/// Weighted sum so that every output element gets a distinct gradient.
ScalarFn weighted(std::function<Tensor(const std::vector<Tensor>&)> op, const Tensor& weights) {
    return [op, weights](const std::vector<Tensor>& in) { return sum(mul(op(in), weights)); };
}

Image rand_image(int size, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(size, size);
    for (double& v : img.pix) v = u(rng);
    return img;
}

}  // namespace

std::vector<GradCheck> run_gradchecks(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<GradCheck> out;
    Tensor w34 = randn({3, 4}, rng);

    auto check_op = [&](const std::string& name, std::vector<Tensor> inputs,
                        std::function<Tensor(const std::vector<Tensor>&)> op,
                        const Tensor& weights) {
        out.push_back({name, finite_diff_error(weighted(std::move(op), weights),
                                               std::move(inputs))});
    };
    auto check_scalar_op = [&](const std::string& name, std::vector<Tensor> inputs,
                               ScalarFn op) {
        out.push_back({name, finite_diff_error(std::move(op), std::move(inputs))});
    };

    check_op("add", {randn({3, 4}, rng), randn({3, 4}, rng)},
             [](const std::vector<Tensor>& in) { return add(in[0], in[1]); }, w34);
    check_op("sub", {randn({3, 4}, rng), randn({3, 4}, rng)},
             [](const std::vector<Tensor>& in) { return sub(in[0], in[1]); }, w34);
    check_op("mul", {randn({3, 4}, rng), randn({3, 4}, rng)},
             [](const std::vector<Tensor>& in) { return mul(in[0], in[1]); }, w34);
    check_op("div", {randn({3, 4}, rng), rand_pos({3, 4}, rng)},
             [](const std::vector<Tensor>& in) { return div(in[0], in[1]); }, w34);
    check_op("add_scalar", {randn({3, 4}, rng)},
             [](const std::vector<Tensor>& in) { return add_scalar(in[0], 0.7); }, w34);
    check_op("mul_scalar", {randn({3, 4}, rng)},
             [](const std::vector<Tensor>& in) { return mul_scalar(in[0], -1.3); }, w34);
    check_op("neg", {randn({3, 4}, rng)},
             [](const std::vector<Tensor>& in) { return neg(in[0]); }, w34);
    check_op("exp", {randn({3, 4}, rng)},
             [](const std::vector<Tensor>& in) { return exp_(in[0]); }, w34);
    check_op("log", {rand_pos({3, 4}, rng)},
             [](const std::vector<Tensor>& in) { return log_(in[0]); }, w34);
    check_op("sqrt", {rand_pos({3, 4}, rng)},
             [](const std::vector<Tensor>& in) { return sqrt_(in[0]); }, w34);
    check_op("pow_scalar", {rand_pos({3, 4}, rng)},
             [](const std::vector<Tensor>& in) { return pow_scalar(in[0], 1.7); }, w34);
    check_op("sigmoid", {randn({3, 4}, rng)},
             [](const std::vector<Tensor>& in) { return sigmoid(in[0]); }, w34);
    check_op("gelu", {randn({3, 4}, rng)},
             [](const std::vector<Tensor>& in) { return gelu(in[0]); }, w34);

    // keep operands apart so the finite-difference step cannot cross the kink
    Tensor apart_a = randn({3, 4}, rng);
    std::vector<double> bdata = apart_a.data();
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (double& v : bdata) v += (u01(rng) < 0.5 ? -1.0 : 1.0) * (0.2 + u01(rng));
    Tensor apart_b({3, 4}, bdata);
    check_op("maximum", {apart_a, apart_b},
             [](const std::vector<Tensor>& in) { return maximum(in[0], in[1]); }, w34);
    check_op("minimum", {apart_a, apart_b},
             [](const std::vector<Tensor>& in) { return minimum(in[0], in[1]); }, w34);

    std::vector<double> cdata(12);
    for (double& v : cdata) {
        do v = 4.0 * u01(rng) - 2.0;
        while (std::fabs(std::fabs(v) - 0.5) < 0.05);
    }
    check_op("clamp", {Tensor({3, 4}, cdata)},
             [](const std::vector<Tensor>& in) { return clamp(in[0], -0.5, 0.5); }, w34);

    check_op("add_rowvec", {randn({3, 4}, rng), randn({4}, rng)},
             [](const std::vector<Tensor>& in) { return add_rowvec(in[0], in[1]); }, w34);
    check_op("matmul", {randn({3, 4}, rng), randn({4, 2}, rng)},
             [](const std::vector<Tensor>& in) { return matmul(in[0], in[1]); },
             randn({3, 2}, rng));
    check_op("transpose", {randn({3, 4}, rng)},
             [](const std::vector<Tensor>& in) { return transpose(in[0]); }, randn({4, 3}, rng));
    check_op("reshape", {randn({3, 4}, rng)},
             [](const std::vector<Tensor>& in) { return reshape(in[0], {2, 6}); },
             randn({2, 6}, rng));
    check_op("concat_rows", {randn({2, 3}, rng), randn({2, 3}, rng)},
             [](const std::vector<Tensor>& in) { return concat({in[0], in[1]}, 0); },
             randn({4, 3}, rng));
    check_op("concat_cols", {randn({3, 2}, rng), randn({3, 2}, rng)},
             [](const std::vector<Tensor>& in) { return concat({in[0], in[1]}, 1); },
             randn({3, 4}, rng));
    check_op("slice_cols", {randn({3, 5}, rng)},
             [](const std::vector<Tensor>& in) { return slice_cols(in[0], 1, 3); },
             randn({3, 3}, rng));
    check_op("gather_rows", {randn({4, 3}, rng)},
             [](const std::vector<Tensor>& in) { return gather_rows(in[0], {2, 0, 3, 2}); },
             randn({4, 3}, rng));
    check_op("scatter_rows", {randn({2, 3}, rng)},
             [](const std::vector<Tensor>& in) { return scatter_rows(in[0], {3, 1}, 5); },
             randn({5, 3}, rng));
    check_scalar_op("sum", {randn({3, 4}, rng)},
                    [](const std::vector<Tensor>& in) { return sum(in[0]); });
    check_scalar_op("mean", {randn({3, 4}, rng)},
                    [](const std::vector<Tensor>& in) { return mean(in[0]); });
    check_op("softmax_rows", {randn({3, 4}, rng)},
             [](const std::vector<Tensor>& in) { return softmax_rows(in[0]); }, w34);
    check_op("layer_norm", {randn({3, 4}, rng), rand_pos({4}, rng), randn({4}, rng)},
             [](const std::vector<Tensor>& in) { return layer_norm(in[0], in[1], in[2]); }, w34);
    check_op("conv2d", {randn({2, 5, 5}, rng), randn({3, 2, 3, 3}, rng, 0.0, 0.3),
                        randn({3}, rng)},
             [](const std::vector<Tensor>& in) { return conv2d(in[0], in[1], in[2], 1); },
             randn({3, 5, 5}, rng));

    // whole model + training objective, gradients w.r.t. every parameter
    EncoderConfig cfg;
    PruneConfig prune_cfg{0.7, {2, 4}};
    Model model(cfg, prune_cfg, seed ^ 0xabcdef12u);
    std::vector<Image> statics, dynamics;
    for (int i = 0; i < cfg.num_scales; ++i) {
        statics.push_back(rand_image(cfg.template_resolution, rng));
        dynamics.push_back(rand_image(cfg.template_resolution, rng));
    }
    Image search = rand_image(cfg.search_resolution, rng);
    Box gt{20.0, 24.0, 18.0, 14.0};
    TrainTarget target = gaussian_target(gt, cfg.search_grid(), cfg.search_grid(), cfg.patch_size);
    Box gt_norm{gt.x / cfg.search_resolution, gt.y / cfg.search_resolution,
                gt.w / cfg.search_resolution, gt.h / cfg.search_resolution};
    std::vector<Tensor> params;
    for (auto& p : model.parameters()) params.push_back(p.tensor);
    ScalarFn graph = [&, target, gt_norm](const std::vector<Tensor>&) {
        ModelForward f = model.forward(statics, dynamics, search);
        Tensor score = reshape(f.out.score_map, {f.out.grid_h, f.out.grid_w});
        return total_loss(score, target.gauss, f.out.box_norm, gt_norm);
    };
    out.push_back({"model_total_loss",
                   directional_diff_error(graph, params, seed ^ 0x5152u, 6)});
    return out;
}

bool all_pass(const std::vector<GradCheck>& checks, double tol) {
    for (const auto& c : checks)
        if (!(c.max_err <= tol)) return false;
    return true;
}

}  // namespace contrack
