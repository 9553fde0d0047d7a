#include "contrack/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace contrack {

void fail(const std::string& msg) { throw std::runtime_error(msg); }

void check(bool cond, const std::string& msg) {
    if (!cond) fail(msg);
}

int numel(const Shape& shape) {
    int n = 1;
    for (int e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

namespace {

thread_local GradTape* g_active_tape = nullptr;
thread_local bool g_mac_enabled = false;
thread_local std::uint64_t g_mac_count = 0;

void check_finite(const TensorNode& node, const char* op) {
    for (double v : node.data) {
        if (!std::isfinite(v)) fail(std::string(op) + ": non-finite value in result");
    }
}

void ensure_grad(TensorNode* n) {
    if (n->grad.size() != n->data.size()) n->grad.assign(n->data.size(), 0.0);
}

}  // namespace

void mac_counter_reset() { g_mac_count = 0; }
void mac_counter_enable(bool on) { g_mac_enabled = on; }
std::uint64_t mac_counter_value() { return g_mac_count; }

// ---- Tensor ----

Tensor::Tensor(Shape shape, std::vector<double> data) {
    check(contrack::numel(shape) == static_cast<int>(data.size()),
          "tensor: shape " + shape_str(shape) + " does not match buffer of " +
              std::to_string(data.size()));
    node_ = std::make_shared<TensorNode>();
    node_->shape = std::move(shape);
    node_->data = std::move(data);
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
    int n = contrack::numel(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::eye(int n) {
    Tensor t = Tensor::zeros({n, n});
    for (int i = 0; i < n; ++i) t.mut(i, i) = 1.0;
    return t;
}

double Tensor::value() const {
    check(numel() == 1, "value(): tensor is not scalar, shape " + shape_str(shape()));
    return node_->data[0];
}

double Tensor::at(int r, int c) const {
    return node_->data[static_cast<std::size_t>(r) * shape()[1] + c];
}

double& Tensor::mut(int r, int c) {
    return node_->data[static_cast<std::size_t>(r) * shape()[1] + c];
}

Tensor& Tensor::set_requires_grad(bool v) {
    node_->requires_grad = v;
    return *this;
}

const std::vector<double>& Tensor::grad() const {
    ensure_grad(node_.get());
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

Tensor Tensor::detach() const {
    return Tensor(node_->shape, node_->data);
}

// ---- GradTape ----

GradTape::GradTape() {
    prev_ = g_active_tape;
    g_active_tape = this;
}

GradTape::~GradTape() { g_active_tape = prev_; }

GradTape* GradTape::active() { return g_active_tape; }

void GradTape::record(std::function<void()> backward_step) {
    ops_.push_back(std::move(backward_step));
}

void GradTape::backward(const Tensor& loss) {
    check(loss.numel() == 1, "backward: loss must be scalar, got " + shape_str(loss.shape()));
    check(!consumed_, "backward: tape already consumed; run a new forward pass");
    consumed_ = true;
    ensure_grad(loss.node());
    loss.node()->grad[0] = 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

void backward(const Tensor& loss) {
    GradTape* tape = GradTape::active();
    check(tape != nullptr, "backward: no active tape");
    tape->backward(loss);
}

// ---- op helper ----

namespace {

// Builds the output node; if a tape is active and any input requires grad,
// marks the output and records the backward closure.
Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   std::initializer_list<Tensor> inputs,
                   std::function<void(TensorNode*)> backward_step) {
    Tensor out(std::move(shape), std::move(data));
    check_finite(*out.node(), op);
    bool need = false;
    for (const Tensor& t : inputs)
        if (t.requires_grad()) need = true;
    GradTape* tape = GradTape::active();
    if (need && tape) {
        out.set_requires_grad(true);
        auto out_node = out.shared_node();
        std::vector<std::shared_ptr<TensorNode>> keep;
        for (const Tensor& t : inputs) keep.push_back(t.shared_node());
        tape->record([out_node, keep, backward_step]() {
            ensure_grad(out_node.get());
            for (auto& n : keep) ensure_grad(n.get());
            backward_step(out_node.get());
        });
    }
    return out;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                      shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    std::vector<double> out(a.data());
    for (int i = 0; i < a.numel(); ++i) out[i] += b.at(i);
    auto an = a.node(), bn = b.node();
    return make_result("add", a.shape(), std::move(out), {a, b}, [an, bn](TensorNode* o) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i];
        if (bn->requires_grad)
            for (std::size_t i = 0; i < o->grad.size(); ++i) bn->grad[i] += o->grad[i];
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    std::vector<double> out(a.data());
    for (int i = 0; i < a.numel(); ++i) out[i] -= b.at(i);
    auto an = a.node(), bn = b.node();
    return make_result("sub", a.shape(), std::move(out), {a, b}, [an, bn](TensorNode* o) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i];
        if (bn->requires_grad)
            for (std::size_t i = 0; i < o->grad.size(); ++i) bn->grad[i] -= o->grad[i];
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    std::vector<double> out(a.numel());
    for (int i = 0; i < a.numel(); ++i) out[i] = a.at(i) * b.at(i);
    auto an = a.node(), bn = b.node();
    return make_result("mul", a.shape(), std::move(out), {a, b}, [an, bn](TensorNode* o) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i] * bn->data[i];
        if (bn->requires_grad)
            for (std::size_t i = 0; i < o->grad.size(); ++i) bn->grad[i] += o->grad[i] * an->data[i];
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    check_same_shape("div", a, b);
    std::vector<double> out(a.numel());
    for (int i = 0; i < a.numel(); ++i) out[i] = a.at(i) / b.at(i);
    auto an = a.node(), bn = b.node();
    return make_result("div", a.shape(), std::move(out), {a, b}, [an, bn](TensorNode* o) {
        for (std::size_t i = 0; i < o->grad.size(); ++i) {
            double bi = bn->data[i];
            if (an->requires_grad) an->grad[i] += o->grad[i] / bi;
            if (bn->requires_grad) bn->grad[i] -= o->grad[i] * an->data[i] / (bi * bi);
        }
    });
}

Tensor add_scalar(const Tensor& a, double s) {
    std::vector<double> out(a.data());
    for (double& v : out) v += s;
    auto an = a.node();
    return make_result("add_scalar", a.shape(), std::move(out), {a}, [an](TensorNode* o) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i];
    });
}

Tensor mul_scalar(const Tensor& a, double s) {
    std::vector<double> out(a.data());
    for (double& v : out) v *= s;
    auto an = a.node();
    return make_result("mul_scalar", a.shape(), std::move(out), {a}, [an, s](TensorNode* o) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i] * s;
    });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor exp_(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (int i = 0; i < a.numel(); ++i) out[i] = std::exp(a.at(i));
    auto an = a.node();
    return make_result("exp", a.shape(), std::move(out), {a}, [an](TensorNode* o) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i] * o->data[i];
    });
}

Tensor log_(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (int i = 0; i < a.numel(); ++i) out[i] = std::log(a.at(i));
    auto an = a.node();
    return make_result("log", a.shape(), std::move(out), {a}, [an](TensorNode* o) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i] / an->data[i];
    });
}

Tensor sqrt_(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (int i = 0; i < a.numel(); ++i) out[i] = std::sqrt(a.at(i));
    auto an = a.node();
    return make_result("sqrt", a.shape(), std::move(out), {a}, [an](TensorNode* o) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < o->grad.size(); ++i)
                an->grad[i] += o->grad[i] * 0.5 / o->data[i];
    });
}

Tensor pow_scalar(const Tensor& a, double p) {
    std::vector<double> out(a.numel());
    for (int i = 0; i < a.numel(); ++i) out[i] = std::pow(a.at(i), p);
    auto an = a.node();
    return make_result("pow_scalar", a.shape(), std::move(out), {a}, [an, p](TensorNode* o) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < o->grad.size(); ++i)
                an->grad[i] += o->grad[i] * p * std::pow(an->data[i], p - 1.0);
    });
}

Tensor sigmoid(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (int i = 0; i < a.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a.at(i)));
    auto an = a.node();
    return make_result("sigmoid", a.shape(), std::move(out), {a}, [an](TensorNode* o) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < o->grad.size(); ++i) {
                double s = o->data[i];
                an->grad[i] += o->grad[i] * s * (1.0 - s);
            }
    });
}

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Tensor gelu(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (int i = 0; i < a.numel(); ++i) {
        double x = a.at(i);
        out[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    }
    auto an = a.node();
    return make_result("gelu", a.shape(), std::move(out), {a}, [an](TensorNode* o) {
        if (!an->requires_grad) return;
        for (std::size_t i = 0; i < o->grad.size(); ++i) {
            double x = an->data[i];
            double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
            an->grad[i] += o->grad[i] * (cdf + x * pdf);
        }
    });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
    check_same_shape("maximum", a, b);
    std::vector<double> out(a.numel());
    for (int i = 0; i < a.numel(); ++i) out[i] = std::max(a.at(i), b.at(i));
    auto an = a.node(), bn = b.node();
    // ties route to a
    return make_result("maximum", a.shape(), std::move(out), {a, b}, [an, bn](TensorNode* o) {
        for (std::size_t i = 0; i < o->grad.size(); ++i) {
            if (an->data[i] >= bn->data[i]) {
                if (an->requires_grad) an->grad[i] += o->grad[i];
            } else if (bn->requires_grad) {
                bn->grad[i] += o->grad[i];
            }
        }
    });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
    check_same_shape("minimum", a, b);
    std::vector<double> out(a.numel());
    for (int i = 0; i < a.numel(); ++i) out[i] = std::min(a.at(i), b.at(i));
    auto an = a.node(), bn = b.node();
    return make_result("minimum", a.shape(), std::move(out), {a, b}, [an, bn](TensorNode* o) {
        for (std::size_t i = 0; i < o->grad.size(); ++i) {
            if (an->data[i] <= bn->data[i]) {
                if (an->requires_grad) an->grad[i] += o->grad[i];
            } else if (bn->requires_grad) {
                bn->grad[i] += o->grad[i];
            }
        }
    });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    check(lo <= hi, "clamp: lo > hi");
    std::vector<double> out(a.numel());
    for (int i = 0; i < a.numel(); ++i) out[i] = std::clamp(a.at(i), lo, hi);
    auto an = a.node();
    return make_result("clamp", a.shape(), std::move(out), {a}, [an, lo, hi](TensorNode* o) {
        if (!an->requires_grad) return;
        for (std::size_t i = 0; i < o->grad.size(); ++i) {
            double x = an->data[i];
            if (x >= lo && x <= hi) an->grad[i] += o->grad[i];
        }
    });
}

Tensor add_rowvec(const Tensor& a, const Tensor& b) {
    check(a.ndim() == 2 && b.ndim() == 1 && b.size(0) == a.size(1),
          "add_rowvec: need [m,n] + [n], got " + shape_str(a.shape()) + " + " + shape_str(b.shape()));
    int m = a.size(0), n = a.size(1);
    std::vector<double> out(a.data());
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) out[static_cast<std::size_t>(r) * n + c] += b.at(c);
    auto an = a.node(), bn = b.node();
    return make_result("add_rowvec", a.shape(), std::move(out), {a, b}, [an, bn, m, n](TensorNode* o) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i];
        if (bn->requires_grad)
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < n; ++c)
                    bn->grad[c] += o->grad[static_cast<std::size_t>(r) * n + c];
    });
}

// ---- linear algebra / shape ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.ndim() == 2 && b.ndim() == 2, "matmul: both operands must be 2D");
    check(a.size(1) == b.size(0), "matmul: inner extents differ, " + shape_str(a.shape()) +
                                      " x " + shape_str(b.shape()));
    int m = a.size(0), k = a.size(1), n = b.size(1);
    if (g_mac_enabled) g_mac_count += static_cast<std::uint64_t>(m) * k * n;
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            double av = a.at(i * k + p);
            for (int j = 0; j < n; ++j)
                out[static_cast<std::size_t>(i) * n + j] += av * b.at(p * n + j);
        }
    auto an = a.node(), bn = b.node();
    return make_result("matmul", {m, n}, std::move(out), {a, b}, [an, bn, m, k, n](TensorNode* o) {
        if (an->requires_grad) {
            // dA = dC * B^T
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                    double s = 0.0;
                    for (int j = 0; j < n; ++j)
                        s += o->grad[static_cast<std::size_t>(i) * n + j] *
                             bn->data[static_cast<std::size_t>(p) * n + j];
                    an->grad[static_cast<std::size_t>(i) * k + p] += s;
                }
        }
        if (bn->requires_grad) {
            // dB = A^T * dC
            for (int p = 0; p < k; ++p)
                for (int j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (int i = 0; i < m; ++i)
                        s += an->data[static_cast<std::size_t>(i) * k + p] *
                             o->grad[static_cast<std::size_t>(i) * n + j];
                    bn->grad[static_cast<std::size_t>(p) * n + j] += s;
                }
        }
    });
}

Tensor transpose(const Tensor& a) {
    check(a.ndim() == 2, "transpose: 2D only");
    int m = a.size(0), n = a.size(1);
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(j) * m + i] = a.at(i * n + j);
    auto an = a.node();
    return make_result("transpose", {n, m}, std::move(out), {a}, [an, m, n](TensorNode* o) {
        if (!an->requires_grad) return;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                an->grad[static_cast<std::size_t>(i) * n + j] +=
                    o->grad[static_cast<std::size_t>(j) * m + i];
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    check(contrack::numel(shape) == a.numel(),
          "reshape: cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
    auto an = a.node();
    return make_result("reshape", std::move(shape), a.data(), {a}, [an](TensorNode* o) {
        if (!an->requires_grad) return;
        for (std::size_t i = 0; i < o->grad.size(); ++i) an->grad[i] += o->grad[i];
    });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    check(!parts.empty(), "concat: empty input");
    int nd = parts[0].ndim();
    check(nd == 1 || nd == 2, "concat: 1D or 2D only");
    check(axis >= 0 && axis < nd, "concat: bad axis");
    for (const Tensor& p : parts) check(p.ndim() == nd, "concat: rank mismatch");

    Shape out_shape = parts[0].shape();
    out_shape[axis] = 0;
    for (const Tensor& p : parts) {
        for (int d = 0; d < nd; ++d)
            if (d != axis)
                check(p.shape()[d] == parts[0].shape()[d], "concat: extent mismatch off-axis");
        out_shape[axis] += p.shape()[axis];
    }

    std::vector<double> out(static_cast<std::size_t>(contrack::numel(out_shape)));
    std::vector<std::shared_ptr<TensorNode>> nodes;
    for (const Tensor& p : parts) nodes.push_back(p.shared_node());

    if (nd == 1 || axis == 0) {
        std::size_t off = 0;
        for (const Tensor& p : parts) {
            std::copy(p.data().begin(), p.data().end(), out.begin() + off);
            off += p.data().size();
        }
    } else {  // 2D, axis == 1
        int rows = out_shape[0], cols = out_shape[1];
        int coff = 0;
        for (const Tensor& p : parts) {
            int pc = p.size(1);
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < pc; ++c)
                    out[static_cast<std::size_t>(r) * cols + coff + c] = p.at(r * pc + c);
            coff += pc;
        }
    }

    bool need = false;
    for (const Tensor& p : parts)
        if (p.requires_grad()) need = true;
    Tensor result(out_shape, std::move(out));
    check_finite(*result.node(), "concat");
    GradTape* tape = GradTape::active();
    if (need && tape) {
        result.set_requires_grad(true);
        auto out_node = result.shared_node();
        tape->record([out_node, nodes, nd, axis, out_shape]() {
            ensure_grad(out_node.get());
            for (auto& n : nodes) ensure_grad(n.get());
            if (nd == 1 || axis == 0) {
                std::size_t off = 0;
                for (auto& n : nodes) {
                    if (n->requires_grad)
                        for (std::size_t i = 0; i < n->data.size(); ++i)
                            n->grad[i] += out_node->grad[off + i];
                    off += n->data.size();
                }
            } else {
                int rows = out_shape[0], cols = out_shape[1];
                int coff = 0;
                for (auto& n : nodes) {
                    int pc = n->shape[1];
                    if (n->requires_grad)
                        for (int r = 0; r < rows; ++r)
                            for (int c = 0; c < pc; ++c)
                                n->grad[static_cast<std::size_t>(r) * pc + c] +=
                                    out_node->grad[static_cast<std::size_t>(r) * cols + coff + c];
                    coff += pc;
                }
            }
        });
    }
    return result;
}

Tensor slice_cols(const Tensor& a, int start, int len) {
    check(a.ndim() == 2, "slice_cols: 2D only");
    check(start >= 0 && len > 0 && start + len <= a.size(1), "slice_cols: range out of bounds");
    int m = a.size(0), n = a.size(1);
    std::vector<double> out(static_cast<std::size_t>(m) * len);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < len; ++c)
            out[static_cast<std::size_t>(r) * len + c] = a.at(r * n + start + c);
    auto an = a.node();
    return make_result("slice_cols", {m, len}, std::move(out), {a}, [an, m, n, start, len](TensorNode* o) {
        if (!an->requires_grad) return;
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < len; ++c)
                an->grad[static_cast<std::size_t>(r) * n + start + c] +=
                    o->grad[static_cast<std::size_t>(r) * len + c];
    });
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& indices) {
    check(a.ndim() == 2, "gather_rows: 2D only");
    int n = a.size(0), d = a.size(1);
    for (int idx : indices) check(idx >= 0 && idx < n, "gather_rows: index out of range");
    int m = static_cast<int>(indices.size());
    std::vector<double> out(static_cast<std::size_t>(m) * d);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < d; ++c)
            out[static_cast<std::size_t>(r) * d + c] = a.at(indices[r] * d + c);
    auto an = a.node();
    return make_result("gather_rows", {m, d}, std::move(out), {a}, [an, indices, d](TensorNode* o) {
        if (!an->requires_grad) return;
        for (std::size_t r = 0; r < indices.size(); ++r)
            for (int c = 0; c < d; ++c)
                an->grad[static_cast<std::size_t>(indices[r]) * d + c] +=
                    o->grad[r * d + c];
    });
}

Tensor scatter_rows(const Tensor& src, const std::vector<int>& indices, int out_rows) {
    check(src.ndim() == 2, "scatter_rows: 2D only");
    check(static_cast<int>(indices.size()) == src.size(0),
          "scatter_rows: one index per source row required");
    std::vector<bool> seen(out_rows, false);
    for (int idx : indices) {
        check(idx >= 0 && idx < out_rows, "scatter_rows: index out of range");
        check(!seen[idx], "scatter_rows: duplicate target row " + std::to_string(idx));
        seen[idx] = true;
    }
    int d = src.size(1);
    std::vector<double> out(static_cast<std::size_t>(out_rows) * d, 0.0);
    for (std::size_t r = 0; r < indices.size(); ++r)
        for (int c = 0; c < d; ++c)
            out[static_cast<std::size_t>(indices[r]) * d + c] = src.at(static_cast<int>(r) * d + c);
    auto sn = src.node();
    return make_result("scatter_rows", {out_rows, d}, std::move(out), {src}, [sn, indices, d](TensorNode* o) {
        if (!sn->requires_grad) return;
        for (std::size_t r = 0; r < indices.size(); ++r)
            for (int c = 0; c < d; ++c)
                sn->grad[r * d + c] += o->grad[static_cast<std::size_t>(indices[r]) * d + c];
    });
}

// ---- reductions & nn ----

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (int i = 0; i < a.numel(); ++i) s += a.at(i);
    auto an = a.node();
    return make_result("sum", {1}, {s}, {a}, [an](TensorNode* o) {
        if (!an->requires_grad) return;
        for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += o->grad[0];
    });
}

Tensor mean(const Tensor& a) {
    double s = 0.0;
    for (int i = 0; i < a.numel(); ++i) s += a.at(i);
    double inv = 1.0 / a.numel();
    auto an = a.node();
    return make_result("mean", {1}, {s * inv}, {a}, [an, inv](TensorNode* o) {
        if (!an->requires_grad) return;
        for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += o->grad[0] * inv;
    });
}

Tensor softmax_rows(const Tensor& a) {
    check(a.ndim() == 2, "softmax_rows: 2D only");
    int m = a.size(0), n = a.size(1);
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    for (int r = 0; r < m; ++r) {
        double mx = a.at(r * n);
        for (int c = 1; c < n; ++c) mx = std::max(mx, a.at(r * n + c));
        double denom = 0.0;
        for (int c = 0; c < n; ++c) {
            double e = std::exp(a.at(r * n + c) - mx);
            out[static_cast<std::size_t>(r) * n + c] = e;
            denom += e;
        }
        for (int c = 0; c < n; ++c) out[static_cast<std::size_t>(r) * n + c] /= denom;
    }
    auto an = a.node();
    return make_result("softmax_rows", a.shape(), std::move(out), {a}, [an, m, n](TensorNode* o) {
        if (!an->requires_grad) return;
        for (int r = 0; r < m; ++r) {
            double dot = 0.0;
            for (int c = 0; c < n; ++c)
                dot += o->grad[static_cast<std::size_t>(r) * n + c] *
                       o->data[static_cast<std::size_t>(r) * n + c];
            for (int c = 0; c < n; ++c) {
                std::size_t i = static_cast<std::size_t>(r) * n + c;
                an->grad[i] += o->data[i] * (o->grad[i] - dot);
            }
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    check(x.ndim() == 2, "layer_norm: x must be 2D");
    int m = x.size(0), d = x.size(1);
    check(gamma.ndim() == 1 && gamma.size(0) == d, "layer_norm: gamma shape mismatch");
    check(beta.ndim() == 1 && beta.size(0) == d, "layer_norm: beta shape mismatch");
    std::vector<double> out(static_cast<std::size_t>(m) * d);
    std::vector<double> mu(m), inv_std(m);
    for (int r = 0; r < m; ++r) {
        double s = 0.0;
        for (int c = 0; c < d; ++c) s += x.at(r * d + c);
        mu[r] = s / d;
        double v = 0.0;
        for (int c = 0; c < d; ++c) {
            double dv = x.at(r * d + c) - mu[r];
            v += dv * dv;
        }
        inv_std[r] = 1.0 / std::sqrt(v / d + eps);
        for (int c = 0; c < d; ++c) {
            double xh = (x.at(r * d + c) - mu[r]) * inv_std[r];
            out[static_cast<std::size_t>(r) * d + c] = gamma.at(c) * xh + beta.at(c);
        }
    }
    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    return make_result("layer_norm", x.shape(), std::move(out), {x, gamma, beta},
                       [xn, gn, bn, m, d, mu, inv_std](TensorNode* o) {
        for (int r = 0; r < m; ++r) {
            // xhat and row-level reductions
            double sum_dy_xhat = 0.0, sum_dy = 0.0;
            for (int c = 0; c < d; ++c) {
                std::size_t i = static_cast<std::size_t>(r) * d + c;
                double xh = (xn->data[i] - mu[r]) * inv_std[r];
                double dy = o->grad[i] * gn->data[c];
                sum_dy_xhat += dy * xh;
                sum_dy += dy;
                if (gn->requires_grad) gn->grad[c] += o->grad[i] * xh;
                if (bn->requires_grad) bn->grad[c] += o->grad[i];
            }
            if (xn->requires_grad) {
                for (int c = 0; c < d; ++c) {
                    std::size_t i = static_cast<std::size_t>(r) * d + c;
                    double xh = (xn->data[i] - mu[r]) * inv_std[r];
                    double dy = o->grad[i] * gn->data[c];
                    xn->grad[i] += inv_std[r] * (dy - sum_dy / d - xh * sum_dy_xhat / d);
                }
            }
        }
    });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad) {
    check(x.ndim() == 3 && w.ndim() == 4, "conv2d: x must be [C,H,W], w [Cout,Cin,kh,kw]");
    int cin = x.size(0), h = x.size(1), wd = x.size(2);
    int cout = w.size(0), kh = w.size(2), kw = w.size(3);
    check(w.size(1) == cin, "conv2d: channel mismatch");
    check(b.ndim() == 1 && b.size(0) == cout, "conv2d: bias shape mismatch");
    int oh = h + 2 * pad - kh + 1, ow = wd + 2 * pad - kw + 1;
    check(oh > 0 && ow > 0, "conv2d: kernel larger than padded input");
    if (g_mac_enabled)
        g_mac_count += static_cast<std::uint64_t>(cout) * cin * kh * kw * oh * ow;

    auto xi = [&](int c, int y, int xc) {
        return x.at((c * h + y) * wd + xc);
    };
    std::vector<double> out(static_cast<std::size_t>(cout) * oh * ow);
    for (int oc = 0; oc < cout; ++oc)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double s = b.at(oc);
                for (int ic = 0; ic < cin; ++ic)
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            int iy = oy + ky - pad, ix = ox + kx - pad;
                            if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                            s += xi(ic, iy, ix) * w.at(((oc * cin + ic) * kh + ky) * kw + kx);
                        }
                out[(static_cast<std::size_t>(oc) * oh + oy) * ow + ox] = s;
            }
    auto xnode = x.node(), wnode = w.node(), bnode = b.node();
    return make_result("conv2d", {cout, oh, ow}, std::move(out), {x, w, b},
                       [xnode, wnode, bnode, cin, h, wd, cout, kh, kw, oh, ow, pad](TensorNode* o) {
        for (int oc = 0; oc < cout; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double g = o->grad[(static_cast<std::size_t>(oc) * oh + oy) * ow + ox];
                    if (bnode->requires_grad) bnode->grad[oc] += g;
                    for (int ic = 0; ic < cin; ++ic)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                int iy = oy + ky - pad, ix = ox + kx - pad;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                                std::size_t xidx = (static_cast<std::size_t>(ic) * h + iy) * wd + ix;
                                std::size_t widx = ((static_cast<std::size_t>(oc) * cin + ic) * kh + ky) * kw + kx;
                                if (xnode->requires_grad)
                                    xnode->grad[xidx] += g * wnode->data[widx];
                                if (wnode->requires_grad)
                                    wnode->grad[widx] += g * xnode->data[xidx];
                            }
                }
    });
}

}  // namespace contrack
