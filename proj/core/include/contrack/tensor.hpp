#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace contrack {

using Shape = std::vector<int>;

[[noreturn]] void fail(const std::string& msg);
void check(bool cond, const std::string& msg);

int numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized lazily on first accumulation
    bool requires_grad = false;
};

/// Dense row-major tensor. Value-semantic handle to a shared node so that
/// gradients written during the backward pass are visible through every
/// copy of the handle.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);
    static Tensor eye(int n);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int ndim() const { return static_cast<int>(node_->shape.size()); }
    int size(int axis) const { return node_->shape[axis]; }
    int numel() const { return static_cast<int>(node_->data.size()); }

    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }
    double value() const;  // scalar tensors only

    double at(int i) const { return node_->data[i]; }
    double at(int r, int c) const;
    double& mut(int i) { return node_->data[i]; }
    double& mut(int r, int c);

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool v);
    /// Gradient buffer; zeros if backward has not touched this tensor yet.
    const std::vector<double>& grad() const;
    void zero_grad();

    TensorNode* node() const { return node_.get(); }
    std::shared_ptr<TensorNode> shared_node() const { return node_; }

    /// Same data, detached from any tape (no grad flow).
    Tensor detach() const;

private:
    std::shared_ptr<TensorNode> node_;
};

/// Records the forward DAG; backward() replays it in reverse. One tape per
/// thread may be active at a time; nesting restores the previous tape.
class GradTape {
public:
    GradTape();
    ~GradTape();
    GradTape(const GradTape&) = delete;
    GradTape& operator=(const GradTape&) = delete;

    static GradTape* active();

    void record(std::function<void()> backward_step);
    std::size_t num_ops() const { return ops_.size(); }

    /// Seeds d(loss)/d(loss) = 1 and accumulates into every requires_grad
    /// leaf reachable from it. A tape may only be consumed once.
    void backward(const Tensor& loss);

private:
    std::vector<std::function<void()>> ops_;
    bool consumed_ = false;
    GradTape* prev_ = nullptr;
};

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor exp_(const Tensor& a);
Tensor log_(const Tensor& a);
Tensor sqrt_(const Tensor& a);
Tensor pow_scalar(const Tensor& a, double p);
Tensor sigmoid(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor clamp(const Tensor& a, double lo, double hi);

/// b is a length-n row vector added to every row of a [m,n].
Tensor add_rowvec(const Tensor& a, const Tensor& b);

// ---- linear algebra / shape ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);  // 2D
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);  // 1D or 2D
Tensor slice_cols(const Tensor& a, int start, int len);
Tensor gather_rows(const Tensor& a, const std::vector<int>& indices);
/// Places row i of src at row indices[i] of a zero [out_rows, d] tensor.
Tensor scatter_rows(const Tensor& src, const std::vector<int>& indices, int out_rows);

// ---- reductions & nn ----
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-6);
/// 2D cross-correlation with zero padding. x [Cin,H,W], w [Cout,Cin,kh,kw], b [Cout].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int pad);

void backward(const Tensor& loss);

// ---- MAC instrumentation (matmul and conv2d only) ----
void mac_counter_reset();
void mac_counter_enable(bool on);
std::uint64_t mac_counter_value();

}  // namespace contrack
