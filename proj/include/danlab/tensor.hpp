#pragma once

// Dense row-major float64 tensors with reverse-mode differentiation.
//
// A Tensor is a shared handle onto a graph node: copying a Tensor aliases the
// same storage (use clone() for an independent copy). Every operation on a
// tensor that requires grad records its inputs and a local backward rule;
// backward() replays those records in reverse creation order.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace danlab {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

namespace detail {
struct Node;
}

class Tensor {
public:
    Tensor();

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    /// Row-major 2-D literal: matrix({{1, 2}, {3, 4}}).
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                         bool requires_grad = false);

    const Shape& shape() const;
    std::size_t numel() const;
    std::size_t rows() const;  // extent of axis 0
    std::size_t cols() const;  // extent of axis 1 (1 for rank < 2)

    std::span<const double> data() const;
    /// Direct write access; intended for optimizers and loaders acting on leaves.
    std::span<double> mutable_data();
    double item() const;
    double at(std::size_t r, std::size_t c) const;

    bool requires_grad() const;
    void set_requires_grad(bool on);
    bool is_leaf() const;

    /// True once a backward pass has written into this tensor's gradient.
    bool has_grad() const;
    /// Gradient buffer (all zeros when nothing has been accumulated).
    std::span<const double> grad() const;
    void zero_grad();

    /// Same values, new leaf without history.
    Tensor detach() const;
    /// Independent deep copy of values (leaf, same requires_grad flag).
    Tensor clone() const;

    bool same_storage(const Tensor& other) const { return node_ == other.node_; }
    bool defined() const { return static_cast<bool>(node_); }

    // internal
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// Linear algebra
Tensor matmul(const Tensor& a, const Tensor& b);
/// x [B×n] + row [1×n], row broadcast down the batch (bias add).
Tensor add_rowwise(const Tensor& x, const Tensor& row);

// Elementwise. Binary ops accept identical shapes or a single-element operand.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double alpha);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
/// Subderivative 0 at exactly 0.
Tensor abs(const Tensor& a);
/// Natural log of max(a, 1e-12).
Tensor log(const Tensor& a);
/// Gradient passes only where lo <= a <= hi.
Tensor clamp(const Tensor& a, double lo, double hi);

// Reductions (axis 0 is the batch axis)
Tensor mean_over_batch(const Tensor& t);
Tensor sum(const Tensor& t);
/// Rows [begin, end) of a rank-2 tensor.
Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

/// Accumulates d(loss)/d(leaf) into every requires_grad leaf reachable from loss.
/// loss must hold exactly one element. Leaf gradients accumulate across calls.
void backward(const Tensor& loss);

/// Number of graph nodes reachable from t (including t).
std::size_t graph_size(const Tensor& t);

inline constexpr double kLogClamp = 1e-12;

}  // namespace danlab
