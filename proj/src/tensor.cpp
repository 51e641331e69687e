#include "danlab/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include <Eigen/Core>

#include "danlab/errors.hpp"

namespace danlab {

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    bool grad_written = false;
    std::vector<std::shared_ptr<Node>> inputs;
    // Pushes this node's grad into its inputs' grads.
    std::function<void(Node&)> backward_fn;
    std::uint64_t seq = 0;
    const char* op = "leaf";

    std::vector<double>& grad_buffer() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        return grad;
    }
};

}  // namespace detail

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

namespace {

std::atomic<std::uint64_t> g_seq{1};
thread_local bool t_grad_enabled = true;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const RowMat>;
using MMap = Eigen::Map<RowMat>;

NodePtr make_node(Shape shape, std::vector<double> value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->seq = g_seq.fetch_add(1, std::memory_order_relaxed);
    return n;
}

void check_finite(const Node& n) {
    for (double v : n.value) {
        if (!std::isfinite(v)) {
            throw NonFiniteError(std::string("non-finite value produced by ") + n.op);
        }
    }
}

// Creates the result node of an op; history is attached only when an input
// requires grad and recording is enabled.
Tensor finish(const char* op, Shape shape, std::vector<double> value,
              std::vector<NodePtr> inputs, std::function<void(Node&)> backward_fn) {
    bool track = t_grad_enabled &&
                 std::any_of(inputs.begin(), inputs.end(),
                             [](const NodePtr& p) { return p->requires_grad; });
    auto n = make_node(std::move(shape), std::move(value), track);
    n->op = op;
    check_finite(*n);
    if (track) {
        n->inputs = std::move(inputs);
        n->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(n));
}

void require_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

void require_rank2(const Tensor& t, const char* op) {
    require_defined(t, op);
    if (t.shape().size() != 2) {
        throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " +
                             shape_str(t.shape()));
    }
}

enum class Bcast { same, left_scalar, right_scalar };

Bcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
    require_defined(a, op);
    require_defined(b, op);
    if (a.shape() == b.shape()) return Bcast::same;
    if (a.numel() == 1) return Bcast::left_scalar;
    if (b.numel() == 1) return Bcast::right_scalar;
    throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
}

template <class F, class DA, class DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
    Bcast kind = broadcast_kind(a, b, op);
    const Shape& out_shape = kind == Bcast::left_scalar ? b.shape() : a.shape();
    std::size_t n = shape_numel(out_shape);
    auto av = a.data();
    auto bv = b.data();
    auto ai = [&](std::size_t i) { return kind == Bcast::left_scalar ? av[0] : av[i]; };
    auto bi = [&](std::size_t i) { return kind == Bcast::right_scalar ? bv[0] : bv[i]; };
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = f(ai(i), bi(i));

    NodePtr an = a.node(), bn = b.node();
    return finish(op, out_shape, std::move(out), {an, bn}, [an, bn, kind, da, db](Node& self) {
        const std::size_t n = self.value.size();
        auto x = [&](std::size_t i) { return kind == Bcast::left_scalar ? an->value[0] : an->value[i]; };
        auto y = [&](std::size_t i) { return kind == Bcast::right_scalar ? bn->value[0] : bn->value[i]; };
        if (an->requires_grad) {
            auto& g = an->grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                g[kind == Bcast::left_scalar ? 0 : i] += self.grad[i] * da(x(i), y(i));
            }
            an->grad_written = true;
        }
        if (bn->requires_grad) {
            auto& g = bn->grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                g[kind == Bcast::right_scalar ? 0 : i] += self.grad[i] * db(x(i), y(i));
            }
            bn->grad_written = true;
        }
    });
}

// f: value map; df(x, y) -> local derivative given input x and output y.
template <class F, class DF>
Tensor unary(const char* op, const Tensor& a, F f, DF df) {
    require_defined(a, op);
    auto av = a.data();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
    NodePtr an = a.node();
    return finish(op, a.shape(), std::move(out), {an}, [an, df](Node& self) {
        auto& g = an->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i] * df(an->value[i], self.value[i]);
        }
        an->grad_written = true;
    });
}

double stable_sigmoid(double x) {
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

// --- Tensor -----------------------------------------------------------------

Tensor::Tensor() = default;

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return Tensor(make_node(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw DimensionError("Tensor::from: shape " + shape_str(shape) + " needs " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(values.size()));
    }
    for (double v : values) {
        if (!std::isfinite(v)) throw NonFiniteError("Tensor::from: non-finite input value");
    }
    return Tensor(make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1, 1}, {v}, requires_grad); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
    std::size_t r = rows.size();
    std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> v;
    v.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("Tensor::matrix: ragged rows");
        v.insert(v.end(), row.begin(), row.end());
    }
    return from({r, c}, std::move(v), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }
std::size_t Tensor::rows() const { return node_->shape.empty() ? 1 : node_->shape[0]; }
std::size_t Tensor::cols() const { return node_->shape.size() < 2 ? 1 : node_->shape[1]; }
std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::mutable_data() { return node_->value; }

double Tensor::item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool on) { node_->requires_grad = on; }
bool Tensor::is_leaf() const { return !node_->backward_fn; }
bool Tensor::has_grad() const { return node_->grad_written; }

std::span<const double> Tensor::grad() const { return node_->grad_buffer(); }

void Tensor::zero_grad() {
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
    node_->grad_written = false;
}

Tensor Tensor::detach() const { return Tensor(make_node(shape(), node_->value, false)); }

Tensor Tensor::clone() const { return Tensor(make_node(shape(), node_->value, node_->requires_grad)); }

// --- grad mode ----------------------------------------------------------------

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

// --- ops ------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) {
        throw DimensionError("matmul: inner extents disagree for " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    }
    std::vector<double> out(m * n);
    MMap(out.data(), m, n).noalias() = CMap(a.data().data(), m, k) * CMap(b.data().data(), k, n);

    NodePtr an = a.node(), bn = b.node();
    return finish("matmul", {m, n}, std::move(out), {an, bn}, [an, bn, m, k, n](Node& self) {
        CMap g(self.grad.data(), m, n);
        if (an->requires_grad) {
            MMap(an->grad_buffer().data(), m, k).noalias() += g * CMap(bn->value.data(), k, n).transpose();
            an->grad_written = true;
        }
        if (bn->requires_grad) {
            MMap(bn->grad_buffer().data(), k, n).noalias() += CMap(an->value.data(), m, k).transpose() * g;
            bn->grad_written = true;
        }
    });
}

Tensor add_rowwise(const Tensor& x, const Tensor& row) {
    require_rank2(x, "add_rowwise");
    require_rank2(row, "add_rowwise");
    const std::size_t b = x.rows(), n = x.cols();
    if (row.rows() != 1 || row.cols() != n) {
        throw DimensionError("add_rowwise: cannot add " + shape_str(row.shape()) + " to rows of " +
                             shape_str(x.shape()));
    }
    std::vector<double> out(x.data().begin(), x.data().end());
    auto rv = row.data();
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += rv[j];

    NodePtr xn = x.node(), rn = row.node();
    return finish("add_rowwise", x.shape(), std::move(out), {xn, rn}, [xn, rn, b, n](Node& self) {
        if (xn->requires_grad) {
            auto& g = xn->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            xn->grad_written = true;
        }
        if (rn->requires_grad) {
            auto& g = rn->grad_buffer();
            for (std::size_t i = 0; i < b; ++i)
                for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
            rn->grad_written = true;
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
    return unary(
        "scale", a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor neg(const Tensor& a) {
    return unary(
        "neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor relu(const Tensor& a) {
    return unary(
        "relu", a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double alpha) {
    return unary(
        "leaky_relu", a, [alpha](double x) { return x > 0 ? x : alpha * x; },
        [alpha](double x, double) { return x > 0 ? 1.0 : alpha; });
}

Tensor sigmoid(const Tensor& a) {
    return unary("sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
    return unary(
        "tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor abs(const Tensor& a) {
    return unary(
        "abs", a, [](double x) { return std::fabs(x); },
        [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor log(const Tensor& a) {
    return unary(
        "log", a, [](double x) { return std::log(std::max(x, kLogClamp)); },
        [](double x, double) { return x >= kLogClamp ? 1.0 / x : 0.0; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (!(lo <= hi)) throw ContractError("clamp: lo > hi");
    return unary(
        "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
        [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor mean_over_batch(const Tensor& t) {
    require_rank2(t, "mean_over_batch");
    const std::size_t b = t.rows(), d = t.cols();
    if (b == 0) throw EmptyInputError("mean_over_batch: empty batch " + shape_str(t.shape()));
    std::vector<double> out(d, 0.0);
    auto v = t.data();
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < d; ++j) out[j] += v[i * d + j];
    const double inv = 1.0 / static_cast<double>(b);
    for (auto& o : out) o *= inv;

    NodePtr tn = t.node();
    return finish("mean_over_batch", {1, d}, std::move(out), {tn}, [tn, b, d, inv](Node& self) {
        auto& g = tn->grad_buffer();
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < d; ++j) g[i * d + j] += self.grad[j] * inv;
        tn->grad_written = true;
    });
}

Tensor sum(const Tensor& t) {
    require_defined(t, "sum");
    double s = 0.0;
    for (double v : t.data()) s += v;
    NodePtr tn = t.node();
    return finish("sum", {1, 1}, {s}, {tn}, [tn](Node& self) {
        auto& g = tn->grad_buffer();
        for (auto& x : g) x += self.grad[0];
        tn->grad_written = true;
    });
}

Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end) {
    require_rank2(t, "slice_rows");
    if (begin > end || end > t.rows()) {
        throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                             ") out of bounds for " + shape_str(t.shape()));
    }
    const std::size_t d = t.cols();
    auto v = t.data();
    std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(begin * d),
                            v.begin() + static_cast<std::ptrdiff_t>(end * d));
    NodePtr tn = t.node();
    return finish("slice_rows", {end - begin, d}, std::move(out), {tn}, [tn, begin, d](Node& self) {
        auto& g = tn->grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * d + i] += self.grad[i];
        tn->grad_written = true;
    });
}

// --- backward -------------------------------------------------------------------

namespace {

// Nodes reachable from root through recorded history, newest first. Sequence
// numbers grow with creation, so descending order is a reverse topological order.
std::vector<Node*> reverse_tape(const NodePtr& root) {
    std::vector<Node*> order;
    std::vector<Node*> stack{root.get()};
    std::unordered_set<const Node*> seen{root.get()};
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& in : n->inputs) {
            if (seen.insert(in.get()).second) stack.push_back(in.get());
        }
    }
    std::sort(order.begin(), order.end(), [](const Node* a, const Node* b) { return a->seq > b->seq; });
    return order;
}

}  // namespace

void backward(const Tensor& loss) {
    require_defined(loss, "backward");
    if (loss.numel() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
    }
    const NodePtr& root = loss.node();
    if (!root->requires_grad) return;

    auto order = reverse_tape(root);
    // Interior gradients are per-pass scratch; leaves accumulate.
    for (Node* n : order) {
        if (n->backward_fn) n->grad.assign(n->value.size(), 0.0);
    }
    root->grad_buffer()[0] += 1.0;
    root->grad_written = true;
    for (Node* n : order) {
        if (n->backward_fn) n->backward_fn(*n);
    }
    for (Node* n : order) {
        if (n->backward_fn) {
            n->grad.clear();
            n->grad.shrink_to_fit();
            n->grad_written = false;
        }
    }
}

std::size_t graph_size(const Tensor& t) {
    require_defined(t, "graph_size");
    return reverse_tape(t.node()).size();
}

}  // namespace danlab
