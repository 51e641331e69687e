#include "danlab/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <unordered_set>

#include "danlab/errors.hpp"

namespace danlab {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::none: return "none";
        case Activation::relu: return "relu";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
    }
    return "none";
}

Activation activation_from_string(const std::string& s) {
    if (s == "none") return Activation::none;
    if (s == "relu") return Activation::relu;
    if (s == "leaky_relu") return Activation::leaky_relu;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "tanh") return Activation::tanh;
    throw ValidationError("unknown activation '" + s + "'");
}

Tensor apply_activation(const Tensor& x, Activation a) {
    switch (a) {
        case Activation::none: return x;
        case Activation::relu: return relu(x);
        case Activation::leaky_relu: return leaky_relu(x, kLeakySlope);
        case Activation::sigmoid: return sigmoid(x);
        case Activation::tanh: return tanh(x);
    }
    return x;
}

// --- MlpNet ---------------------------------------------------------------------

MlpNet::MlpNet(std::vector<LinearLayer> layers, Activation hidden, Activation output)
    : layers_(std::move(layers)), hidden_(hidden), output_(output) {
    if (layers_.empty()) throw DimensionError("MlpNet: no layers");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        if (l.weight.shape().size() != 2 || l.bias.shape() != Shape{1, l.weight.cols()}) {
            throw DimensionError("MlpNet: layer " + std::to_string(i) + " has weight " +
                                 shape_str(l.weight.shape()) + " and bias " + shape_str(l.bias.shape()));
        }
        if (i > 0 && layers_[i - 1].out_features() != l.in_features()) {
            throw DimensionError("MlpNet: layer " + std::to_string(i) + " expects " +
                                 std::to_string(l.in_features()) + " inputs but previous layer emits " +
                                 std::to_string(layers_[i - 1].out_features()));
        }
    }
}

Tensor MlpNet::forward(const Tensor& x) const {
    if (x.shape().size() != 2 || x.cols() != in_features()) {
        throw DimensionError("MlpNet::forward: input " + shape_str(x.shape()) + " does not match width " +
                             std::to_string(in_features()));
    }
    Tensor h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        h = add_rowwise(matmul(h, layers_[i].weight), layers_[i].bias);
        h = apply_activation(h, i + 1 == layers_.size() ? output_ : hidden_);
    }
    return h;
}

std::vector<std::size_t> MlpNet::dims() const {
    std::vector<std::size_t> d;
    if (layers_.empty()) return d;
    d.push_back(layers_.front().in_features());
    for (const auto& l : layers_) d.push_back(l.out_features());
    return d;
}

std::size_t MlpNet::in_features() const { return layers_.empty() ? 0 : layers_.front().in_features(); }
std::size_t MlpNet::out_features() const { return layers_.empty() ? 0 : layers_.back().out_features(); }

MlpNet MlpNet::clone() const {
    std::vector<LinearLayer> copy;
    copy.reserve(layers_.size());
    for (const auto& l : layers_) copy.push_back({l.weight.clone(), l.bias.clone()});
    return MlpNet(std::move(copy), hidden_, output_);
}

void MlpNet::register_params(ParamStore& store, const std::string& prefix) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        store.add(prefix + "." + std::to_string(i) + ".weight", layers_[i].weight);
        store.add(prefix + "." + std::to_string(i) + ".bias", layers_[i].bias);
    }
}

MlpNet init_mlp(std::span<const std::size_t> dims, Activation hidden, Activation output, std::uint64_t seed) {
    if (dims.size() < 2) throw DimensionError("init_mlp: need at least input and output extents");
    for (auto d : dims) {
        if (d == 0) throw DimensionError("init_mlp: extents must be positive");
    }
    std::mt19937_64 rng(seed);
    std::vector<LinearLayer> layers;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const std::size_t in = dims[i], out = dims[i + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> u(-limit, limit);
        std::vector<double> w(in * out);
        for (auto& x : w) x = u(rng);
        layers.push_back({Tensor::from({in, out}, std::move(w), true), Tensor::zeros({1, out}, true)});
    }
    return MlpNet(std::move(layers), hidden, output);
}

// --- ParamStore -------------------------------------------------------------------

void ParamStore::add(std::string name, Tensor t) {
    for (const auto& e : entries_) {
        if (e.name == name) throw ContractError("ParamStore: duplicate parameter name '" + name + "'");
    }
    entries_.push_back({std::move(name), std::move(t)});
}

void ParamStore::merge(const ParamStore& other) {
    for (const auto& e : other.entries_) add(e.name, e.tensor);
}

const Tensor& ParamStore::at(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return e.tensor;
    }
    throw ContractError("ParamStore: no parameter named '" + name + "'");
}

std::size_t ParamStore::total_numel() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.numel();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
}

std::vector<double> ParamStore::flat_values() const {
    std::vector<double> out;
    out.reserve(total_numel());
    for (const auto& e : entries_) out.insert(out.end(), e.tensor.data().begin(), e.tensor.data().end());
    return out;
}

std::vector<double> ParamStore::flat_grads() const {
    std::vector<double> out;
    out.reserve(total_numel());
    for (const auto& e : entries_) out.insert(out.end(), e.tensor.grad().begin(), e.tensor.grad().end());
    return out;
}

void ParamStore::set_flat_values(std::span<const double> values) {
    if (values.size() != total_numel()) {
        throw DimensionError("ParamStore::set_flat_values: expected " + std::to_string(total_numel()) +
                             " values, got " + std::to_string(values.size()));
    }
    std::size_t off = 0;
    for (auto& e : entries_) {
        auto dst = e.tensor.mutable_data();
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(off), dst.size(), dst.begin());
        off += dst.size();
    }
}

// --- Adam ----------------------------------------------------------------------

AdamState::AdamState(const ParamStore& store, AdamSettings s) : settings(s) {
    for (const auto& e : store.entries()) {
        m.emplace_back(e.tensor.numel(), 0.0);
        v.emplace_back(e.tensor.numel(), 0.0);
    }
}

void adam_step(ParamStore& store, AdamState& state) {
    if (state.m.size() != store.size()) {
        throw ContractError("adam_step: optimizer state tracks " + std::to_string(state.m.size()) +
                            " parameters, store has " + std::to_string(store.size()));
    }
    for (const auto& e : store.entries()) {
        if (!e.tensor.has_grad()) throw ContractError("adam_step: parameter '" + e.name + "' has no gradient");
    }
    const auto& s = state.settings;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(s.beta1, t);
    const double c2 = 1.0 - std::pow(s.beta2, t);
    std::size_t idx = 0;
    for (const auto& e : store.entries()) {
        Tensor p = e.tensor;
        auto g = p.grad();
        auto w = p.mutable_data();
        auto& m = state.m[idx];
        auto& v = state.v[idx];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
            v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            w[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
        }
        p.zero_grad();
        ++idx;
    }
}

// --- checkpoints ----------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'D', 'A', 'N', 'L', 'A', 'B', 'C', 'K'};

template <class T>
T to_le(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    }
    return v;
}

template <class T>
void put(std::ostream& os, T v) {
    v = to_le(v);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::filesystem::path& path) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        throw LoadError("checkpoint " + path.string() + ": truncated");
    }
    return to_le(v);
}

void put_string(std::ostream& os, const std::string& s) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is, const std::filesystem::path& path) {
    auto n = get<std::uint32_t>(is, path);
    if (n > (1u << 20)) throw LoadError("checkpoint " + path.string() + ": implausible string length");
    std::string s(n, '\0');
    if (!is.read(s.data(), n)) throw LoadError("checkpoint " + path.string() + ": truncated");
    return s;
}

}  // namespace

Checkpoint make_checkpoint(const ParamStore& store, std::uint64_t seed, std::string network) {
    Checkpoint ck;
    ck.seed = seed;
    ck.network = std::move(network);
    for (const auto& e : store.entries()) {
        ck.params.push_back({e.name, e.tensor.shape(), {e.tensor.data().begin(), e.tensor.data().end()}});
    }
    return ck;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, ck.version);
    put<std::uint64_t>(os, ck.seed);
    put_string(os, ck.network);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(ck.params.size()));
    for (const auto& p : ck.params) {
        put_string(os, p.name);
        put<std::uint32_t>(os, static_cast<std::uint32_t>(p.shape.size()));
        for (auto e : p.shape) put<std::uint64_t>(os, e);
        for (double v : p.values) put<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
    }
    if (!os) throw IoError("write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("cannot open checkpoint " + path.string());
    char magic[8];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw LoadError(path.string() + " is not a checkpoint file");
    }
    Checkpoint ck;
    ck.version = get<std::uint32_t>(is, path);
    if (ck.version != kCheckpointVersion) {
        throw LoadError("checkpoint " + path.string() + ": unsupported format version " +
                        std::to_string(ck.version));
    }
    ck.seed = get<std::uint64_t>(is, path);
    ck.network = get_string(is, path);
    auto count = get<std::uint32_t>(is, path);
    for (std::uint32_t i = 0; i < count; ++i) {
        Checkpoint::Param p;
        p.name = get_string(is, path);
        auto rank = get<std::uint32_t>(is, path);
        if (rank > 8) throw LoadError("checkpoint " + path.string() + ": implausible rank");
        for (std::uint32_t r = 0; r < rank; ++r) p.shape.push_back(get<std::uint64_t>(is, path));
        p.values.resize(shape_numel(p.shape));
        for (auto& v : p.values) v = std::bit_cast<double>(get<std::uint64_t>(is, path));
        ck.params.push_back(std::move(p));
    }
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store, std::uint64_t seed,
                     const std::string& network) {
    write_checkpoint(path, make_checkpoint(store, seed, network));
}

void load_into(ParamStore& store, const Checkpoint& ck) {
    if (ck.params.size() != store.size()) {
        throw LoadError("checkpoint '" + ck.network + "' holds " + std::to_string(ck.params.size()) +
                        " parameters, network expects " + std::to_string(store.size()));
    }
    for (std::size_t i = 0; i < ck.params.size(); ++i) {
        const auto& src = ck.params[i];
        const auto& dst = store.entries()[i];
        if (src.name != dst.name || src.shape != dst.tensor.shape()) {
            throw LoadError("checkpoint parameter " + src.name + " " + shape_str(src.shape) +
                            " does not match network parameter " + dst.name + " " +
                            shape_str(dst.tensor.shape()));
        }
    }
    for (std::size_t i = 0; i < ck.params.size(); ++i) {
        Tensor t = store.entries()[i].tensor;
        std::copy(ck.params[i].values.begin(), ck.params[i].values.end(), t.mutable_data().begin());
    }
}

}  // namespace danlab
