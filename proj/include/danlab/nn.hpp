#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "danlab/tensor.hpp"

namespace danlab {

enum class Activation { none, relu, leaky_relu, sigmoid, tanh };

inline constexpr double kLeakySlope = 0.2;

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);
Tensor apply_activation(const Tensor& x, Activation a);

struct LinearLayer {
    Tensor weight;  // [in×out]
    Tensor bias;    // [1×out]

    std::size_t in_features() const { return weight.rows(); }
    std::size_t out_features() const { return weight.cols(); }
};

class ParamStore;

/// Feed-forward stack of affine layers. hidden activation after every layer
/// but the last, output activation after the last.
///
/// Copies share parameter storage; use clone() for an independent network.
class MlpNet {
public:
    MlpNet() = default;
    MlpNet(std::vector<LinearLayer> layers, Activation hidden, Activation output);

    Tensor forward(const Tensor& x) const;

    std::vector<std::size_t> dims() const;
    std::size_t in_features() const;
    std::size_t out_features() const;
    Activation hidden_activation() const { return hidden_; }
    Activation output_activation() const { return output_; }
    const std::vector<LinearLayer>& layers() const { return layers_; }
    std::vector<LinearLayer>& layers() { return layers_; }

    MlpNet clone() const;
    /// Appends "<prefix>.<i>.weight" / "<prefix>.<i>.bias" for each layer.
    void register_params(ParamStore& store, const std::string& prefix) const;

private:
    std::vector<LinearLayer> layers_;
    Activation hidden_ = Activation::relu;
    Activation output_ = Activation::none;
};

/// Uniform fan-average init in ±sqrt(6/(fan_in+fan_out)), zero biases.
MlpNet init_mlp(std::span<const std::size_t> dims, Activation hidden, Activation output, std::uint64_t seed);

/// Named, ordered handles onto parameter tensors.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
    };

    void add(std::string name, Tensor t);
    void merge(const ParamStore& other);

    std::size_t size() const { return entries_.size(); }
    const std::vector<Entry>& entries() const { return entries_; }
    const Tensor& at(const std::string& name) const;
    std::size_t total_numel() const;

    void zero_grad();
    /// Flattened copy of all values (entry order).
    std::vector<double> flat_values() const;
    /// Flattened copy of all gradients (zeros where absent).
    std::vector<double> flat_grads() const;
    void set_flat_values(std::span<const double> values);

private:
    std::vector<Entry> entries_;
};

struct AdamSettings {
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;

    bool operator==(const AdamSettings&) const = default;
};

struct AdamState {
    AdamSettings settings;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::int64_t step = 0;

    AdamState() = default;
    AdamState(const ParamStore& store, AdamSettings s);
};

/// One bias-corrected Adam update of every parameter in store, then zeroes grads.
/// Descends: callers maximizing an objective pass its negation to backward().
void adam_step(ParamStore& store, AdamState& state);

// Checkpoint container: "DANLABCK" magic, u32 format version, u64 seed,
// network name, u32 entry count; then per entry name, u32 rank, u64 extents,
// float64 little-endian values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::uint64_t seed = 0;
    std::string network;
    struct Param {
        std::string name;
        Shape shape;
        std::vector<double> values;
    };
    std::vector<Param> params;
};

Checkpoint make_checkpoint(const ParamStore& store, std::uint64_t seed, std::string network);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::filesystem::path& path);
void save_checkpoint(const std::filesystem::path& path, const ParamStore& store, std::uint64_t seed,
                     const std::string& network);
/// Copies values into store; names, order and shapes must match exactly.
void load_into(ParamStore& store, const Checkpoint& ck);

}  // namespace danlab
