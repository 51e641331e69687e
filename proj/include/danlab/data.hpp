#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "danlab/tensor.hpp"

namespace danlab {

using Rng = std::mt19937_64;

struct MixtureComponent {
    std::vector<double> mean;
    double variance = 1.0;  // isotropic, per coordinate
    double weight = 1.0;

    bool operator==(const MixtureComponent&) const = default;
};

/// Isotropic Gaussian mixture. Construct through make_mixture() or
/// ring_mixture() to get validated weights.
struct MixtureSpec {
    std::size_t dim = 0;
    std::vector<MixtureComponent> components;

    std::vector<double> weights() const;
    bool operator==(const MixtureSpec&) const = default;
};

/// Validates: non-empty, consistent dimensions, positive variances and
/// weights, weights summing to 1 within 1e-12.
void validate(const MixtureSpec& spec);
MixtureSpec make_mixture(std::vector<MixtureComponent> components);

struct NoiseSpec {
    std::size_t dim = 256;
    bool operator==(const NoiseSpec&) const = default;
};

/// K equally weighted components on a circle of the given radius.
MixtureSpec ring_mixture(std::size_t k, double radius, double variance);

struct LabeledSample {
    Tensor points;              // [B×n]
    std::vector<std::size_t> labels;  // component index per row; evaluation only
};

LabeledSample sample_mixture(const MixtureSpec& spec, std::size_t batch, Rng& rng);
/// i.i.d. uniform on [-1, 1]^m.
Tensor sample_noise(const NoiseSpec& spec, std::size_t batch, Rng& rng);

double density(const MixtureSpec& spec, std::span<const double> x);
/// d/dx of the density; 1-D mixtures only.
double density_derivative_1d(const MixtureSpec& spec, double x);

/// Independent generator derived from a master seed and a purpose tag.
Rng make_stream(std::uint64_t master_seed, std::uint64_t purpose);

namespace stream {
inline constexpr std::uint64_t init_generator = 1;
inline constexpr std::uint64_t init_discriminator = 2;
inline constexpr std::uint64_t init_adversary = 3;
inline constexpr std::uint64_t disc_data = 10;
inline constexpr std::uint64_t disc_noise = 11;
inline constexpr std::uint64_t adv_data = 12;
inline constexpr std::uint64_t adv_noise = 13;
inline constexpr std::uint64_t gen_data = 14;
inline constexpr std::uint64_t gen_noise = 15;
inline constexpr std::uint64_t eval = 20;
}  // namespace stream

}  // namespace danlab
