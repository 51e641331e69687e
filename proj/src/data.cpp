#include "danlab/data.hpp"

#include <cmath>
#include <numbers>

#include "danlab/errors.hpp"

namespace danlab {

std::vector<double> MixtureSpec::weights() const {
    std::vector<double> w;
    w.reserve(components.size());
    for (const auto& c : components) w.push_back(c.weight);
    return w;
}

void validate(const MixtureSpec& spec) {
    if (spec.components.empty()) throw ValidationError("mixture: no components");
    if (spec.dim == 0) throw ValidationError("mixture: dimension must be positive");
    double total = 0.0;
    for (std::size_t j = 0; j < spec.components.size(); ++j) {
        const auto& c = spec.components[j];
        const std::string where = "mixture component " + std::to_string(j);
        if (c.mean.size() != spec.dim) {
            throw ValidationError(where + ": mean has dimension " + std::to_string(c.mean.size()) +
                                  ", expected " + std::to_string(spec.dim));
        }
        for (double m : c.mean) {
            if (!std::isfinite(m)) throw ValidationError(where + ": non-finite mean");
        }
        if (!(c.variance > 0) || !std::isfinite(c.variance)) throw ValidationError(where + ": variance must be > 0");
        if (!(c.weight > 0) || !std::isfinite(c.weight)) throw ValidationError(where + ": weight must be > 0");
        total += c.weight;
    }
    if (std::fabs(total - 1.0) > 1e-12) {
        throw ValidationError("mixture: weights sum to " + std::to_string(total) + ", expected 1");
    }
}

MixtureSpec make_mixture(std::vector<MixtureComponent> components) {
    MixtureSpec spec;
    spec.dim = components.empty() ? 0 : components.front().mean.size();
    spec.components = std::move(components);
    validate(spec);
    return spec;
}

MixtureSpec ring_mixture(std::size_t k, double radius, double variance) {
    if (k == 0) throw ValidationError("ring_mixture: K must be >= 1");
    if (!(radius >= 0)) throw ValidationError("ring_mixture: radius must be >= 0");
    if (!(variance > 0)) throw ValidationError("ring_mixture: variance must be > 0");
    std::vector<MixtureComponent> comps;
    const double w = 1.0 / static_cast<double>(k);
    for (std::size_t j = 0; j < k; ++j) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(k);
        comps.push_back({{radius * std::cos(angle), radius * std::sin(angle)}, variance, w});
    }
    // Equal weights of 1/K can miss 1 by a few ulps; renormalize the last one.
    double partial = 0.0;
    for (std::size_t j = 0; j + 1 < k; ++j) partial += comps[j].weight;
    comps.back().weight = 1.0 - partial;
    return make_mixture(std::move(comps));
}

LabeledSample sample_mixture(const MixtureSpec& spec, std::size_t batch, Rng& rng) {
    if (batch == 0) throw EmptyInputError("sample_mixture: batch size must be >= 1");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> pts(batch * spec.dim);
    std::vector<std::size_t> labels(batch);
    const auto w = spec.weights();
    std::discrete_distribution<std::size_t> choose(w.begin(), w.end());
    for (std::size_t i = 0; i < batch; ++i) {
        const std::size_t j = choose(rng);
        labels[i] = j;
        const auto& c = spec.components[j];
        const double sd = std::sqrt(c.variance);
        for (std::size_t d = 0; d < spec.dim; ++d) pts[i * spec.dim + d] = c.mean[d] + sd * normal(rng);
    }
    return {Tensor::from({batch, spec.dim}, std::move(pts)), std::move(labels)};
}

Tensor sample_noise(const NoiseSpec& spec, std::size_t batch, Rng& rng) {
    if (batch == 0) throw EmptyInputError("sample_noise: batch size must be >= 1");
    if (spec.dim == 0) throw ValidationError("sample_noise: dimension must be >= 1");
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> z(batch * spec.dim);
    for (auto& x : z) x = u(rng);
    return Tensor::from({batch, spec.dim}, std::move(z));
}

namespace {

double component_density(const MixtureComponent& c, std::span<const double> x) {
    double sq = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double diff = x[d] - c.mean[d];
        sq += diff * diff;
    }
    const double norm = std::pow(2.0 * std::numbers::pi * c.variance, -0.5 * static_cast<double>(x.size()));
    return norm * std::exp(-0.5 * sq / c.variance);
}

}  // namespace

double density(const MixtureSpec& spec, std::span<const double> x) {
    if (x.size() != spec.dim) {
        throw DimensionError("density: point has dimension " + std::to_string(x.size()) + ", mixture has " +
                             std::to_string(spec.dim));
    }
    double p = 0.0;
    for (const auto& c : spec.components) p += c.weight * component_density(c, x);
    return p;
}

double density_derivative_1d(const MixtureSpec& spec, double x) {
    if (spec.dim != 1) throw DimensionError("density_derivative_1d: mixture is not 1-D");
    double dp = 0.0;
    const double pt[1] = {x};
    for (const auto& c : spec.components) {
        dp += c.weight * component_density(c, pt) * (-(x - c.mean[0]) / c.variance);
    }
    return dp;
}

Rng make_stream(std::uint64_t master_seed, std::uint64_t purpose) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(purpose >> 32)};
    return Rng(seq);
}

}  // namespace danlab
