#pragma once

// Limiting-discriminator weighting study for 1-D mixtures, and the per-point
// vs shared-factor decomposition of generator gradients.

#include <filesystem>
#include <span>
#include <vector>

#include "danlab/adversaries.hpp"
#include "danlab/data.hpp"

namespace danlab {

struct DStar {
    double value = 0.5;
    bool degenerate = false;  // both densities below kDensityFloor
};

inline constexpr double kDensityFloor = 1e-300;

/// D*(x) = p_x / (p_x + p_g) from already-evaluated (possibly unnormalized) densities.
DStar optimal_discriminator_from_densities(double px, double pg);
DStar optimal_discriminator(const MixtureSpec& px, const MixtureSpec& pg, double x);

struct WeightingCurve {
    std::vector<double> grid;
    std::vector<double> p_x;
    std::vector<double> p_g;
    std::vector<double> d_star;
    std::vector<double> d_star_prime;
    std::vector<double> weight;  // d_star_prime / d_star
    std::vector<bool> degenerate;
};

/// Analytic D* and dD*/dx over a sorted 1-D grid.
WeightingCurve weighting_curve(const MixtureSpec& px, const MixtureSpec& pg, std::span<const double> grid);

std::vector<double> linspace(double lo, double hi, std::size_t n);

/// max |weight| within ±3σ of the missing mode versus the interval from the
/// covered mode's mean to the midpoint between the two means.
struct RegionSummary {
    double missing_max_abs_weight = 0.0;
    double approach_max_abs_weight = 0.0;
    double ratio = 0.0;
};

RegionSummary region_maxima(const WeightingCurve& curve, const MixtureComponent& covered,
                            const MixtureComponent& missing);

/// CSV columns x,p_x,p_g,d_star,d_star_prime,weight; optional summary as a trailing comment line.
void write_curve_csv(const std::filesystem::path& path, const WeightingCurve& curve, const RegionSummary* summary);

enum class DecompositionMode { pointwise, sample_classifier };

struct GradientDecomposition {
    /// pointwise: (1/D(x_i)) dD/dx at each point, B×n row-major.
    /// sample_classifier: the shared factor (1/psi(eta_B)) dpsi/deta, length d_enc.
    std::vector<double> weights;
    /// Contribution of each point to the generator gradient (flattened params).
    std::vector<std::vector<double>> per_point;
    std::vector<double> reconstructed;  // sum of per_point
    std::vector<double> autodiff;       // gradient of the full loss by backward()
};

/// Generator objective being differentiated, in ascent form:
/// pointwise -> (1/B) sum_i log D(G(z_i)); sample_classifier -> log psi_S(eta(G(Z))).
GradientDecomposition batch_gradient_decomposition(const GeneratorNet& generator,
                                                   const PointwiseDiscriminator& discriminator, const Tensor& z);
GradientDecomposition batch_gradient_decomposition(const GeneratorNet& generator, const SampleClassifier& adversary,
                                                   const Tensor& z);

}  // namespace danlab
