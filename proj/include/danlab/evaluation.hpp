#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "danlab/data.hpp"

namespace danlab {

inline constexpr std::ptrdiff_t kUnassigned = -1;

/// Nearest component mean (lowest index on ties) when within
/// capture_radius_sigmas standard deviations of it, else kUnassigned.
std::vector<std::ptrdiff_t> assign_modes(const Tensor& points, const MixtureSpec& spec,
                                         double capture_radius_sigmas);

struct EvalThresholds {
    double capture_radius_sigmas = 3.0;
    double capture_min_frac = 0.02;  // of assigned points

    bool operator==(const EvalThresholds&) const = default;
};

struct EvalReport {
    std::size_t n_samples = 0;
    std::size_t modes_captured = 0;
    std::vector<std::size_t> histogram;  // assigned points per mode
    double entropy = 0.0;                // nats, over assigned frequencies
    double tv_to_target = 0.0;
    double hq_fraction = 0.0;
    double mmd2 = 0.0;
    bool no_assigned = false;  // p-hat taken as all zeros
};

/// Entropy (nats) of a normalized histogram, 0·log 0 := 0.
double entropy_of(std::span<const double> freqs);
double total_variation(std::span<const double> p, std::span<const double> q);

/// Mode statistics only; mmd2 left at 0.
EvalReport evaluate(const Tensor& points, const MixtureSpec& spec, std::span<const double> target_weights,
                    const EvalThresholds& thresholds = {});

/// Biased (V-statistic) MMD^2 with kernel exp(-|u-v|^2 / (2 bandwidth^2)), clamped at 0.
double mmd2_rbf(const Tensor& a, const Tensor& b, double bandwidth);

/// Median pairwise Euclidean distance among the first max_points rows.
double median_heuristic_bandwidth(const Tensor& sample, std::size_t max_points = 1000);

struct EvalRow {
    std::string run_id;
    std::uint64_t seed = 0;
    std::int64_t iteration = 0;
    EvalReport report;
};

std::string eval_csv_header();
std::string eval_csv_row(const EvalRow& row);

}  // namespace danlab
