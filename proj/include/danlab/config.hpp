#pragma once

// Experiment, analysis and sweep configuration files.
//
// Files are JSON objects carrying a "schema" field ("danlab/experiment@1",
// "danlab/analysis@1", "danlab/sweep@1"). Unknown keys are rejected and every
// problem found is reported in one ValidationError, one line per field.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "danlab/evaluation.hpp"
#include "danlab/training.hpp"

namespace danlab {

inline constexpr const char* kExperimentSchema = "danlab/experiment@1";
inline constexpr const char* kAnalysisSchema = "danlab/analysis@1";
inline constexpr const char* kSweepSchema = "danlab/sweep@1";

struct EvalSettings {
    EvalThresholds thresholds{};
    std::size_t n_samples = 10000;
    std::size_t mmd_samples = 2000;
    double mmd_bandwidth = 0.0;  // 0 selects the median heuristic on the real sample

    bool operator==(const EvalSettings&) const = default;
};

struct ExperimentConfig {
    std::string name;
    TrainConfig train{};
    MixtureSpec data{};
    NoiseSpec noise{};
    ModelSpec model{};
    EvalSettings eval{};
    std::optional<std::string> output_dir;

    bool operator==(const ExperimentConfig&) const = default;
};

struct AnalysisConfig {
    std::string name;
    MixtureSpec px{};
    MixtureSpec pg{};
    double grid_lo = -4.0;
    double grid_hi = 4.0;
    std::size_t grid_points = 801;
    std::size_t covered_mode = 0;
    std::size_t missing_mode = 1;

    bool operator==(const AnalysisConfig&) const = default;
};

struct SweepSpec {
    std::string name;
    ExperimentConfig base{};
    std::vector<std::uint64_t> seeds;
    /// seed -> {dotted key -> value}, applied on top of the base config.
    std::map<std::uint64_t, nlohmann::json> overrides;
    std::size_t parallelism = 1;
};

ExperimentConfig parse_experiment(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
AnalysisConfig parse_analysis(const nlohmann::json& j);
nlohmann::json to_json(const AnalysisConfig& c);
SweepSpec parse_sweep(const nlohmann::json& j);

/// Experiment for a given seed with that seed's overrides applied.
ExperimentConfig sweep_run_config(const SweepSpec& s, std::uint64_t seed);

/// Built-in profiles: gauss8-gan, gauss8-dan-s, gauss8-dan-2s (experiments),
/// bimodal-collapsed, bimodal-matched (analyses).
std::vector<std::string> profile_names();
std::optional<nlohmann::json> builtin_profile(const std::string& name);

/// Reads a JSON file, or resolves a built-in profile name when no such file exists.
nlohmann::json load_json(const std::string& path_or_profile);

ExperimentConfig load_experiment(const std::string& path_or_profile);
AnalysisConfig load_analysis(const std::string& path_or_profile);
SweepSpec load_sweep(const std::string& path);

}  // namespace danlab
