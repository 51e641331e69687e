#pragma once

// Experiment driver behind the train / eval / analyze / sweep commands.
//
// A run directory holds:
//   config.json             the resolved experiment config
//   trace.csv               per-iteration losses
//   snapshots/generator_it<NNNNNN>.ckpt
//   generator.ckpt, discriminator.ckpt, adversary.ckpt (when xi != GAN)
//   status.txt              "ok" or "aborted: <reason>"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "danlab/config.hpp"
#include "danlab/gradient_analysis.hpp"

namespace danlab {

/// --out, then the config's output_dir, then $DAN_LAB_OUT, then "runs".
std::filesystem::path resolve_output_root(const std::optional<std::string>& cli_out,
                                          const std::optional<std::string>& config_out);

std::string run_id(const ExperimentConfig& cfg);

struct RunOutcome {
    std::string run_id;
    std::filesystem::path dir;
    std::uint64_t seed = 0;
    std::optional<std::string> abort_reason;
    std::int64_t iterations_completed = 0;
    std::vector<Snapshot> snapshots;
};

RunOutcome train_run(const ExperimentConfig& cfg, const std::filesystem::path& root,
                     const ProgressFn& progress = {});

GeneratorNet generator_from_values(const ExperimentConfig& cfg, std::span<const double> values);
GeneratorNet load_generator(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint);

/// Mode statistics on n_samples generated points plus MMD^2 against fresh
/// real draws. All randomness comes from the eval stream of eval_seed.
EvalReport evaluate_generator(const GeneratorNet& g, const ExperimentConfig& cfg, std::size_t n_samples,
                              std::uint64_t eval_seed);

/// Same statistics for real draws; the self-consistency check for the metrics.
EvalReport evaluate_real(const ExperimentConfig& cfg, std::size_t n_samples, std::uint64_t eval_seed);

struct AnalysisOutcome {
    WeightingCurve curve;
    RegionSummary summary;
};

AnalysisOutcome run_analysis(const AnalysisConfig& cfg);

struct SweepRow {
    EvalRow row;
    std::string status;  // "ok" or "aborted"
    std::optional<double> mmd2_initial;
    bool completed() const { return status == "ok"; }
};

struct SweepOutcome {
    std::filesystem::path dir;
    std::vector<SweepRow> rows;  // in seed order
};

/// Runs every seed (at most `parallelism` at once), evaluates final and
/// iteration-0 snapshots, and writes aggregate.csv and summary.csv.
SweepOutcome run_sweep(const SweepSpec& spec, const std::filesystem::path& root, std::size_t n_samples = 0,
                       const std::function<void(const std::string&)>& log = {});

/// Metric columns of the aggregate, in order.
std::vector<std::string> sweep_metric_names();

/// Median / min / max of each metric over completed rows. Pure function of the rows.
struct MetricSummary {
    std::string metric;
    double median = 0, min = 0, max = 0;
    std::size_t count = 0;
};
std::vector<MetricSummary> summarize(const std::vector<SweepRow>& rows);

std::string aggregate_csv(const std::vector<SweepRow>& rows);
std::string summary_csv(const std::vector<SweepRow>& rows);

double median(std::vector<double> v);

}  // namespace danlab
