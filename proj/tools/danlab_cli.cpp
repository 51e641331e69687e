// danlab command-line driver. Links only against the C API.
//
//   danlab_cli train   --config gauss8-dan-s [--seed N] [--out DIR]
//   danlab_cli eval    --config CFG --checkpoint FILE [--n-samples N] [--seed N]
//   danlab_cli analyze --config bimodal-collapsed [--out DIR]
//   danlab_cli sweep   --config sweep.json [--parallelism N] [--n-samples N] [--out DIR]
//   danlab_cli profiles [NAME]
//
// Exit codes: 0 success, 1 validation error, 2 runtime abort.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "danlab/danlab.h"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

int report(danlab_status s) {
    std::fprintf(stderr, "error (%s): %s\n", danlab_status_name(s), danlab_last_error());
    return s == DANLAB_ERR_VALIDATION ? kExitValidation : kExitRuntime;
}

struct CString {
    char* p = nullptr;
    ~CString() { danlab_string_free(p); }
    std::string str() const { return p ? p : ""; }
};

struct ExperimentDeleter {
    void operator()(danlab_experiment* e) const { danlab_experiment_free(e); }
};
using ExperimentPtr = std::unique_ptr<danlab_experiment, ExperimentDeleter>;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> n_samples;
    std::optional<std::size_t> parallelism;
    std::string checkpoint;
    std::string profile;
};

int load_experiment(const Options& o, ExperimentPtr& out) {
    danlab_experiment* e = nullptr;
    if (auto s = danlab_experiment_load(o.config.c_str(), &e); s != DANLAB_OK) return report(s);
    out.reset(e);
    if (o.seed) danlab_experiment_set_seed(e, *o.seed);
    return 0;
}

const char* opt_cstr(const std::optional<std::string>& s) { return s ? s->c_str() : nullptr; }

void print_progress(std::int64_t it, std::int64_t total, void*) {
    if (it % 1000 == 0 || it == total) std::fprintf(stderr, "iteration %lld/%lld\n", (long long)it, (long long)total);
}

void print_line(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

int cmd_train(const Options& o) {
    ExperimentPtr e;
    if (int rc = load_experiment(o, e)) return rc;
    CString root, dir;
    if (auto s = danlab_output_root(e.get(), opt_cstr(o.out), &root.p); s != DANLAB_OK) return report(s);
    auto s = danlab_train(e.get(), root.p, print_progress, nullptr, &dir.p);
    if (dir.p) std::printf("%s\n", dir.p);
    return s == DANLAB_OK ? 0 : report(s);
}

int cmd_eval(const Options& o) {
    ExperimentPtr e;
    if (int rc = load_experiment(o, e)) return rc;
    std::size_t n = 0;
    danlab_experiment_eval_samples(e.get(), &n);
    if (o.n_samples) n = *o.n_samples;
    CString csv;
    if (auto s = danlab_eval(e.get(), o.checkpoint.c_str(), n, nullptr, &csv.p); s != DANLAB_OK) return report(s);
    std::fputs(csv.p, stdout);
    return 0;
}

int cmd_analyze(const Options& o) {
    danlab_analysis* raw = nullptr;
    if (auto s = danlab_analysis_load(o.config.c_str(), &raw); s != DANLAB_OK) return report(s);
    std::unique_ptr<danlab_analysis, decltype(&danlab_analysis_free)> a(raw, danlab_analysis_free);
    CString root, name;
    danlab_output_root(nullptr, opt_cstr(o.out), &root.p);
    danlab_analysis_name(a.get(), &name.p);
    const std::string path = (std::filesystem::path(root.str()) / (name.str() + ".csv")).string();
    danlab_region_summary sum{};
    if (auto s = danlab_analyze(a.get(), path.c_str(), &sum); s != DANLAB_OK) return report(s);
    std::printf("%s\nmissing_region_max_abs_weight=%.6g approach_region_max_abs_weight=%.6g ratio=%.6g\n",
                path.c_str(), sum.missing_max_abs_weight, sum.approach_max_abs_weight, sum.ratio);
    return 0;
}

int cmd_sweep(const Options& o) {
    danlab_sweep* raw = nullptr;
    if (auto s = danlab_sweep_load(o.config.c_str(), &raw); s != DANLAB_OK) return report(s);
    std::unique_ptr<danlab_sweep, decltype(&danlab_sweep_free)> sw(raw, danlab_sweep_free);
    if (o.parallelism) {
        if (auto s = danlab_sweep_set_parallelism(sw.get(), *o.parallelism); s != DANLAB_OK) return report(s);
    }
    CString agg;
    std::size_t aborted = 0;
    auto s = danlab_sweep_run(sw.get(), opt_cstr(o.out), o.n_samples.value_or(0), print_line, nullptr, &agg.p,
                              &aborted);
    if (s != DANLAB_OK) return report(s);
    std::printf("%s\n", agg.p);
    if (aborted > 0) {
        std::fprintf(stderr, "%zu run(s) aborted\n", aborted);
        return kExitRuntime;
    }
    return 0;
}

int cmd_profiles(const Options& o) {
    CString text;
    auto s = o.profile.empty() ? danlab_profile_names(&text.p) : danlab_profile_json(o.profile.c_str(), &text.p);
    if (s != DANLAB_OK) return report(s);
    std::fputs(text.p, stdout);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributional adversarial network experiments"};
    app.require_subcommand(1);
    Options o;

    auto add_config = [&](CLI::App* sub, const char* what) {
        sub->add_option("--config", o.config, what)->required();
    };
    auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "Override train.seed"); };
    auto add_out = [&](CLI::App* sub) { sub->add_option("--out", o.out, "Output root directory"); };
    auto add_n = [&](CLI::App* sub) {
        sub->add_option("--n-samples", o.n_samples, "Points generated for evaluation");
    };

    auto* train = app.add_subcommand("train", "Train one run and write its run directory");
    add_config(train, "Experiment JSON file or profile name");
    add_seed(train);
    add_out(train);

    auto* eval = app.add_subcommand("eval", "Evaluate a generator checkpoint; prints a CSV row");
    add_config(eval, "Experiment JSON file or profile name");
    eval->add_option("--checkpoint", o.checkpoint, "Generator checkpoint")->required();
    add_seed(eval);
    add_n(eval);

    auto* analyze = app.add_subcommand("analyze", "Write the weighting-curve CSV of a 1-D analysis");
    add_config(analyze, "Analysis JSON file or profile name");
    add_out(analyze);

    auto* sweep = app.add_subcommand("sweep", "Train and evaluate several seeds; writes aggregate.csv");
    add_config(sweep, "Sweep JSON file");
    sweep->add_option("--parallelism", o.parallelism, "Concurrent runs");
    add_n(sweep);
    add_out(sweep);

    auto* profiles = app.add_subcommand("profiles", "List built-in profiles, or print one as JSON");
    profiles->add_option("name", o.profile, "Profile to print");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitValidation;
    }

    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*analyze) return cmd_analyze(o);
    if (*sweep) return cmd_sweep(o);
    return cmd_profiles(o);
}
