#include "danlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "danlab/errors.hpp"
#include "danlab/format.hpp"

namespace danlab {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw IoError("write failed for " + path.string());
}

void make_dirs(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string snapshot_name(std::int64_t iteration) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "generator_it%06lld.ckpt", static_cast<long long>(iteration));
    return buf;
}

}  // namespace

fs::path resolve_output_root(const std::optional<std::string>& cli_out, const std::optional<std::string>& config_out) {
    if (cli_out) return *cli_out;
    if (config_out) return *config_out;
    if (const char* env = std::getenv("DAN_LAB_OUT"); env && *env) return env;
    return "runs";
}

std::string run_id(const ExperimentConfig& cfg) { return cfg.name + "-seed" + std::to_string(cfg.train.seed); }

RunOutcome train_run(const ExperimentConfig& cfg, const fs::path& root, const ProgressFn& progress) {
    RunOutcome out;
    out.run_id = run_id(cfg);
    out.seed = cfg.train.seed;
    out.dir = root / out.run_id;
    make_dirs(out.dir / "snapshots");
    write_text(out.dir / "config.json", to_json(cfg).dump(2) + "\n");

    TrainResult r = run_training(cfg.train, cfg.model, cfg.data, progress);
    out.abort_reason = r.abort_reason;
    out.iterations_completed = r.state.iteration;

    write_trace_csv(out.dir / "trace.csv", r.trace);
    ParamStore scratch = r.state.generator_params;
    for (const auto& s : r.snapshots) {
        scratch.set_flat_values(s.generator_values);
        save_checkpoint(out.dir / "snapshots" / snapshot_name(s.iteration), scratch, cfg.train.seed, "generator");
    }
    r.state.generator_params.set_flat_values(r.snapshots.back().generator_values);
    save_checkpoint(out.dir / "generator.ckpt", r.state.generator_params, cfg.train.seed, "generator");
    save_checkpoint(out.dir / "discriminator.ckpt", r.state.discriminator_params, cfg.train.seed, "discriminator");
    if (r.state.adversary_params.size() > 0) {
        save_checkpoint(out.dir / "adversary.ckpt", r.state.adversary_params, cfg.train.seed, "adversary");
    }
    write_text(out.dir / "status.txt", out.abort_reason ? "aborted: " + *out.abort_reason + "\n" : "ok\n");
    out.snapshots = std::move(r.snapshots);
    return out;
}

GeneratorNet generator_from_values(const ExperimentConfig& cfg, std::span<const double> values) {
    GeneratorNet g = make_generator(cfg.model.generator, 0, cfg.model.generator_output);
    ParamStore store;
    g.net.register_params(store, "generator");
    store.set_flat_values(values);
    return g;
}

GeneratorNet load_generator(const ExperimentConfig& cfg, const fs::path& checkpoint) {
    GeneratorNet g = make_generator(cfg.model.generator, 0, cfg.model.generator_output);
    ParamStore store;
    g.net.register_params(store, "generator");
    load_into(store, read_checkpoint(checkpoint));
    return g;
}

namespace {

EvalReport score(const Tensor& points, const ExperimentConfig& cfg, Rng& rng) {
    EvalReport rep = evaluate(points, cfg.data, cfg.data.weights(), cfg.eval.thresholds);
    const std::size_t m = std::min(cfg.eval.mmd_samples, points.rows());
    if (m >= 2) {
        Tensor real = sample_mixture(cfg.data, m, rng).points;
        const double bw = cfg.eval.mmd_bandwidth > 0 ? cfg.eval.mmd_bandwidth : median_heuristic_bandwidth(real);
        rep.mmd2 = mmd2_rbf(slice_rows(points, 0, m), real, bw);
    }
    return rep;
}

void require_samples(std::size_t n) {
    if (n == 0) throw ValidationError("n_samples: must be >= 1");
}

}  // namespace

EvalReport evaluate_generator(const GeneratorNet& g, const ExperimentConfig& cfg, std::size_t n_samples,
                              std::uint64_t eval_seed) {
    require_samples(n_samples);
    if (g.data_dim() != cfg.data.dim) {
        throw DimensionError("evaluate_generator: generator output width " + std::to_string(g.data_dim()) +
                             " does not match data dimension " + std::to_string(cfg.data.dim));
    }
    NoGradGuard no_grad;
    Rng rng = make_stream(eval_seed, stream::eval);
    Tensor points = g.generate(sample_noise(NoiseSpec{g.noise_dim()}, n_samples, rng));
    return score(points, cfg, rng);
}

EvalReport evaluate_real(const ExperimentConfig& cfg, std::size_t n_samples, std::uint64_t eval_seed) {
    require_samples(n_samples);
    Rng rng = make_stream(eval_seed, stream::eval);
    Tensor points = sample_mixture(cfg.data, n_samples, rng).points;
    return score(points, cfg, rng);
}

AnalysisOutcome run_analysis(const AnalysisConfig& cfg) {
    AnalysisOutcome out;
    const auto grid = linspace(cfg.grid_lo, cfg.grid_hi, cfg.grid_points);
    out.curve = weighting_curve(cfg.px, cfg.pg, grid);
    out.summary = region_maxima(out.curve, cfg.px.components.at(cfg.covered_mode),
                                cfg.px.components.at(cfg.missing_mode));
    return out;
}

// --- sweeps ---------------------------------------------------------------------

double median(std::vector<double> v) {
    if (v.empty()) throw EmptyInputError("median: no values");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::string> sweep_metric_names() {
    return {"modes_captured", "entropy", "tv", "hq_fraction", "mmd2", "mmd2_initial"};
}

namespace {

std::optional<double> metric_of(const SweepRow& r, const std::string& name) {
    const auto& rep = r.row.report;
    if (name == "modes_captured") return static_cast<double>(rep.modes_captured);
    if (name == "entropy") return rep.entropy;
    if (name == "tv") return rep.tv_to_target;
    if (name == "hq_fraction") return rep.hq_fraction;
    if (name == "mmd2") return rep.mmd2;
    if (name == "mmd2_initial") return r.mmd2_initial;
    return std::nullopt;
}

std::string summary_cell(const MetricSummary& m) {
    if (m.count == 0) return "";
    return format_double(m.median) + ";" + format_double(m.min) + ";" + format_double(m.max);
}

}  // namespace

std::vector<MetricSummary> summarize(const std::vector<SweepRow>& rows) {
    std::vector<MetricSummary> out;
    for (const auto& name : sweep_metric_names()) {
        MetricSummary m;
        m.metric = name;
        std::vector<double> vals;
        for (const auto& r : rows) {
            if (!r.completed()) continue;
            if (auto v = metric_of(r, name)) vals.push_back(*v);
        }
        m.count = vals.size();
        if (!vals.empty()) {
            m.median = median(vals);
            m.min = *std::min_element(vals.begin(), vals.end());
            m.max = *std::max_element(vals.begin(), vals.end());
        }
        out.push_back(m);
    }
    return out;
}

std::string aggregate_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << eval_csv_header() << ",status,mmd2_initial\n";
    for (const auto& r : rows) {
        if (r.completed()) {
            os << eval_csv_row(r.row) << ",ok,";
            if (r.mmd2_initial) os << format_double(*r.mmd2_initial);
            os << '\n';
        } else {
            os << r.row.run_id << ',' << r.row.seed << ',' << r.row.iteration << ",,,,,," << r.status << ",\n";
        }
    }
    // Summary row: each metric cell is "median;min;max" over completed runs.
    const auto s = summarize(rows);
    os << "summary,,";
    for (std::size_t i = 0; i < 5; ++i) os << ',' << summary_cell(s[i]);
    const auto completed = std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return r.completed(); });
    os << ",completed=" << completed << "/" << rows.size() << ',' << summary_cell(s[5]) << '\n';
    return os.str();
}

std::string summary_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "metric,median,min,max,count\n";
    for (const auto& m : summarize(rows)) {
        os << m.metric << ',';
        if (m.count > 0) os << format_double(m.median) << ',' << format_double(m.min) << ',' << format_double(m.max);
        else os << ",,";
        os << ',' << m.count << '\n';
    }
    return os.str();
}

SweepOutcome run_sweep(const SweepSpec& spec, const fs::path& root, std::size_t n_samples,
                       const std::function<void(const std::string&)>& log) {
    if (spec.parallelism < 1) throw ValidationError("sweep.parallelism: must be >= 1");
    SweepOutcome out;
    out.dir = root / spec.name;
    make_dirs(out.dir);
    out.rows.resize(spec.seeds.size());

    std::mutex log_mu;
    auto say = [&](const std::string& msg) {
        if (!log) return;
        std::lock_guard lock(log_mu);
        log(msg);
    };

    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (std::size_t i = next++; i < spec.seeds.size(); i = next++) {
            try {
                const ExperimentConfig cfg = sweep_run_config(spec, spec.seeds[i]);
                const std::size_t n = n_samples ? n_samples : cfg.eval.n_samples;
                say("[" + run_id(cfg) + "] start");
                auto progress = [&](std::int64_t it, std::int64_t total) {
                    if (it % cfg.train.snapshot_every == 0 || it == total) {
                        say("[" + run_id(cfg) + "] iteration " + std::to_string(it) + "/" + std::to_string(total));
                    }
                };
                RunOutcome run = train_run(cfg, out.dir, progress);
                SweepRow row;
                row.row.run_id = run.run_id;
                row.row.seed = run.seed;
                row.row.iteration = run.iterations_completed;
                if (run.abort_reason) {
                    row.status = "aborted";
                    say("[" + run.run_id + "] aborted: " + *run.abort_reason);
                } else {
                    row.status = "ok";
                    const auto& last = run.snapshots.back();
                    row.row.iteration = last.iteration;
                    row.row.report = evaluate_generator(generator_from_values(cfg, last.generator_values), cfg, n,
                                                        cfg.train.seed);
                    row.mmd2_initial = evaluate_generator(
                                           generator_from_values(cfg, run.snapshots.front().generator_values), cfg,
                                           n, cfg.train.seed)
                                           .mmd2;
                    say("[" + run.run_id + "] done: modes_captured=" + std::to_string(row.row.report.modes_captured));
                }
                out.rows[i] = std::move(row);
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };

    const std::size_t n_workers = std::min(spec.parallelism, spec.seeds.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }
    if (first_error) std::rethrow_exception(first_error);

    write_text(out.dir / "aggregate.csv", aggregate_csv(out.rows));
    write_text(out.dir / "summary.csv", summary_csv(out.rows));
    return out;
}

}  // namespace danlab
