#include "danlab/danlab.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "danlab/errors.hpp"
#include "danlab/experiment.hpp"

struct danlab_experiment {
    danlab::ExperimentConfig cfg;
};
struct danlab_analysis {
    danlab::AnalysisConfig cfg;
};
struct danlab_sweep {
    danlab::SweepSpec spec;
};

namespace {

thread_local std::string g_last_error;

danlab_status status_of(danlab::ErrorKind k) {
    using danlab::ErrorKind;
    switch (k) {
        case ErrorKind::validation: return DANLAB_ERR_VALIDATION;
        case ErrorKind::dimension: return DANLAB_ERR_DIMENSION;
        case ErrorKind::empty_input: return DANLAB_ERR_EMPTY_INPUT;
        case ErrorKind::contract: return DANLAB_ERR_CONTRACT;
        case ErrorKind::non_finite: return DANLAB_ERR_NON_FINITE;
        case ErrorKind::io: return DANLAB_ERR_IO;
        case ErrorKind::load: return DANLAB_ERR_LOAD;
    }
    return DANLAB_ERR_INTERNAL;
}

danlab_status fail(danlab_status s, std::string msg) {
    g_last_error = std::move(msg);
    return s;
}

template <class F>
danlab_status guarded(F&& f) {
    try {
        return f();
    } catch (const danlab::Error& e) {
        return fail(status_of(e.kind()), e.what());
    } catch (const std::exception& e) {
        return fail(DANLAB_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(DANLAB_ERR_INTERNAL, "unknown error");
    }
}

char* dup(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

#define DANLAB_REQUIRE(ptr) \
    if (!(ptr)) return fail(DANLAB_ERR_CONTRACT, std::string(__func__) + ": " #ptr " must not be NULL")

}  // namespace

extern "C" {

const char* danlab_last_error(void) { return g_last_error.c_str(); }

const char* danlab_status_name(danlab_status s) {
    switch (s) {
        case DANLAB_OK: return "ok";
        case DANLAB_ERR_VALIDATION: return "validation";
        case DANLAB_ERR_DIMENSION: return "dimension";
        case DANLAB_ERR_EMPTY_INPUT: return "empty_input";
        case DANLAB_ERR_CONTRACT: return "contract";
        case DANLAB_ERR_NON_FINITE: return "non_finite";
        case DANLAB_ERR_IO: return "io";
        case DANLAB_ERR_LOAD: return "load";
        case DANLAB_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

void danlab_string_free(char* s) { std::free(s); }

danlab_status danlab_profile_names(char** out) {
    DANLAB_REQUIRE(out);
    return guarded([&] {
        std::string s;
        for (const auto& n : danlab::profile_names()) s += n + "\n";
        *out = dup(s);
        return DANLAB_OK;
    });
}

danlab_status danlab_profile_json(const char* name, char** out) {
    DANLAB_REQUIRE(name);
    DANLAB_REQUIRE(out);
    return guarded([&] {
        auto j = danlab::builtin_profile(name);
        if (!j) return fail(DANLAB_ERR_VALIDATION, std::string("unknown profile '") + name + "'");
        *out = dup(j->dump(2) + "\n");
        return DANLAB_OK;
    });
}

danlab_status danlab_experiment_load(const char* path_or_profile, danlab_experiment** out) {
    DANLAB_REQUIRE(path_or_profile);
    DANLAB_REQUIRE(out);
    return guarded([&] {
        *out = new danlab_experiment{danlab::load_experiment(path_or_profile)};
        return DANLAB_OK;
    });
}

danlab_status danlab_experiment_parse(const char* json_text, danlab_experiment** out) {
    DANLAB_REQUIRE(json_text);
    DANLAB_REQUIRE(out);
    return guarded([&] {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(json_text);
        } catch (const nlohmann::json::parse_error& e) {
            return fail(DANLAB_ERR_VALIDATION, std::string("malformed JSON: ") + e.what());
        }
        *out = new danlab_experiment{danlab::parse_experiment(j)};
        return DANLAB_OK;
    });
}

void danlab_experiment_free(danlab_experiment* e) { delete e; }

danlab_status danlab_experiment_set_seed(danlab_experiment* e, uint64_t seed) {
    DANLAB_REQUIRE(e);
    e->cfg.train.seed = seed;
    return DANLAB_OK;
}

danlab_status danlab_experiment_seed(const danlab_experiment* e, uint64_t* out) {
    DANLAB_REQUIRE(e);
    DANLAB_REQUIRE(out);
    *out = e->cfg.train.seed;
    return DANLAB_OK;
}

danlab_status danlab_experiment_eval_samples(const danlab_experiment* e, size_t* out) {
    DANLAB_REQUIRE(e);
    DANLAB_REQUIRE(out);
    *out = e->cfg.eval.n_samples;
    return DANLAB_OK;
}

danlab_status danlab_experiment_to_json(const danlab_experiment* e, char** out) {
    DANLAB_REQUIRE(e);
    DANLAB_REQUIRE(out);
    return guarded([&] {
        *out = dup(danlab::to_json(e->cfg).dump(2) + "\n");
        return DANLAB_OK;
    });
}

danlab_status danlab_output_root(const danlab_experiment* e, const char* out_dir, char** out) {
    DANLAB_REQUIRE(out);
    return guarded([&] {
        std::optional<std::string> cli = out_dir ? std::optional<std::string>(out_dir) : std::nullopt;
        std::optional<std::string> cfg = e ? e->cfg.output_dir : std::nullopt;
        *out = dup(danlab::resolve_output_root(cli, cfg).string());
        return DANLAB_OK;
    });
}

danlab_status danlab_train(const danlab_experiment* e, const char* out_root, danlab_progress_fn progress, void* user,
                           char** run_dir) {
    DANLAB_REQUIRE(e);
    DANLAB_REQUIRE(out_root);
    return guarded([&] {
        danlab::ProgressFn fn;
        if (progress) fn = [&](std::int64_t it, std::int64_t total) { progress(it, total, user); };
        auto run = danlab::train_run(e->cfg, out_root, fn);
        if (run_dir) *run_dir = dup(run.dir.string());
        if (run.abort_reason) return fail(DANLAB_ERR_NON_FINITE, *run.abort_reason);
        return DANLAB_OK;
    });
}

danlab_status danlab_eval(const danlab_experiment* e, const char* checkpoint, size_t n_samples,
                          danlab_eval_report* report, char** csv_out) {
    DANLAB_REQUIRE(e);
    DANLAB_REQUIRE(checkpoint);
    return guarded([&] {
        const auto& cfg = e->cfg;
        auto gen = danlab::load_generator(cfg, checkpoint);
        auto rep = danlab::evaluate_generator(gen, cfg, n_samples, cfg.train.seed);
        if (report) {
            *report = danlab_eval_report{rep.n_samples,     rep.histogram.size(), rep.modes_captured, rep.entropy,
                                         rep.tv_to_target,  rep.hq_fraction,      rep.mmd2,           rep.no_assigned};
        }
        if (csv_out) {
            // Iteration is recovered from snapshot names; -1 when the file is not a snapshot.
            std::int64_t iteration = -1;
            const std::string stem = std::filesystem::path(checkpoint).stem().string();
            if (auto pos = stem.rfind("_it"); pos != std::string::npos) {
                try {
                    iteration = std::stoll(stem.substr(pos + 3));
                } catch (const std::exception&) {
                }
            }
            danlab::EvalRow row{danlab::run_id(cfg), cfg.train.seed, iteration, rep};
            *csv_out = dup(danlab::eval_csv_header() + "\n" + danlab::eval_csv_row(row) + "\n");
        }
        return DANLAB_OK;
    });
}

danlab_status danlab_analysis_load(const char* path_or_profile, danlab_analysis** out) {
    DANLAB_REQUIRE(path_or_profile);
    DANLAB_REQUIRE(out);
    return guarded([&] {
        *out = new danlab_analysis{danlab::load_analysis(path_or_profile)};
        return DANLAB_OK;
    });
}

void danlab_analysis_free(danlab_analysis* a) { delete a; }

danlab_status danlab_analysis_name(const danlab_analysis* a, char** out) {
    DANLAB_REQUIRE(a);
    DANLAB_REQUIRE(out);
    return guarded([&] {
        *out = dup(a->cfg.name);
        return DANLAB_OK;
    });
}

danlab_status danlab_analyze(const danlab_analysis* a, const char* csv_path, danlab_region_summary* out) {
    DANLAB_REQUIRE(a);
    DANLAB_REQUIRE(csv_path);
    return guarded([&] {
        auto res = danlab::run_analysis(a->cfg);
        const std::filesystem::path p(csv_path);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        danlab::write_curve_csv(p, res.curve, &res.summary);
        if (out) *out = {res.summary.missing_max_abs_weight, res.summary.approach_max_abs_weight, res.summary.ratio};
        return DANLAB_OK;
    });
}

danlab_status danlab_sweep_load(const char* path, danlab_sweep** out) {
    DANLAB_REQUIRE(path);
    DANLAB_REQUIRE(out);
    return guarded([&] {
        *out = new danlab_sweep{danlab::load_sweep(path)};
        return DANLAB_OK;
    });
}

void danlab_sweep_free(danlab_sweep* s) { delete s; }

danlab_status danlab_sweep_set_parallelism(danlab_sweep* s, size_t parallelism) {
    DANLAB_REQUIRE(s);
    if (parallelism < 1) return fail(DANLAB_ERR_VALIDATION, "parallelism: must be >= 1");
    s->spec.parallelism = parallelism;
    return DANLAB_OK;
}

danlab_status danlab_sweep_run(const danlab_sweep* s, const char* out_root, size_t n_samples, danlab_log_fn log,
                               void* user, char** aggregate_path, size_t* n_aborted) {
    DANLAB_REQUIRE(s);
    return guarded([&] {
        std::optional<std::string> cli = out_root ? std::optional<std::string>(out_root) : std::nullopt;
        auto root = danlab::resolve_output_root(cli, s->spec.base.output_dir);
        std::function<void(const std::string&)> fn;
        if (log) fn = [&](const std::string& line) { log(line.c_str(), user); };
        auto res = danlab::run_sweep(s->spec, root, n_samples, fn);
        std::size_t aborted = 0;
        for (const auto& r : res.rows) aborted += r.completed() ? 0 : 1;
        if (n_aborted) *n_aborted = aborted;
        if (aggregate_path) *aggregate_path = dup((res.dir / "aggregate.csv").string());
        return DANLAB_OK;
    });
}

}  // extern "C"
