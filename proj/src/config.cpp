#include "danlab/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "danlab/errors.hpp"
#include "danlab/format.hpp"

namespace danlab {

using nlohmann::json;

namespace {

bool is_count(const json& v) { return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0); }

// Strict view onto one JSON object: tracks which keys were read so that the
// leftovers can be reported as unknown.
class Fields {
public:
    Fields(const json& j, std::string path, std::vector<std::string>& errs) : j_(j), path_(std::move(path)), errs_(errs) {
        if (!j_.is_object()) {
            error("", "expected an object");
            ok_ = false;
        }
    }

    bool ok() const { return ok_; }

    const json* child(const std::string& key, bool required) {
        if (!ok_) return nullptr;
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) {
            if (required) error(key, "missing required field");
            return nullptr;
        }
        return &*it;
    }

    std::optional<double> number(const std::string& key, bool required) {
        const json* v = child(key, required);
        if (!v) return std::nullopt;
        if (!v->is_number()) {
            error(key, "expected a number");
            return std::nullopt;
        }
        return v->get<double>();
    }

    std::optional<std::uint64_t> count(const std::string& key, bool required) {
        const json* v = child(key, required);
        if (!v) return std::nullopt;
        if (!is_count(*v)) {
            error(key, "expected a non-negative integer");
            return std::nullopt;
        }
        return v->get<std::uint64_t>();
    }

    std::optional<std::string> text(const std::string& key, bool required) {
        const json* v = child(key, required);
        if (!v) return std::nullopt;
        if (!v->is_string()) {
            error(key, "expected a string");
            return std::nullopt;
        }
        return v->get<std::string>();
    }

    std::optional<std::vector<std::size_t>> extents(const std::string& key, bool required) {
        const json* v = child(key, required);
        if (!v) return std::nullopt;
        if (!v->is_array()) {
            error(key, "expected an array of positive integers");
            return std::nullopt;
        }
        std::vector<std::size_t> out;
        for (const auto& e : *v) {
            if (!is_count(e) || e.get<std::uint64_t>() == 0) {
                error(key, "expected an array of positive integers");
                return std::nullopt;
            }
            out.push_back(e.get<std::size_t>());
        }
        return out;
    }

    // Parses an enum-like string through conv, recording conv's ValidationError.
    template <class T, class Conv>
    std::optional<T> choice(const std::string& key, bool required, Conv conv) {
        auto s = text(key, required);
        if (!s) return std::nullopt;
        try {
            return conv(*s);
        } catch (const ValidationError& e) {
            error(key, e.what());
            return std::nullopt;
        }
    }

    void error(const std::string& key, const std::string& msg) {
        std::string where = path_;
        if (!key.empty()) where += (where.empty() ? "" : ".") + key;
        errs_.push_back((where.empty() ? std::string("<root>") : where) + ": " + msg);
    }

    std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    // Reports every key that no accessor asked for.
    void finish() {
        if (!ok_) return;
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) error(it.key(), "unknown key");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::vector<std::string>& errs_;
    std::set<std::string> seen_;
    bool ok_ = true;
};

void check_schema(Fields& f, const char* expected) {
    if (auto s = f.text("schema", true); s && *s != expected) {
        f.error("schema", "expected \"" + std::string(expected) + "\", got \"" + *s + "\"");
    }
}

std::optional<MixtureSpec> parse_mixture(const json& j, const std::string& path, std::vector<std::string>& errs) {
    Fields f(j, path, errs);
    if (!f.ok()) return std::nullopt;
    const json* ring = f.child("ring", false);
    const json* comps = f.child("components", false);
    f.finish();
    if ((ring != nullptr) == (comps != nullptr)) {
        f.error("", "exactly one of 'ring' or 'components' is required");
        return std::nullopt;
    }
    const std::size_t before = errs.size();
    if (ring) {
        Fields r(*ring, f.sub("ring"), errs);
        auto k = r.count("k", true);
        auto radius = r.number("radius", true);
        auto variance = r.number("variance", true);
        r.finish();
        if (errs.size() != before) return std::nullopt;
        try {
            return ring_mixture(*k, *radius, *variance);
        } catch (const ValidationError& e) {
            r.error("", e.what());
            return std::nullopt;
        }
    }
    if (!comps->is_array() || comps->empty()) {
        f.error("components", "expected a non-empty array");
        return std::nullopt;
    }
    std::vector<MixtureComponent> out;
    for (std::size_t i = 0; i < comps->size(); ++i) {
        Fields c((*comps)[i], f.sub("components[" + std::to_string(i) + "]"), errs);
        MixtureComponent mc;
        if (const json* mean = c.child("mean", true)) {
            if (!mean->is_array() || mean->empty()) {
                c.error("mean", "expected a non-empty array of numbers");
            } else {
                for (const auto& x : *mean) {
                    if (!x.is_number()) {
                        c.error("mean", "expected a non-empty array of numbers");
                        break;
                    }
                    mc.mean.push_back(x.get<double>());
                }
            }
        }
        if (auto v = c.number("variance", true)) mc.variance = *v;
        if (auto w = c.number("weight", true)) mc.weight = *w;
        c.finish();
        out.push_back(std::move(mc));
    }
    if (errs.size() != before) return std::nullopt;
    try {
        return make_mixture(std::move(out));
    } catch (const ValidationError& e) {
        f.error("components", e.what());
        return std::nullopt;
    }
}

json mixture_json(const MixtureSpec& m) {
    json comps = json::array();
    for (const auto& c : m.components) comps.push_back({{"mean", c.mean}, {"variance", c.variance}, {"weight", c.weight}});
    return {{"components", comps}};
}

void throw_if(const std::vector<std::string>& errs) {
    if (!errs.empty()) throw ValidationError("invalid configuration:\n" + join_lines(errs));
}

}  // namespace

// --- experiment -----------------------------------------------------------------

ExperimentConfig parse_experiment(const json& j) {
    std::vector<std::string> errs;
    ExperimentConfig c;
    Fields root(j, "", errs);
    if (!root.ok()) throw_if(errs);
    check_schema(root, kExperimentSchema);
    if (auto name = root.text("name", true)) c.name = *name;

    if (const json* t = root.child("train", true)) {
        Fields f(*t, "train", errs);
        auto& tc = c.train;
        if (auto v = f.count("iterations", true)) tc.iterations = static_cast<std::int64_t>(*v);
        if (auto v = f.count("batch_size", true)) tc.batch = *v;
        if (auto v = f.count("k", false)) tc.k = static_cast<std::int64_t>(*v);
        if (auto v = f.choice<Xi>("xi", true, xi_from_string)) tc.xi = *v;
        if (auto v = f.number("lambda1", true)) tc.lambda1 = *v;
        if (auto v = f.number("lambda2", true)) tc.lambda2 = *v;
        if (auto v = f.number("lr", true)) tc.adam.lr = *v;
        if (auto v = f.number("beta1", true)) tc.adam.beta1 = *v;
        if (auto v = f.number("beta2", false)) tc.adam.beta2 = *v;
        if (auto v = f.number("eps", false)) tc.adam.eps = *v;
        if (auto v = f.choice<GLossForm>("g_loss_form", false, g_loss_form_from_string)) tc.g_loss_form = *v;
        if (auto v = f.choice<LossForm>("loss_form", false, loss_form_from_string)) tc.loss_form = *v;
        if (auto v = f.count("seed", false)) tc.seed = *v;
        if (auto v = f.count("snapshot_every", false)) tc.snapshot_every = static_cast<std::int64_t>(*v);
        f.finish();
        if (f.ok()) {
            for (const auto& e : validation_errors(tc)) errs.push_back(e);
        }
    }

    bool have_data = false;
    if (const json* d = root.child("data", true)) {
        if (auto m = parse_mixture(*d, "data", errs)) {
            c.data = *m;
            have_data = true;
        }
    }

    if (const json* n = root.child("noise", true)) {
        Fields f(*n, "noise", errs);
        if (auto v = f.count("dim", true)) c.noise.dim = *v;
        f.finish();
        if (c.noise.dim == 0) f.error("dim", "must be >= 1");
    }

    bool have_nets = false;
    if (const json* nets = root.child("networks", true)) {
        Fields f(*nets, "networks", errs);
        const std::size_t before = errs.size();
        if (auto v = f.extents("generator", true)) c.model.generator = *v;
        if (auto v = f.choice<Activation>("generator_output", false, activation_from_string)) c.model.generator_output = *v;
        if (auto v = f.extents("discriminator", true)) c.model.discriminator = *v;
        if (auto v = f.extents("encoder", true)) c.model.adversary.trunk = *v;
        if (auto v = f.extents("head", true)) c.model.adversary.head = *v;
        f.finish();
        have_nets = errs.size() == before;
    }
    if (have_nets && have_data) {
        for (const auto& e : validation_errors(c.model, c.data.dim)) errs.push_back(e);
    }
    if (have_nets && c.noise.dim != 0 && !c.model.generator.empty() && c.model.generator.front() != c.noise.dim) {
        errs.push_back("noise.dim: " + std::to_string(c.noise.dim) + " does not match networks.generator input width " +
                       std::to_string(c.model.generator.front()));
    }

    if (const json* e = root.child("eval", false)) {
        Fields f(*e, "eval", errs);
        auto& ev = c.eval;
        if (auto v = f.number("capture_radius_sigmas", false)) ev.thresholds.capture_radius_sigmas = *v;
        if (auto v = f.number("capture_min_frac", false)) ev.thresholds.capture_min_frac = *v;
        if (auto v = f.count("n_samples", false)) ev.n_samples = *v;
        if (auto v = f.count("mmd_samples", false)) ev.mmd_samples = *v;
        if (const json* bw = f.child("mmd_bandwidth", false)) {
            if (bw->is_string() && bw->get<std::string>() == "median") {
                ev.mmd_bandwidth = 0.0;
            } else if (bw->is_number() && bw->get<double>() > 0) {
                ev.mmd_bandwidth = bw->get<double>();
            } else {
                f.error("mmd_bandwidth", "expected \"median\" or a positive number");
            }
        }
        f.finish();
        if (!(ev.thresholds.capture_radius_sigmas > 0)) f.error("capture_radius_sigmas", "must be > 0");
        if (!(ev.thresholds.capture_min_frac >= 0 && ev.thresholds.capture_min_frac <= 1)) {
            f.error("capture_min_frac", "must lie in [0, 1]");
        }
        if (ev.n_samples == 0) f.error("n_samples", "must be >= 1");
        if (ev.mmd_samples < 2) f.error("mmd_samples", "must be >= 2");
    }
    if (auto out = root.text("output_dir", false)) c.output_dir = *out;
    root.finish();
    throw_if(errs);
    return c;
}

json to_json(const ExperimentConfig& c) {
    const auto& t = c.train;
    json j = {
        {"schema", kExperimentSchema},
        {"name", c.name},
        {"train",
         {{"iterations", t.iterations},
          {"batch_size", t.batch},
          {"k", t.k},
          {"xi", to_string(t.xi)},
          {"lambda1", t.lambda1},
          {"lambda2", t.lambda2},
          {"lr", t.adam.lr},
          {"beta1", t.adam.beta1},
          {"beta2", t.adam.beta2},
          {"eps", t.adam.eps},
          {"g_loss_form", to_string(t.g_loss_form)},
          {"loss_form", to_string(t.loss_form)},
          {"seed", t.seed},
          {"snapshot_every", t.snapshot_every}}},
        {"data", mixture_json(c.data)},
        {"noise", {{"dim", c.noise.dim}}},
        {"networks",
         {{"generator", c.model.generator},
          {"generator_output", to_string(c.model.generator_output)},
          {"discriminator", c.model.discriminator},
          {"encoder", c.model.adversary.trunk},
          {"head", c.model.adversary.head}}},
        {"eval",
         {{"capture_radius_sigmas", c.eval.thresholds.capture_radius_sigmas},
          {"capture_min_frac", c.eval.thresholds.capture_min_frac},
          {"n_samples", c.eval.n_samples},
          {"mmd_samples", c.eval.mmd_samples}}},
    };
    if (c.eval.mmd_bandwidth > 0) {
        j["eval"]["mmd_bandwidth"] = c.eval.mmd_bandwidth;
    } else {
        j["eval"]["mmd_bandwidth"] = "median";
    }
    if (c.output_dir) j["output_dir"] = *c.output_dir;
    return j;
}

// --- analysis -------------------------------------------------------------------

AnalysisConfig parse_analysis(const json& j) {
    std::vector<std::string> errs;
    AnalysisConfig c;
    Fields root(j, "", errs);
    if (!root.ok()) throw_if(errs);
    check_schema(root, kAnalysisSchema);
    if (auto name = root.text("name", true)) c.name = *name;
    bool have_px = false, have_pg = false;
    if (const json* p = root.child("px", true)) {
        if (auto m = parse_mixture(*p, "px", errs)) {
            c.px = *m;
            have_px = true;
        }
    }
    if (const json* p = root.child("pg", true)) {
        if (auto m = parse_mixture(*p, "pg", errs)) {
            c.pg = *m;
            have_pg = true;
        }
    }
    if (have_px && c.px.dim != 1) root.error("px", "analysis requires a 1-D mixture");
    if (have_pg && c.pg.dim != 1) root.error("pg", "analysis requires a 1-D mixture");
    if (const json* g = root.child("grid", true)) {
        Fields f(*g, "grid", errs);
        if (auto v = f.number("lo", true)) c.grid_lo = *v;
        if (auto v = f.number("hi", true)) c.grid_hi = *v;
        if (auto v = f.count("points", true)) c.grid_points = *v;
        f.finish();
        if (!(c.grid_hi > c.grid_lo)) f.error("hi", "must exceed grid.lo");
        if (c.grid_points < 2) f.error("points", "must be >= 2");
    }
    if (auto v = root.count("covered_mode", false)) c.covered_mode = *v;
    if (auto v = root.count("missing_mode", false)) c.missing_mode = *v;
    if (have_px) {
        if (c.covered_mode >= c.px.components.size()) root.error("covered_mode", "index out of range for px");
        if (c.missing_mode >= c.px.components.size()) root.error("missing_mode", "index out of range for px");
    }
    root.finish();
    throw_if(errs);
    return c;
}

json to_json(const AnalysisConfig& c) {
    return {{"schema", kAnalysisSchema},
            {"name", c.name},
            {"px", mixture_json(c.px)},
            {"pg", mixture_json(c.pg)},
            {"grid", {{"lo", c.grid_lo}, {"hi", c.grid_hi}, {"points", c.grid_points}}},
            {"covered_mode", c.covered_mode},
            {"missing_mode", c.missing_mode}};
}

// --- sweep ----------------------------------------------------------------------

namespace {

// Sets a dotted key ("train.lr") inside a JSON object.
void set_dotted(json& j, const std::string& key, const json& value) {
    json* cur = &j;
    std::size_t start = 0;
    while (true) {
        auto dot = key.find('.', start);
        std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (dot == std::string::npos) {
            (*cur)[part] = value;
            return;
        }
        cur = &(*cur)[part];
        start = dot + 1;
    }
}

}  // namespace

SweepSpec parse_sweep(const json& j) {
    std::vector<std::string> errs;
    SweepSpec s;
    Fields root(j, "", errs);
    if (!root.ok()) throw_if(errs);
    check_schema(root, kSweepSchema);
    if (auto name = root.text("name", true)) s.name = *name;
    if (const json* base = root.child("base", true)) {
        try {
            json b = *base;
            if (b.is_string()) {
                auto prof = builtin_profile(b.get<std::string>());
                if (!prof) throw ValidationError("base: unknown profile '" + b.get<std::string>() + "'");
                b = *prof;
            }
            s.base = parse_experiment(b);
        } catch (const ValidationError& e) {
            root.error("base", e.what());
        }
    }
    if (const json* seeds = root.child("seeds", true)) {
        std::set<std::uint64_t> unique;
        if (!seeds->is_array() || seeds->empty()) {
            root.error("seeds", "expected a non-empty array of non-negative integers");
        } else {
            for (const auto& x : *seeds) {
                if (!is_count(x)) {
                    root.error("seeds", "expected a non-empty array of non-negative integers");
                    break;
                }
                auto v = x.get<std::uint64_t>();
                if (!unique.insert(v).second) root.error("seeds", "duplicate seed " + std::to_string(v));
                s.seeds.push_back(v);
            }
        }
    }
    if (auto p = root.count("parallelism", false)) {
        s.parallelism = *p;
        if (s.parallelism < 1) root.error("parallelism", "must be >= 1");
    }
    if (const json* ov = root.child("overrides", false)) {
        if (!ov->is_object()) {
            root.error("overrides", "expected an object keyed by seed");
        } else {
            for (auto it = ov->begin(); it != ov->end(); ++it) {
                std::uint64_t seed = 0;
                try {
                    std::size_t used = 0;
                    seed = std::stoull(it.key(), &used);
                    if (used != it.key().size()) throw std::invalid_argument("trailing");
                } catch (const std::exception&) {
                    root.error("overrides." + it.key(), "key must be a seed");
                    continue;
                }
                if (!it.value().is_object()) {
                    root.error("overrides." + it.key(), "expected an object of dotted keys");
                    continue;
                }
                s.overrides[seed] = it.value();
            }
        }
    }
    root.finish();
    throw_if(errs);
    for (const auto& [seed, _] : s.overrides) {
        if (std::find(s.seeds.begin(), s.seeds.end(), seed) == s.seeds.end()) {
            errs.push_back("overrides." + std::to_string(seed) + ": seed is not in the sweep");
        }
    }
    for (auto seed : s.seeds) {
        try {
            (void)sweep_run_config(s, seed);
        } catch (const ValidationError& e) {
            errs.push_back("overrides." + std::to_string(seed) + ": " + e.what());
        }
    }
    throw_if(errs);
    return s;
}

ExperimentConfig sweep_run_config(const SweepSpec& s, std::uint64_t seed) {
    json j = to_json(s.base);
    j["train"]["seed"] = seed;
    if (auto it = s.overrides.find(seed); it != s.overrides.end()) {
        for (auto kv = it->second.begin(); kv != it->second.end(); ++kv) set_dotted(j, kv.key(), kv.value());
    }
    return parse_experiment(j);
}

// --- profiles -------------------------------------------------------------------

std::vector<std::string> profile_names() {
    return {"gauss8-gan", "gauss8-dan-s", "gauss8-dan-2s", "bimodal-collapsed", "bimodal-matched"};
}

namespace {

json gauss8(const std::string& name, const std::string& xi, double lambda1, double lambda2) {
    return {
        {"schema", kExperimentSchema},
        {"name", name},
        {"train",
         {{"iterations", 25000},
          {"batch_size", 512},
          {"k", 1},
          {"xi", xi},
          {"lambda1", lambda1},
          {"lambda2", lambda2},
          {"lr", 1e-4},
          {"beta1", 0.5},
          {"beta2", 0.999},
          {"eps", 1e-8},
          {"g_loss_form", "nonsaturating"},
          {"loss_form", "cross_entropy"},
          {"seed", 0},
          {"snapshot_every", 1000}}},
        {"data", {{"ring", {{"k", 8}, {"radius", 2.0}, {"variance", 0.01}}}}},
        {"noise", {{"dim", 256}}},
        {"networks",
         {{"generator", {256, 128, 128, 128, 2}},
          {"generator_output", "none"},
          {"discriminator", {2, 32, 32, 32, 1}},
          {"encoder", {2, 32, 32}},
          {"head", {32, 32, 1}}}},
        {"eval",
         {{"capture_radius_sigmas", 3.0},
          {"capture_min_frac", 0.02},
          {"n_samples", 10000},
          {"mmd_samples", 2000},
          {"mmd_bandwidth", "median"}}},
    };
}

json gaussian_1d(double mean, double sd, double weight) {
    return {{"mean", {mean}}, {"variance", sd * sd}, {"weight", weight}};
}

}  // namespace

std::optional<json> builtin_profile(const std::string& name) {
    if (name == "gauss8-gan") return gauss8(name, "GAN", 1.0, 0.0);
    if (name == "gauss8-dan-s") return gauss8(name, "S", 0.0, 1.0);
    if (name == "gauss8-dan-2s") return gauss8(name, "2S", 0.0, 1.0);
    if (name == "bimodal-collapsed" || name == "bimodal-matched") {
        json bimodal = {{"components", {gaussian_1d(-2.0, 0.25, 0.5), gaussian_1d(2.0, 0.25, 0.5)}}};
        json pg = name == "bimodal-matched" ? bimodal : json{{"components", {gaussian_1d(-2.0, 0.25, 1.0)}}};
        return json{{"schema", kAnalysisSchema},
                    {"name", name},
                    {"px", bimodal},
                    {"pg", pg},
                    {"grid", {{"lo", -4.0}, {"hi", 4.0}, {"points", 801}}},
                    {"covered_mode", 0},
                    {"missing_mode", 1}};
    }
    return std::nullopt;
}

json load_json(const std::string& path_or_profile) {
    std::error_code ec;
    if (!std::filesystem::exists(path_or_profile, ec)) {
        if (auto p = builtin_profile(path_or_profile)) return *p;
        throw ValidationError("config '" + path_or_profile + "' is neither a file nor a built-in profile");
    }
    std::ifstream is(path_or_profile);
    if (!is) throw IoError("cannot read " + path_or_profile);
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ValidationError(path_or_profile + ": malformed JSON: " + e.what());
    }
}

ExperimentConfig load_experiment(const std::string& path_or_profile) {
    return parse_experiment(load_json(path_or_profile));
}

AnalysisConfig load_analysis(const std::string& path_or_profile) { return parse_analysis(load_json(path_or_profile)); }

SweepSpec load_sweep(const std::string& path) { return parse_sweep(load_json(path)); }

}  // namespace danlab
