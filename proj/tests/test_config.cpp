#include <doctest.h>

#include <string>

#include "danlab/config.hpp"
#include "danlab/errors.hpp"

using namespace danlab;
using nlohmann::json;

namespace {

std::string validation_message(const json& j, ExperimentConfig (*parse)(const json&) = parse_experiment) {
    try {
        parse(j);
    } catch (const ValidationError& e) {
        return e.what();
    }
    return {};
}

bool mentions(const std::string& msg, const std::string& needle) { return msg.find(needle) != std::string::npos; }

}  // namespace

TEST_CASE("experiment profiles round-trip through json") {
    for (const auto& name : {"gauss8-gan", "gauss8-dan-s", "gauss8-dan-2s"}) {
        auto j = *builtin_profile(name);
        auto cfg = parse_experiment(j);
        CHECK(parse_experiment(to_json(cfg)) == cfg);
        CHECK(to_json(parse_experiment(to_json(cfg))) == to_json(cfg));
    }
}

TEST_CASE("analysis profiles round-trip through json") {
    for (const auto& name : {"bimodal-collapsed", "bimodal-matched"}) {
        auto cfg = parse_analysis(*builtin_profile(name));
        CHECK(parse_analysis(to_json(cfg)) == cfg);
    }
}

TEST_CASE("ring profiles carry the published toy setup") {
    const auto gan = load_experiment("gauss8-gan");
    const auto s = load_experiment("gauss8-dan-s");
    const auto two = load_experiment("gauss8-dan-2s");
    for (const auto* c : {&gan, &s, &two}) {
        CHECK(c->data == ring_mixture(8, 2.0, 0.01));
        CHECK(c->model.generator == std::vector<std::size_t>{256, 128, 128, 128, 2});
        CHECK(c->model.discriminator == std::vector<std::size_t>{2, 32, 32, 32, 1});
        CHECK(c->model.adversary.trunk == std::vector<std::size_t>{2, 32, 32});
        CHECK(c->model.adversary.head == std::vector<std::size_t>{32, 32, 1});
        CHECK(c->noise.dim == 256);
        CHECK(c->train.batch == 512);
        CHECK(c->train.iterations == 25000);
        CHECK(c->train.adam.lr == 1e-4);
        CHECK(c->train.adam.beta1 == 0.5);
        CHECK(c->eval.thresholds.capture_radius_sigmas == 3.0);
        CHECK(c->eval.thresholds.capture_min_frac == 0.02);
        CHECK(c->eval.n_samples == 10000);
    }
    CHECK(gan.train.xi == Xi::gan_only);
    CHECK(gan.train.lambda1 == 1.0);
    CHECK(gan.train.lambda2 == 0.0);
    CHECK(s.train.xi == Xi::sample_classifier);
    CHECK(s.train.lambda1 == 0.0);
    CHECK(s.train.lambda2 == 1.0);
    CHECK(two.train.xi == Xi::two_sample);
    CHECK(two.train.lambda2 == 1.0);
}

TEST_CASE("bimodal analysis profile") {
    auto a = load_analysis("bimodal-collapsed");
    CHECK(a.px.components.size() == 2);
    CHECK(a.pg.components.size() == 1);
    CHECK(a.pg.components[0].mean == a.px.components[a.covered_mode].mean);
    CHECK(a.grid_points == 801);
    auto eq = load_analysis("bimodal-matched");
    CHECK(eq.px == eq.pg);
}

TEST_CASE("unknown keys and missing fields are reported by path") {
    auto j = *builtin_profile("gauss8-dan-s");
    j["train"]["learning_rate"] = 0.1;
    j["train"].erase("lr");
    j["extra"] = 1;
    const auto msg = validation_message(j);
    CHECK(mentions(msg, "train.learning_rate: unknown key"));
    CHECK(mentions(msg, "train.lr"));
    CHECK(mentions(msg, "extra: unknown key"));
}

TEST_CASE("field-level validation") {
    auto base = *builtin_profile("gauss8-dan-2s");
    {
        auto j = base;
        j["train"]["batch_size"] = 7;
        CHECK(mentions(validation_message(j), "train.batch_size"));
    }
    {
        auto j = base;
        j["train"]["xi"] = "3S";
        CHECK(mentions(validation_message(j), "train.xi"));
    }
    {
        auto j = base;
        j["noise"]["dim"] = 8;
        CHECK(mentions(validation_message(j), "noise.dim"));
    }
    {
        auto j = base;
        j["schema"] = "danlab/analysis@1";
        CHECK(mentions(validation_message(j), "schema"));
    }
    {
        auto j = base;
        j["data"] = json{{"ring", {{"k", 8}, {"radius", 2.0}, {"variance", 0.01}}},
                         {"components", json::array()}};
        CHECK(!validation_message(j).empty());
    }
    {
        auto j = base;
        j["eval"]["mmd_bandwidth"] = 0.5;
        CHECK(parse_experiment(j).eval.mmd_bandwidth == 0.5);
        j["eval"]["mmd_bandwidth"] = "silverman";
        CHECK(mentions(validation_message(j), "eval.mmd_bandwidth"));
    }
}

TEST_CASE("analysis mixtures must be one-dimensional") {
    auto j = *builtin_profile("bimodal-collapsed");
    j["pg"] = json{{"ring", {{"k", 8}, {"radius", 2.0}, {"variance", 0.01}}}};
    CHECK_THROWS_AS(parse_analysis(j), ValidationError);
}

TEST_CASE("sweep overrides apply on top of the base") {
    json j{{"schema", kSweepSchema},
           {"name", "s"},
           {"base", "gauss8-dan-s"},
           {"seeds", {3, 4}},
           {"overrides", {{"4", {{"train.iterations", 10}, {"train.lr", 0.01}}}}}};
    auto spec = parse_sweep(j);
    CHECK(spec.parallelism == 1);
    auto c3 = sweep_run_config(spec, 3), c4 = sweep_run_config(spec, 4);
    CHECK(c3.train.seed == 3);
    CHECK(c3.train.iterations == 25000);
    CHECK(c4.train.seed == 4);
    CHECK(c4.train.iterations == 10);
    CHECK(c4.train.adam.lr == 0.01);

    auto dup = j;
    dup["seeds"] = {1, 1};
    CHECK_THROWS_AS(parse_sweep(dup), ValidationError);

    auto bad = j;
    bad["overrides"]["4"]["train.bogus"] = 1;
    CHECK_THROWS_AS(parse_sweep(bad), ValidationError);

    auto zero = j;
    zero["parallelism"] = 0;
    CHECK_THROWS_AS(parse_sweep(zero), ValidationError);
}

TEST_CASE("unknown profile names and unreadable files") {
    CHECK_THROWS(load_experiment("no-such-profile-or-file"));
    CHECK(!builtin_profile("nope").has_value());
    CHECK(profile_names().size() == 5);
}
