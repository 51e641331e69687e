#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "danlab/adversaries.hpp"
#include "danlab/data.hpp"

namespace danlab {

/// Which distributional adversary trains alongside the pointwise one.
enum class Xi { sample_classifier, two_sample, gan_only };

std::string to_string(Xi xi);
Xi xi_from_string(const std::string& s);

/// Form of the generator's objective against a sigmoid adversary output p.
/// saturating descends log(1 - p); nonsaturating descends -log(p).
enum class GLossForm { saturating, nonsaturating };

std::string to_string(GLossForm f);
GLossForm g_loss_form_from_string(const std::string& s);

struct TrainConfig {
    std::int64_t iterations = 25000;
    std::size_t batch = 512;
    std::int64_t k = 1;  // adversary update period
    Xi xi = Xi::sample_classifier;
    double lambda1 = 0.0;
    double lambda2 = 1.0;
    AdamSettings adam{};
    GLossForm g_loss_form = GLossForm::nonsaturating;
    LossForm loss_form = LossForm::cross_entropy;
    std::uint64_t seed = 0;
    std::int64_t snapshot_every = 1000;

    bool operator==(const TrainConfig&) const = default;
};

/// Throws ValidationError listing every violated field.
void validate(const TrainConfig& cfg);
std::vector<std::string> validation_errors(const TrainConfig& cfg);

struct ModelSpec {
    std::vector<std::size_t> generator{256, 128, 128, 128, 2};
    std::vector<std::size_t> discriminator{2, 32, 32, 32, 1};
    AdversaryDims adversary{};
    Activation generator_output = Activation::none;

    bool operator==(const ModelSpec& o) const {
        return generator == o.generator && discriminator == o.discriminator &&
               adversary.trunk == o.adversary.trunk && adversary.head == o.adversary.head &&
               generator_output == o.generator_output;
    }
};

std::vector<std::string> validation_errors(const ModelSpec& spec, std::size_t data_dim);

using DistributionalAdversary = std::variant<std::monostate, SampleClassifier, TwoSampleDiscriminator>;

struct TrainState {
    GeneratorNet generator;
    PointwiseDiscriminator discriminator;
    DistributionalAdversary adversary;

    ParamStore generator_params;
    ParamStore discriminator_params;
    ParamStore adversary_params;
    AdamState generator_opt;
    AdamState discriminator_opt;
    AdamState adversary_opt;

    NoiseSpec noise;
    std::int64_t iteration = 0;

    Rng disc_data, disc_noise, adv_data, adv_noise, gen_data, gen_noise;
};

/// Networks initialized from per-network streams of cfg.seed, so the
/// generator and pointwise discriminator are identical across xi choices.
TrainState init_state(const TrainConfig& cfg, const ModelSpec& model);

struct LossRecord {
    std::int64_t iteration = 0;
    std::optional<double> loss_d;  // objective ascended by D (lambda1-weighted)
    std::optional<double> loss_m;  // objective ascended by M_xi (lambda2-weighted)
    double loss_g = 0.0;           // loss descended by G

    bool operator==(const LossRecord&) const = default;
};

struct LossTrace {
    GLossForm g_loss_form = GLossForm::nonsaturating;
    std::vector<LossRecord> records;
};

/// Generator term against the pointwise discriminator, as a loss to descend.
Tensor g_pointwise_term(const PointwiseDiscriminator& d, const Tensor& fake, GLossForm form);

/// One iteration: D step, M_xi step when iteration % k == 0, G step.
/// Each phase draws its own fresh minibatches from its own streams.
LossRecord train_step(TrainState& state, const TrainConfig& cfg, const MixtureSpec& data);

struct Snapshot {
    std::int64_t iteration = 0;
    std::vector<double> generator_values;
};

struct TrainResult {
    TrainState state;
    LossTrace trace;
    std::vector<Snapshot> snapshots;  // iteration 0, every snapshot_every, and the last
    std::optional<std::string> abort_reason;
};

using ProgressFn = std::function<void(std::int64_t iteration, std::int64_t total)>;

/// Runs cfg.iterations steps. A non-finite abort stops the loop and is
/// reported through abort_reason with the partial trace and snapshots kept.
TrainResult run_training(const TrainConfig& cfg, const ModelSpec& model, const MixtureSpec& data,
                         const ProgressFn& progress = {});

void write_trace_csv(const std::filesystem::path& path, const LossTrace& trace);

}  // namespace danlab
