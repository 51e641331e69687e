#include "danlab/training.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "danlab/errors.hpp"
#include "danlab/format.hpp"

namespace danlab {

std::string to_string(Xi xi) {
    switch (xi) {
        case Xi::sample_classifier: return "S";
        case Xi::two_sample: return "2S";
        case Xi::gan_only: return "GAN";
    }
    return "S";
}

Xi xi_from_string(const std::string& s) {
    if (s == "S") return Xi::sample_classifier;
    if (s == "2S") return Xi::two_sample;
    if (s == "GAN") return Xi::gan_only;
    throw ValidationError("unknown xi '" + s + "' (expected S, 2S or GAN)");
}

std::string to_string(GLossForm f) { return f == GLossForm::saturating ? "saturating" : "nonsaturating"; }

GLossForm g_loss_form_from_string(const std::string& s) {
    if (s == "saturating") return GLossForm::saturating;
    if (s == "nonsaturating") return GLossForm::nonsaturating;
    throw ValidationError("unknown g_loss_form '" + s + "'");
}

std::vector<std::string> validation_errors(const TrainConfig& cfg) {
    std::vector<std::string> errs;
    if (cfg.iterations < 1) errs.push_back("train.iterations: must be >= 1");
    if (cfg.batch < 1) errs.push_back("train.batch_size: must be >= 1");
    if (cfg.xi == Xi::two_sample && cfg.batch % 2 != 0) {
        errs.push_back("train.batch_size: must be even for xi=2S (minibatches are split in halves)");
    }
    if (cfg.k < 1) errs.push_back("train.k: must be >= 1");
    if (!(cfg.lambda1 >= 0) || !std::isfinite(cfg.lambda1)) errs.push_back("train.lambda1: must be >= 0");
    if (!(cfg.lambda2 >= 0) || !std::isfinite(cfg.lambda2)) errs.push_back("train.lambda2: must be >= 0");
    if (!(cfg.lambda1 + cfg.lambda2 > 0)) errs.push_back("train.lambda1/lambda2: lambda1 + lambda2 must be > 0");
    if (cfg.xi == Xi::gan_only && !(cfg.lambda1 > 0)) errs.push_back("train.lambda1: must be > 0 for xi=GAN");
    if (!(cfg.adam.lr > 0)) errs.push_back("train.lr: must be > 0");
    if (!(cfg.adam.beta1 >= 0 && cfg.adam.beta1 < 1)) errs.push_back("train.beta1: must lie in [0, 1)");
    if (!(cfg.adam.beta2 >= 0 && cfg.adam.beta2 < 1)) errs.push_back("train.beta2: must lie in [0, 1)");
    if (!(cfg.adam.eps > 0)) errs.push_back("train.eps: must be > 0");
    if (cfg.snapshot_every < 1) errs.push_back("train.snapshot_every: must be >= 1");
    return errs;
}

void validate(const TrainConfig& cfg) {
    auto errs = validation_errors(cfg);
    if (!errs.empty()) throw ValidationError(join_lines(errs));
}

std::vector<std::string> validation_errors(const ModelSpec& spec, std::size_t data_dim) {
    std::vector<std::string> errs;
    auto check = [&](const std::vector<std::size_t>& d, const std::string& name) {
        if (d.size() < 2) {
            errs.push_back(name + ": needs at least two extents");
            return false;
        }
        for (auto e : d) {
            if (e == 0) {
                errs.push_back(name + ": extents must be positive");
                return false;
            }
        }
        return true;
    };
    if (check(spec.generator, "networks.generator") && spec.generator.back() != data_dim) {
        errs.push_back("networks.generator: output width " + std::to_string(spec.generator.back()) +
                       " must equal data dimension " + std::to_string(data_dim));
    }
    if (check(spec.discriminator, "networks.discriminator")) {
        if (spec.discriminator.front() != data_dim) {
            errs.push_back("networks.discriminator: input width must equal data dimension " + std::to_string(data_dim));
        }
        if (spec.discriminator.back() != 1) errs.push_back("networks.discriminator: output width must be 1");
    }
    bool trunk_ok = check(spec.adversary.trunk, "networks.encoder");
    bool head_ok = check(spec.adversary.head, "networks.head");
    if (trunk_ok && spec.adversary.trunk.front() != data_dim) {
        errs.push_back("networks.encoder: input width must equal data dimension " + std::to_string(data_dim));
    }
    if (trunk_ok && head_ok && spec.adversary.head.front() != spec.adversary.trunk.back()) {
        errs.push_back("networks.head: input width must equal encoder output width");
    }
    if (head_ok && spec.adversary.head.back() != 1) errs.push_back("networks.head: output width must be 1");
    return errs;
}

TrainState init_state(const TrainConfig& cfg, const ModelSpec& model) {
    validate(cfg);
    TrainState s;
    auto seed_of = [&](std::uint64_t purpose) { return make_stream(cfg.seed, purpose)(); };
    s.generator = make_generator(model.generator, seed_of(stream::init_generator), model.generator_output);
    s.discriminator = make_pointwise_discriminator(model.discriminator, seed_of(stream::init_discriminator));
    s.generator.net.register_params(s.generator_params, "generator");
    s.discriminator.net.register_params(s.discriminator_params, "discriminator");
    switch (cfg.xi) {
        case Xi::sample_classifier: {
            auto m = make_sample_classifier(model.adversary, seed_of(stream::init_adversary));
            register_params(s.adversary_params, m);
            s.adversary = std::move(m);
            break;
        }
        case Xi::two_sample: {
            auto m = make_two_sample_discriminator(model.adversary, seed_of(stream::init_adversary));
            register_params(s.adversary_params, m);
            s.adversary = std::move(m);
            break;
        }
        case Xi::gan_only: break;
    }
    s.generator_opt = AdamState(s.generator_params, cfg.adam);
    s.discriminator_opt = AdamState(s.discriminator_params, cfg.adam);
    s.adversary_opt = AdamState(s.adversary_params, cfg.adam);
    s.noise = NoiseSpec{model.generator.front()};
    s.disc_data = make_stream(cfg.seed, stream::disc_data);
    s.disc_noise = make_stream(cfg.seed, stream::disc_noise);
    s.adv_data = make_stream(cfg.seed, stream::adv_data);
    s.adv_noise = make_stream(cfg.seed, stream::adv_noise);
    s.gen_data = make_stream(cfg.seed, stream::gen_data);
    s.gen_noise = make_stream(cfg.seed, stream::gen_noise);
    return s;
}

Tensor g_pointwise_term(const PointwiseDiscriminator& d, const Tensor& fake, GLossForm form) {
    const double inv_b = 1.0 / static_cast<double>(fake.rows());
    Tensor p = d.predict(fake);
    if (form == GLossForm::saturating) return scale(sum(log(sub(Tensor::scalar(1.0), p))), inv_b);
    return scale(sum(log(p)), -inv_b);
}

namespace {

Tensor one_minus(const Tensor& p) { return sub(Tensor::scalar(1.0), p); }

void check_params_finite(const ParamStore& store, const char* network, std::int64_t it) {
    for (const auto& e : store.entries()) {
        for (double v : e.tensor.data()) {
            if (!std::isfinite(v)) {
                throw NonFiniteError("iteration " + std::to_string(it) + ": " + network + " parameter " + e.name +
                                     " became non-finite");
            }
        }
    }
}

// Runs one optimizer phase; non-finite failures are re-raised naming the term.
template <class F>
double run_phase(const char* term, std::int64_t it, F&& body) {
    try {
        double v = body();
        if (!std::isfinite(v)) throw NonFiniteError("loss value is " + std::to_string(v));
        return v;
    } catch (const NonFiniteError& e) {
        throw NonFiniteError("iteration " + std::to_string(it) + ": non-finite " + term + " (" + e.what() + ")");
    }
}

// The generator's share of the distributional objective, as a loss to descend.
Tensor g_distributional_term(const TrainState& s, const TrainConfig& cfg, const Tensor& fake,
                             const MixtureSpec& data, Rng& data_rng) {
    if (const auto* m = std::get_if<SampleClassifier>(&s.adversary)) {
        Tensor p = m->predict(fake);
        if (cfg.g_loss_form == GLossForm::saturating) return log(one_minus(p));
        return neg(log(p));
    }
    const auto& m = std::get<TwoSampleDiscriminator>(s.adversary);
    const std::size_t half = cfg.batch / 2;
    Tensor x = sample_mixture(data, cfg.batch, data_rng).points;
    Tensor x1 = slice_rows(x, 0, half), x2 = slice_rows(x, half, cfg.batch);
    Tensor g1 = slice_rows(fake, 0, half), g2 = slice_rows(fake, half, cfg.batch);
    Tensor p1 = m.predict(x1, g2), p2 = m.predict(g1, x2);
    if (cfg.loss_form == LossForm::verbatim) {
        return one_minus(log(p1)) + one_minus(log(p2));
    }
    return neg(log(p1) + log(p2));
}

}  // namespace

LossRecord train_step(TrainState& s, const TrainConfig& cfg, const MixtureSpec& data) {
    if (s.iteration >= cfg.iterations) {
        throw ContractError("train_step: already ran " + std::to_string(s.iteration) + " iterations");
    }
    const std::int64_t it = s.iteration + 1;
    const std::size_t b = cfg.batch;
    LossRecord rec;
    rec.iteration = it;

    if (cfg.lambda1 > 0) {
        rec.loss_d = run_phase("discriminator objective", it, [&] {
            Tensor x = sample_mixture(data, b, s.disc_data).points;
            Tensor z = sample_noise(s.noise, b, s.disc_noise);
            Tensor fake;
            {
                NoGradGuard no_grad;
                fake = s.generator.generate(z);
            }
            Tensor objective = scale(pointwise_loss(s.discriminator, x, fake), cfg.lambda1);
            s.discriminator_params.zero_grad();
            backward(neg(objective));
            adam_step(s.discriminator_params, s.discriminator_opt);
            check_params_finite(s.discriminator_params, "discriminator", it);
            return objective.item();
        });
    }

    const bool distributional = cfg.xi != Xi::gan_only && cfg.lambda2 > 0;
    if (distributional && it % cfg.k == 0) {
        rec.loss_m = run_phase("distributional adversary objective", it, [&] {
            Tensor x = sample_mixture(data, b, s.adv_data).points;
            Tensor z = sample_noise(s.noise, b, s.adv_noise);
            Tensor fake;
            {
                NoGradGuard no_grad;
                fake = s.generator.generate(z);
            }
            Tensor objective;
            if (const auto* m = std::get_if<SampleClassifier>(&s.adversary)) {
                objective = scale(sample_classifier_loss(*m, x, fake), cfg.lambda2);
            } else {
                const auto& m2 = std::get<TwoSampleDiscriminator>(s.adversary);
                const std::size_t half = b / 2;
                Tensor x1 = slice_rows(x, 0, half), x2 = slice_rows(x, half, b);
                Tensor g1 = slice_rows(fake, 0, half), g2 = slice_rows(fake, half, b);
                Tensor total = two_sample_loss(m2, x1, x2, true, cfg.loss_form) +
                               two_sample_loss(m2, g1, g2, true, cfg.loss_form) +
                               two_sample_loss(m2, x1, g2, false, cfg.loss_form) +
                               two_sample_loss(m2, g1, x2, false, cfg.loss_form);
                objective = scale(total, cfg.lambda2 / 2.0);
            }
            s.adversary_params.zero_grad();
            backward(neg(objective));
            adam_step(s.adversary_params, s.adversary_opt);
            check_params_finite(s.adversary_params, "distributional adversary", it);
            return objective.item();
        });
    }

    rec.loss_g = run_phase("generator loss", it, [&] {
        Tensor z = sample_noise(s.noise, b, s.gen_noise);
        Tensor fake = s.generator.generate(z);
        Tensor loss;
        if (cfg.lambda1 > 0) loss = scale(g_pointwise_term(s.discriminator, fake, cfg.g_loss_form), cfg.lambda1);
        if (distributional) {
            Tensor term = scale(g_distributional_term(s, cfg, fake, data, s.gen_data), cfg.lambda2);
            loss = loss.defined() ? add(loss, term) : term;
        }
        s.generator_params.zero_grad();
        backward(loss);
        adam_step(s.generator_params, s.generator_opt);
        check_params_finite(s.generator_params, "generator", it);
        return loss.item();
    });

    s.iteration = it;
    return rec;
}

TrainResult run_training(const TrainConfig& cfg, const ModelSpec& model, const MixtureSpec& data,
                         const ProgressFn& progress) {
    validate(cfg);
    validate(data);
    auto model_errs = validation_errors(model, data.dim);
    if (!model_errs.empty()) throw ValidationError(join_lines(model_errs));

    TrainResult r{init_state(cfg, model), {}, {}, std::nullopt};
    r.trace.g_loss_form = cfg.g_loss_form;
    r.trace.records.reserve(static_cast<std::size_t>(cfg.iterations));
    r.snapshots.push_back({0, r.state.generator_params.flat_values()});
    try {
        while (r.state.iteration < cfg.iterations) {
            r.trace.records.push_back(train_step(r.state, cfg, data));
            const auto it = r.state.iteration;
            if (it % cfg.snapshot_every == 0 || it == cfg.iterations) {
                r.snapshots.push_back({it, r.state.generator_params.flat_values()});
            }
            if (progress) progress(it, cfg.iterations);
        }
    } catch (const NonFiniteError& e) {
        r.abort_reason = e.what();
    }
    return r;
}

void write_trace_csv(const std::filesystem::path& path, const LossTrace& trace) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << "iteration,loss_d,loss_m,loss_g\n";
    for (const auto& r : trace.records) {
        os << r.iteration << ',';
        if (r.loss_d) os << format_double(*r.loss_d);
        os << ',';
        if (r.loss_m) os << format_double(*r.loss_m);
        os << ',' << format_double(r.loss_g) << '\n';
    }
    os << "# g_loss_form=" << to_string(trace.g_loss_form) << '\n';
    if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace danlab
