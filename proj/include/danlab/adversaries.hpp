#pragma once

// Pointwise and distributional adversaries.
//
// Every head ends in a sigmoid whose output is clamped to
// [kHeadClamp, 1 - kHeadClamp] before it reaches a log. Loss functions return
// the objective the adversary *ascends*; trainers negate before descending.

#include <cstdint>
#include <span>

#include "danlab/nn.hpp"

namespace danlab {

inline constexpr double kHeadClamp = 1e-7;

Tensor clamp_probability(const Tensor& p);

/// How the two-sample "different" term enters the objective.
enum class LossForm {
    cross_entropy,  // log(1 - p)
    verbatim,       // 1 - log(p), the literal printed form; kept for comparison only
};

std::string to_string(LossForm f);
LossForm loss_form_from_string(const std::string& s);

struct GeneratorNet {
    MlpNet net;  // R^m -> R^n

    Tensor generate(const Tensor& z) const { return net.forward(z); }
    std::size_t noise_dim() const { return net.in_features(); }
    std::size_t data_dim() const { return net.out_features(); }
};

struct PointwiseDiscriminator {
    MlpNet net;  // R^n -> (0,1), sigmoid output

    /// Clamped per-point probabilities [B×1].
    Tensor predict(const Tensor& x) const;
};

/// eta(sample) = mean_i phi(x_i).
struct DeepMeanEncoder {
    MlpNet phi;

    Tensor encode(const Tensor& sample) const;
    std::size_t input_dim() const { return phi.in_features(); }
    std::size_t encoding_dim() const { return phi.out_features(); }
};

/// psi_S(eta(sample)): probability that a whole sample came from the data.
struct SampleClassifier {
    DeepMeanEncoder encoder;
    MlpNet head;  // d_enc -> (0,1)

    Tensor predict(const Tensor& sample) const;  // [1×1]
    /// Head applied to a precomputed encoding.
    Tensor predict_encoded(const Tensor& encoding) const;
};

/// psi_2S(|eta(a) - eta(b)|): probability that two samples share a distribution.
/// The encoder is shared between both arguments.
struct TwoSampleDiscriminator {
    DeepMeanEncoder encoder;
    MlpNet head;

    Tensor predict(const Tensor& a, const Tensor& b) const;  // [1×1]
};

/// Adversary architecture: phi trunk dims and head dims (head[0] == trunk.back()).
struct AdversaryDims {
    std::vector<std::size_t> trunk{2, 32, 32};
    std::vector<std::size_t> head{32, 32, 1};
};

PointwiseDiscriminator make_pointwise_discriminator(std::span<const std::size_t> dims, std::uint64_t seed);
GeneratorNet make_generator(std::span<const std::size_t> dims, std::uint64_t seed,
                            Activation output = Activation::none);
SampleClassifier make_sample_classifier(const AdversaryDims& dims, std::uint64_t seed);
TwoSampleDiscriminator make_two_sample_discriminator(const AdversaryDims& dims, std::uint64_t seed);

void register_params(ParamStore& store, const SampleClassifier& m);
void register_params(ParamStore& store, const TwoSampleDiscriminator& m);

/// log psi_S(eta(real)) + log(1 - psi_S(eta(fake))).
Tensor sample_classifier_loss(const SampleClassifier& m, const Tensor& real, const Tensor& fake);

/// same: log p; otherwise log(1 - p) (or 1 - log p under LossForm::verbatim).
Tensor two_sample_loss(const TwoSampleDiscriminator& m, const Tensor& a, const Tensor& b, bool same,
                       LossForm form = LossForm::cross_entropy);

/// mean log D(real) + mean log(1 - D(fake)).
Tensor pointwise_loss(const PointwiseDiscriminator& d, const Tensor& real, const Tensor& fake);

}  // namespace danlab
