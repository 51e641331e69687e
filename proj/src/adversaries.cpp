#include "danlab/adversaries.hpp"

#include "danlab/errors.hpp"

namespace danlab {

namespace {

void require_width(const Tensor& x, std::size_t width, const char* what) {
    if (x.shape().size() != 2 || x.cols() != width) {
        throw DimensionError(std::string(what) + ": sample " + shape_str(x.shape()) + " does not match input width " +
                             std::to_string(width));
    }
}

void require_nonempty(const Tensor& x, const char* what) {
    if (x.rows() == 0) throw EmptyInputError(std::string(what) + ": empty sample");
}

Tensor one_minus(const Tensor& p) { return sub(Tensor::scalar(1.0), p); }

}  // namespace

Tensor clamp_probability(const Tensor& p) { return clamp(p, kHeadClamp, 1.0 - kHeadClamp); }

std::string to_string(LossForm f) { return f == LossForm::verbatim ? "verbatim" : "cross_entropy"; }

LossForm loss_form_from_string(const std::string& s) {
    if (s == "cross_entropy") return LossForm::cross_entropy;
    if (s == "verbatim") return LossForm::verbatim;
    throw ValidationError("unknown loss_form '" + s + "'");
}

Tensor PointwiseDiscriminator::predict(const Tensor& x) const {
    require_width(x, net.in_features(), "PointwiseDiscriminator");
    return clamp_probability(net.forward(x));
}

Tensor DeepMeanEncoder::encode(const Tensor& sample) const {
    require_width(sample, phi.in_features(), "DeepMeanEncoder");
    require_nonempty(sample, "DeepMeanEncoder");
    return mean_over_batch(phi.forward(sample));
}

Tensor SampleClassifier::predict(const Tensor& sample) const { return predict_encoded(encoder.encode(sample)); }

Tensor SampleClassifier::predict_encoded(const Tensor& encoding) const {
    return clamp_probability(head.forward(encoding));
}

Tensor TwoSampleDiscriminator::predict(const Tensor& a, const Tensor& b) const {
    return clamp_probability(head.forward(abs(encoder.encode(a) - encoder.encode(b))));
}

PointwiseDiscriminator make_pointwise_discriminator(std::span<const std::size_t> dims, std::uint64_t seed) {
    if (dims.size() < 2 || dims.back() != 1) {
        throw DimensionError("discriminator: needs at least two extents and a single output");
    }
    return {init_mlp(dims, Activation::relu, Activation::sigmoid, seed)};
}

GeneratorNet make_generator(std::span<const std::size_t> dims, std::uint64_t seed, Activation output) {
    return {init_mlp(dims, Activation::relu, output, seed)};
}

namespace {

void check_adversary_dims(const AdversaryDims& dims) {
    if (dims.trunk.size() < 2 || dims.head.size() < 2) {
        throw DimensionError("adversary: trunk and head need at least two extents each");
    }
    if (dims.head.front() != dims.trunk.back()) {
        throw DimensionError("adversary: head input " + std::to_string(dims.head.front()) +
                             " does not match trunk output " + std::to_string(dims.trunk.back()));
    }
    if (dims.head.back() != 1) throw DimensionError("adversary: head must end in a single output");
}

template <class M>
M make_set_adversary(const AdversaryDims& dims, std::uint64_t seed) {
    check_adversary_dims(dims);
    // The trunk's last layer is a hidden layer of the full network, so it keeps the relu.
    M m;
    m.encoder.phi = init_mlp(dims.trunk, Activation::relu, Activation::relu, seed);
    m.head = init_mlp(dims.head, Activation::relu, Activation::sigmoid, seed ^ 0x9e3779b97f4a7c15ULL);
    return m;
}

}  // namespace

SampleClassifier make_sample_classifier(const AdversaryDims& dims, std::uint64_t seed) {
    return make_set_adversary<SampleClassifier>(dims, seed);
}

TwoSampleDiscriminator make_two_sample_discriminator(const AdversaryDims& dims, std::uint64_t seed) {
    return make_set_adversary<TwoSampleDiscriminator>(dims, seed);
}

void register_params(ParamStore& store, const SampleClassifier& m) {
    m.encoder.phi.register_params(store, "phi");
    m.head.register_params(store, "psi");
}

void register_params(ParamStore& store, const TwoSampleDiscriminator& m) {
    m.encoder.phi.register_params(store, "phi");
    m.head.register_params(store, "psi");
}

Tensor sample_classifier_loss(const SampleClassifier& m, const Tensor& real, const Tensor& fake) {
    return log(m.predict(real)) + log(one_minus(m.predict(fake)));
}

Tensor two_sample_loss(const TwoSampleDiscriminator& m, const Tensor& a, const Tensor& b, bool same,
                       LossForm form) {
    Tensor p = m.predict(a, b);
    if (same) return log(p);
    if (form == LossForm::verbatim) return one_minus(log(p));
    return log(one_minus(p));
}

Tensor pointwise_loss(const PointwiseDiscriminator& d, const Tensor& real, const Tensor& fake) {
    require_nonempty(real, "pointwise_loss");
    require_nonempty(fake, "pointwise_loss");
    Tensor real_term = scale(sum(log(d.predict(real))), 1.0 / static_cast<double>(real.rows()));
    Tensor fake_term = scale(sum(log(one_minus(d.predict(fake)))), 1.0 / static_cast<double>(fake.rows()));
    return real_term + fake_term;
}

}  // namespace danlab
