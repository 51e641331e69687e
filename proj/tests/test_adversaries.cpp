#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "danlab/adversaries.hpp"
#include "danlab/errors.hpp"
#include "support.hpp"

using namespace danlab;
using testsupport::random_tensor;

namespace {

const AdversaryDims kSmall{{2, 8, 8}, {8, 8, 1}};

void zero_last_layer(MlpNet& net) {
    auto& last = net.layers().back();
    for (auto& v : last.weight.mutable_data()) v = 0.0;
    for (auto& v : last.bias.mutable_data()) v = 0.0;
}

Tensor permute_rows(const Tensor& t, const std::vector<std::size_t>& perm) {
    std::vector<double> out;
    for (auto r : perm)
        for (std::size_t c = 0; c < t.cols(); ++c) out.push_back(t.at(r, c));
    return Tensor::from({perm.size(), t.cols()}, out);
}

// 1-D scalar nets given as explicit weights: phi(x) = relu(u x + v), psi(e) = sigmoid(a e + b).
SampleClassifier scalar_classifier(double u, double v, double a, double b) {
    auto m = make_sample_classifier(AdversaryDims{{1, 1}, {1, 1}}, 1);
    m.encoder.phi.layers()[0].weight.mutable_data()[0] = u;
    m.encoder.phi.layers()[0].bias.mutable_data()[0] = v;
    m.head.layers()[0].weight.mutable_data()[0] = a;
    m.head.layers()[0].bias.mutable_data()[0] = b;
    return m;
}

}  // namespace

TEST_CASE("encoder of a single point is phi of that point") {
    auto m = make_sample_classifier(kSmall, 3);
    std::mt19937_64 rng(3);
    auto x = random_tensor({1, 2}, rng, -2, 2, false);
    auto e = m.encoder.encode(x), p = m.encoder.phi.forward(x);
    for (std::size_t k = 0; k < e.numel(); ++k) CHECK(e.data()[k] == p.data()[k]);
}

TEST_CASE("encoder is permutation invariant and duplication invariant") {
    auto m = make_sample_classifier(kSmall, 4);
    std::mt19937_64 rng(4);
    auto x = random_tensor({16, 2}, rng, -2, 2, false);
    std::vector<std::size_t> perm(16);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto e = m.encoder.encode(x), ep = m.encoder.encode(permute_rows(x, perm));
    for (std::size_t k = 0; k < e.numel(); ++k) CHECK(std::fabs(e.data()[k] - ep.data()[k]) < 1e-9);

    std::vector<std::size_t> twice;
    for (std::size_t i = 0; i < 16; ++i) twice.insert(twice.end(), {i, i});
    auto ed = m.encoder.encode(permute_rows(x, twice));
    for (std::size_t k = 0; k < e.numel(); ++k) CHECK(std::fabs(e.data()[k] - ed.data()[k]) < 1e-12);
}

TEST_CASE("encoder rejects empty samples and wrong widths") {
    auto m = make_sample_classifier(kSmall, 4);
    CHECK_THROWS_AS(m.encoder.encode(Tensor::zeros({0, 2})), EmptyInputError);
    CHECK_THROWS_AS(m.encoder.encode(Tensor::zeros({3, 3})), DimensionError);
}

TEST_CASE("sample classifier loss at p = 0.5") {
    auto m = make_sample_classifier(kSmall, 5);
    zero_last_layer(m.head);
    std::mt19937_64 rng(5);
    auto real = random_tensor({8, 2}, rng, -2, 2, false), fake = random_tensor({8, 2}, rng, -2, 2, false);
    CHECK(std::fabs(sample_classifier_loss(m, real, fake).item() - 2 * std::log(0.5)) < 1e-15);
}

TEST_CASE("sample classifier loss at its clamped optimum") {
    // Real points at +1 encode to 1 and fakes at -1 encode to 0, so psi is sigmoid(+20) vs sigmoid(-20),
    // both past the head clamp.
    auto m = scalar_classifier(1.0, 0.0, 40.0, -20.0);
    auto real = Tensor::from({3, 1}, {1, 1, 1}), fake = Tensor::from({3, 1}, {-1, -1, -1});
    const double eps = kHeadClamp;
    CHECK(m.predict(real).item() == 1 - eps);
    CHECK(m.predict(fake).item() == eps);
    CHECK(std::fabs(sample_classifier_loss(m, real, fake).item() - 2 * std::log(1 - eps)) < 1e-15);
}

TEST_CASE("sample classifier loss equals an out-of-tape recomputation") {
    auto m = make_sample_classifier(kSmall, 6);
    std::mt19937_64 rng(6);
    auto real = random_tensor({32, 2}, rng, -2, 2, false), fake = random_tensor({32, 2}, rng, -2, 2, false);
    const double pr = m.predict(real).item(), pf = m.predict(fake).item();
    CHECK(std::fabs(sample_classifier_loss(m, real, fake).item() - (std::log(pr) + std::log(1 - pf))) < 1e-12);
}

TEST_CASE("heads clamp their outputs") {
    auto m = make_sample_classifier(kSmall, 7);
    m.head.layers().back().bias.mutable_data()[0] = 1e3;
    std::mt19937_64 rng(7);
    auto x = random_tensor({4, 2}, rng, -2, 2, false);
    CHECK(m.predict(x).item() == 1 - kHeadClamp);
    m.head.layers().back().bias.mutable_data()[0] = -1e3;
    CHECK(m.predict(x).item() == kHeadClamp);

    auto d = make_pointwise_discriminator(std::vector<std::size_t>{2, 4, 1}, 1);
    d.net.layers().back().bias.mutable_data()[0] = -1e3;
    const auto p = d.predict(x);
    for (double v : p.data()) CHECK(v == kHeadClamp);
}

TEST_CASE("two-sample discriminator structure") {
    auto m = make_two_sample_discriminator(kSmall, 8);
    std::mt19937_64 rng(8);
    auto a = random_tensor({10, 2}, rng, -2, 2, false), b = random_tensor({12, 2}, rng, -2, 2, false);
    auto c = random_tensor({7, 2}, rng, -2, 2, false);

    const double psi0 = clamp_probability(m.head.forward(Tensor::zeros({1, 8}))).item();
    CHECK(m.predict(a, a).item() == psi0);
    CHECK(m.predict(c, c).item() == psi0);
    CHECK(std::fabs(m.predict(a, b).item() - m.predict(b, a).item()) < 1e-9);

    CHECK(std::fabs(two_sample_loss(m, a, a, true).item() - std::log(psi0)) < 1e-15);

    zero_last_layer(m.head);
    CHECK(m.predict(a, b).item() == 0.5);
    CHECK(std::fabs(two_sample_loss(m, a, b, true).item() - std::log(0.5)) < 1e-15);
    CHECK(std::fabs(two_sample_loss(m, a, b, false).item() - std::log(0.5)) < 1e-15);
    CHECK(std::fabs(two_sample_loss(m, a, b, false, LossForm::verbatim).item() - (1 - std::log(0.5))) < 1e-15);
}

TEST_CASE("two-sample loss over the four training pairs equals an out-of-tape recomputation") {
    auto m = make_two_sample_discriminator(kSmall, 9);
    std::mt19937_64 rng(9);
    auto x = random_tensor({16, 2}, rng, -2, 2, false), g = random_tensor({16, 2}, rng, -1, 1, false);
    auto x1 = slice_rows(x, 0, 8), x2 = slice_rows(x, 8, 16), g1 = slice_rows(g, 0, 8), g2 = slice_rows(g, 8, 16);
    const double total = (two_sample_loss(m, x1, x2, true) + two_sample_loss(m, g1, g2, true) +
                          two_sample_loss(m, x1, g2, false) + two_sample_loss(m, g1, x2, false))
                             .item();
    const double oracle = std::log(m.predict(x1, x2).item()) + std::log(m.predict(g1, g2).item()) +
                          std::log(1 - m.predict(x1, g2).item()) + std::log(1 - m.predict(g1, x2).item());
    CHECK(std::fabs(total - oracle) < 1e-12);
}

TEST_CASE("pointwise loss is a mean of per-point terms") {
    auto d = make_pointwise_discriminator(std::vector<std::size_t>{2, 8, 8, 1}, 10);
    std::mt19937_64 rng(10);
    auto real = random_tensor({9, 2}, rng, -2, 2, false), fake = random_tensor({9, 2}, rng, -2, 2, false);
    double per_point = 0;
    for (std::size_t i = 0; i < 9; ++i) {
        per_point += std::log(d.predict(slice_rows(real, i, i + 1)).item()) / 9;
        per_point += std::log(1 - d.predict(slice_rows(fake, i, i + 1)).item()) / 9;
    }
    CHECK(std::fabs(pointwise_loss(d, real, fake).item() - per_point) < 1e-12);

    zero_last_layer(d.net);
    CHECK(std::fabs(pointwise_loss(d, real, fake).item() - 2 * std::log(0.5)) < 1e-15);
}

// With D equal to the optimal p/(p+q) on a discrete support, the pointwise
// objective is 2 JSD(p, q) - 2 log 2. The support is 1-D; D is realised as a
// ReLU interpolant of logit(D*) through the support points.
TEST_CASE("pointwise loss at the optimal discriminator equals 2 JSD - 2 log 2") {
    const std::vector<double> xs{-2, -1.5, -1, -0.5, 0, 0.5, 1, 1.5, 2};
    const std::vector<int> real_counts{1, 2, 6, 10, 6, 2, 1, 1, 3};   // sums to 32
    const std::vector<int> fake_counts{3, 1, 1, 2, 4, 7, 8, 4, 2};    // sums to 32
    const std::size_t k = xs.size();
    std::vector<double> p(k), q(k), logit(k);
    for (std::size_t i = 0; i < k; ++i) {
        p[i] = real_counts[i] / 32.0;
        q[i] = fake_counts[i] / 32.0;
        logit[i] = std::log(p[i] / q[i]);
    }
    LinearLayer hidden{Tensor::full({1, k - 1}, 1.0, true), Tensor::zeros({1, k - 1}, true)};
    LinearLayer out{Tensor::zeros({k - 1, 1}, true), Tensor::scalar(logit[0], true)};
    double prev_slope = 0;
    for (std::size_t j = 0; j + 1 < k; ++j) {
        hidden.bias.mutable_data()[j] = -xs[j];
        const double slope = (logit[j + 1] - logit[j]) / (xs[j + 1] - xs[j]);
        out.weight.mutable_data()[j] = slope - prev_slope;
        prev_slope = slope;
    }
    PointwiseDiscriminator d{MlpNet({hidden, out}, Activation::relu, Activation::sigmoid)};

    std::vector<double> rv, fv;
    for (std::size_t i = 0; i < k; ++i) {
        rv.insert(rv.end(), real_counts[i], xs[i]);
        fv.insert(fv.end(), fake_counts[i], xs[i]);
    }
    const double loss = pointwise_loss(d, Tensor::from({32, 1}, rv), Tensor::from({32, 1}, fv)).item();

    double jsd = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        jsd += 0.5 * p[i] * std::log(p[i] / m) + 0.5 * q[i] * std::log(q[i] / m);
    }
    CHECK(std::fabs(loss - (2 * jsd - 2 * std::log(2.0))) < 1e-9);
}

TEST_CASE("factories validate architecture") {
    CHECK_THROWS(make_sample_classifier(AdversaryDims{{2, 8}, {4, 1}}, 1));
    CHECK_THROWS(make_pointwise_discriminator(std::vector<std::size_t>{2, 8, 2}, 1));
}
