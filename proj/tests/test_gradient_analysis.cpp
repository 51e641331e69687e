#include <doctest.h>

#include <cmath>
#include <random>

#include "danlab/errors.hpp"
#include "danlab/gradient_analysis.hpp"
#include "support.hpp"

using namespace danlab;

namespace {

MixtureSpec bimodal() { return make_mixture({{{-2.0}, 0.0625, 0.5}, {{2.0}, 0.0625, 0.5}}); }
MixtureSpec covered() { return make_mixture({{{-2.0}, 0.0625, 1.0}}); }

double norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("optimal discriminator basics") {
    auto px = bimodal();
    CHECK(optimal_discriminator(px, px, 0.3).value == 0.5);
    CHECK(optimal_discriminator(px, covered(), 2.0).value > 1 - 1e-6);
    auto left = make_mixture({{{-1.0}, 0.25, 1.0}}), right = make_mixture({{{1.0}, 0.25, 1.0}});
    CHECK(std::fabs(optimal_discriminator(left, right, 0.0).value - 0.5) < 1e-15);
    CHECK_THROWS_AS(optimal_discriminator(ring_mixture(8, 2, 0.01), px, 0.0), ValidationError);

    auto far = optimal_discriminator(px, covered(), 1e6);
    CHECK(far.degenerate);
    CHECK(far.value == 0.5);
}

TEST_CASE("optimal discriminator is invariant to a common density scale") {
    for (double p : {0.1, 2.5, 1e-7}) {
        for (double q : {0.3, 4.0}) {
            const double base = optimal_discriminator_from_densities(p, q).value;
            for (double s : {1e-3, 7.0, 1e5}) {
                CHECK(std::fabs(optimal_discriminator_from_densities(s * p, s * q).value - base) < 1e-15);
            }
        }
    }
}

TEST_CASE("weight is the log-derivative of D*") {
    const auto grid = linspace(-4, 4, 801);
    auto c = weighting_curve(bimodal(), covered(), grid);
    const double h = 1e-5;
    std::size_t checked = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (c.degenerate[i]) continue;
        const double up = optimal_discriminator(bimodal(), covered(), grid[i] + h).value;
        const double dn = optimal_discriminator(bimodal(), covered(), grid[i] - h).value;
        if (up < 1e-250 || dn < 1e-250) continue;
        const double fd_log = (std::log(up) - std::log(dn)) / (2 * h);
        CHECK(std::fabs(c.weight[i] - fd_log) < 1e-6 * std::max(1.0, std::fabs(fd_log)));
        // Analytic identity, independent of finite differences.
        CHECK(std::fabs(c.weight[i] - c.d_star_prime[i] / c.d_star[i]) < 1e-9 * std::max(1.0, std::fabs(c.weight[i])));
        ++checked;
    }
    CHECK(checked > 700);
}

TEST_CASE("analytic dD*/dx matches finite differences") {
    const auto grid = linspace(-4, 4, 161);
    auto c = weighting_curve(bimodal(), covered(), grid);
    const double h = 1e-6;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double fd = (optimal_discriminator(bimodal(), covered(), grid[i] + h).value -
                           optimal_discriminator(bimodal(), covered(), grid[i] - h).value) /
                          (2 * h);
        CHECK(testsupport::rel_err(c.d_star_prime[i], fd, 1e-3) < 1e-6);
    }
}

TEST_CASE("weight vanishes at an extremum of D*") {
    // D* is symmetric about 0 for these mirrored densities, so it has an extremum there.
    auto p = make_mixture({{{-1.0}, 0.5, 0.5}, {{1.0}, 0.5, 0.5}});
    auto q = make_mixture({{{0.0}, 1.0, 1.0}});
    const std::vector<double> grid{-0.5, 0.0, 0.5};
    auto c = weighting_curve(p, q, grid);
    CHECK(std::fabs(c.weight[1]) < 1e-12);
}

TEST_CASE("equal distributions give a flat curve") {
    auto c = weighting_curve(bimodal(), bimodal(), linspace(-4, 4, 101));
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
        CHECK(c.d_star[i] == 0.5);
        CHECK(std::fabs(c.weight[i]) < 1e-12);
    }
}

TEST_CASE("weight is negligible at the missed mode") {
    auto px = bimodal();
    auto c = weighting_curve(px, covered(), linspace(-4, 4, 801));
    auto r = region_maxima(c, px.components[0], px.components[1]);
    CHECK(r.approach_max_abs_weight > 0);
    CHECK(r.missing_max_abs_weight < 0.1 * r.approach_max_abs_weight);
    CHECK(r.ratio == doctest::Approx(r.missing_max_abs_weight / r.approach_max_abs_weight));
}

TEST_CASE("grid must be sorted and mixtures 1-D") {
    const std::vector<double> unsorted{0, 1, 0.5};
    CHECK_THROWS_AS(weighting_curve(bimodal(), covered(), unsorted), ValidationError);
    const std::vector<double> g{0.0};
    CHECK_THROWS_AS(weighting_curve(ring_mixture(8, 2, 0.01), covered(), g), ValidationError);
    CHECK_THROWS_AS(linspace(1, 0, 5), ValidationError);
}

TEST_CASE("curve csv has a header, fixed columns and a summary footer") {
    testsupport::TempDir dir("curve");
    auto px = bimodal();
    auto c = weighting_curve(px, covered(), linspace(-4, 4, 11));
    auto r = region_maxima(c, px.components[0], px.components[1]);
    write_curve_csv(dir.path / "c.csv", c, &r);
    auto text = testsupport::read_file(dir.path / "c.csv");
    CHECK(text.rfind("x,p_x,p_g,d_star,d_star_prime,weight\n", 0) == 0);
    CHECK(text.find("# summary missing_region_max_abs_weight=") != std::string::npos);
    CHECK(text.find('\r') == std::string::npos);
    std::size_t lines = 0;
    for (char ch : text) lines += ch == '\n';
    CHECK(lines == 13);
}

TEST_CASE("batch decompositions reproduce autodiff") {
    auto gen = make_generator(std::vector<std::size_t>{3, 6, 2}, 1);
    auto disc = make_pointwise_discriminator(std::vector<std::size_t>{2, 6, 1}, 2);
    auto sc = make_sample_classifier(AdversaryDims{{2, 6}, {6, 4, 1}}, 3);
    std::mt19937_64 rng(5);
    auto z = testsupport::random_tensor({4, 3}, rng, -1, 1, false);

    auto pw = batch_gradient_decomposition(gen, disc, z);
    CHECK(pw.per_point.size() == 4);
    CHECK(pw.weights.size() == 8);
    CHECK(max_abs_diff(pw.reconstructed, pw.autodiff) < 1e-9);

    auto s = batch_gradient_decomposition(gen, sc, z);
    CHECK(s.weights.size() == 6);
    CHECK(max_abs_diff(s.reconstructed, s.autodiff) < 1e-9);

    CHECK_THROWS_AS(batch_gradient_decomposition(gen, disc, Tensor::zeros({0, 3})), EmptyInputError);
    CHECK_THROWS_AS(batch_gradient_decomposition(gen, disc, Tensor::zeros({2, 4})), DimensionError);
}

TEST_CASE("pointwise contributions are separable and sample-classifier ones are not") {
    auto gen = make_generator(std::vector<std::size_t>{3, 6, 2}, 11);
    auto disc = make_pointwise_discriminator(std::vector<std::size_t>{2, 6, 1}, 12);
    auto sc = make_sample_classifier(AdversaryDims{{2, 6}, {6, 4, 1}}, 13);
    std::mt19937_64 rng(6);
    auto z = testsupport::random_tensor({4, 3}, rng, -1, 1, false);
    auto z2 = z.clone();
    for (std::size_t c = 0; c < 3; ++c) z2.mutable_data()[3 + c] += 0.37;  // move point 1 only

    auto a = batch_gradient_decomposition(gen, disc, z), b = batch_gradient_decomposition(gen, disc, z2);
    CHECK(norm_diff(a.per_point[0], b.per_point[0]) < 1e-12);

    auto s = batch_gradient_decomposition(gen, sc, z), t = batch_gradient_decomposition(gen, sc, z2);
    CHECK(norm_diff(s.per_point[0], t.per_point[0]) > 1e-6);
}
