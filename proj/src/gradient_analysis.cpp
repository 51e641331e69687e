#include "danlab/gradient_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "danlab/errors.hpp"
#include "danlab/format.hpp"

namespace danlab {

DStar optimal_discriminator_from_densities(double px, double pg) {
    if (px < 0 || pg < 0) throw ValidationError("optimal_discriminator: densities must be non-negative");
    if (px < kDensityFloor && pg < kDensityFloor) return {0.5, true};
    if (px == pg) return {0.5, false};
    return {px / (px + pg), false};
}

namespace {

void require_1d(const MixtureSpec& s, const char* what) {
    if (s.dim != 1) throw ValidationError(std::string(what) + ": mixture must be 1-D, got dimension " + std::to_string(s.dim));
}

}  // namespace

DStar optimal_discriminator(const MixtureSpec& px, const MixtureSpec& pg, double x) {
    require_1d(px, "optimal_discriminator");
    require_1d(pg, "optimal_discriminator");
    const double pt[1] = {x};
    return optimal_discriminator_from_densities(density(px, pt), density(pg, pt));
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n < 2 || !(hi > lo)) throw ValidationError("linspace: need n >= 2 and hi > lo");
    std::vector<double> g(n);
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + step * static_cast<double>(i);
    g.back() = hi;
    return g;
}

WeightingCurve weighting_curve(const MixtureSpec& px, const MixtureSpec& pg, std::span<const double> grid) {
    require_1d(px, "weighting_curve");
    require_1d(pg, "weighting_curve");
    if (!std::is_sorted(grid.begin(), grid.end())) throw ValidationError("weighting_curve: grid must be sorted");
    WeightingCurve c;
    c.grid.assign(grid.begin(), grid.end());
    for (double x : grid) {
        const double pt[1] = {x};
        const double p = density(px, pt), q = density(pg, pt);
        const double dp = density_derivative_1d(px, x), dq = density_derivative_1d(pg, x);
        c.p_x.push_back(p);
        c.p_g.push_back(q);
        DStar d = optimal_discriminator_from_densities(p, q);
        c.degenerate.push_back(d.degenerate);
        if (d.degenerate) {
            c.d_star.push_back(0.5);
            c.d_star_prime.push_back(0.0);
            c.weight.push_back(0.0);
            continue;
        }
        // Densities below the floor are clamped so the ratios stay finite.
        const double pc = std::max(p, kDensityFloor), qc = std::max(q, kDensityFloor);
        const double s = pc + qc;
        const double dstar = pc / s;
        const double dprime = (dp * qc - pc * dq) / (s * s);
        c.d_star.push_back(dstar);
        c.d_star_prime.push_back(dprime);
        c.weight.push_back((dp * qc - pc * dq) / (s * pc));
    }
    return c;
}

RegionSummary region_maxima(const WeightingCurve& curve, const MixtureComponent& covered,
                            const MixtureComponent& missing) {
    const double mc = covered.mean.at(0), mm = missing.mean.at(0);
    const double half_width = 3.0 * std::sqrt(missing.variance);
    const double mid = 0.5 * (mc + mm);
    const double a_lo = std::min(mc, mid), a_hi = std::max(mc, mid);
    RegionSummary r;
    for (std::size_t i = 0; i < curve.grid.size(); ++i) {
        const double x = curve.grid[i], w = std::fabs(curve.weight[i]);
        if (x >= mm - half_width && x <= mm + half_width) r.missing_max_abs_weight = std::max(r.missing_max_abs_weight, w);
        if (x >= a_lo && x <= a_hi) r.approach_max_abs_weight = std::max(r.approach_max_abs_weight, w);
    }
    if (r.approach_max_abs_weight > 0) {
        r.ratio = r.missing_max_abs_weight / r.approach_max_abs_weight;
    } else {
        r.ratio = r.missing_max_abs_weight > 0 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    return r;
}

void write_curve_csv(const std::filesystem::path& path, const WeightingCurve& c, const RegionSummary* summary) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << "x,p_x,p_g,d_star,d_star_prime,weight\n";
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
        os << format_double(c.grid[i]) << ',' << format_double(c.p_x[i]) << ',' << format_double(c.p_g[i]) << ','
           << format_double(c.d_star[i]) << ',' << format_double(c.d_star_prime[i]) << ','
           << format_double(c.weight[i]) << '\n';
    }
    if (summary) {
        os << "# summary missing_region_max_abs_weight=" << format_double(summary->missing_max_abs_weight)
           << " approach_region_max_abs_weight=" << format_double(summary->approach_max_abs_weight)
           << " ratio=" << format_double(summary->ratio) << '\n';
    }
    if (!os) throw IoError("write failed for " + path.string());
}

// --- gradient decomposition ---------------------------------------------------------

namespace {

// Turns off gradient tracking on a set of parameters for the guard's lifetime.
class FreezeGuard {
public:
    explicit FreezeGuard(const ParamStore& store) : store_(store) {
        for (const auto& e : store_.entries()) {
            Tensor t = e.tensor;
            previous_.push_back(t.requires_grad());
            t.set_requires_grad(false);
        }
    }
    ~FreezeGuard() {
        for (std::size_t i = 0; i < store_.size(); ++i) {
            Tensor t = store_.entries()[i].tensor;
            t.set_requires_grad(previous_[i]);
        }
    }
    FreezeGuard(const FreezeGuard&) = delete;
    FreezeGuard& operator=(const FreezeGuard&) = delete;

private:
    const ParamStore& store_;
    std::vector<bool> previous_;
};

Tensor row_of(const Tensor& t, std::size_t i) { return slice_rows(t.detach(), i, i + 1); }

// Gradient wrt generator params of (1/B) <f(G(z_i)), w>, for one point.
template <class F>
std::vector<double> point_contribution(const GeneratorNet& g, ParamStore& gp, const Tensor& z, std::size_t i,
                                       std::span<const double> w, std::size_t width, double inv_b, F feature) {
    gp.zero_grad();
    Tensor out = feature(g.generate(row_of(z, i)));
    Tensor wt = Tensor::from({1, width}, std::vector<double>(w.begin(), w.end()));
    backward(scale(sum(mul(out, wt)), inv_b));
    auto grads = gp.flat_grads();
    gp.zero_grad();
    return grads;
}

std::vector<double> add_all(const std::vector<std::vector<double>>& parts, std::size_t n) {
    std::vector<double> total(n, 0.0);
    for (const auto& p : parts)
        for (std::size_t k = 0; k < n; ++k) total[k] += p[k];
    return total;
}

void require_batch(const GeneratorNet& g, const Tensor& z) {
    if (z.shape().size() != 2 || z.cols() != g.noise_dim()) {
        throw DimensionError("batch_gradient_decomposition: noise " + shape_str(z.shape()) +
                             " does not match generator input width " + std::to_string(g.noise_dim()));
    }
    if (z.rows() == 0) throw EmptyInputError("batch_gradient_decomposition: empty noise batch");
}

}  // namespace

GradientDecomposition batch_gradient_decomposition(const GeneratorNet& generator,
                                                   const PointwiseDiscriminator& discriminator, const Tensor& z) {
    require_batch(generator, z);
    if (discriminator.net.in_features() != generator.data_dim()) {
        throw DimensionError("batch_gradient_decomposition: discriminator width does not match generator output");
    }
    ParamStore gp, dp;
    generator.net.register_params(gp, "generator");
    discriminator.net.register_params(dp, "discriminator");
    FreezeGuard freeze(dp);
    const std::size_t b = z.rows(), n = generator.data_dim();
    const double inv_b = 1.0 / static_cast<double>(b);

    GradientDecomposition out;
    Tensor x;
    {
        NoGradGuard no_grad;
        x = generator.generate(z);
    }
    Tensor xl = x.detach();
    xl.set_requires_grad(true);
    backward(sum(log(discriminator.predict(xl))));
    out.weights.assign(xl.grad().begin(), xl.grad().end());

    for (std::size_t i = 0; i < b; ++i) {
        std::span<const double> w(out.weights.data() + i * n, n);
        out.per_point.push_back(point_contribution(generator, gp, z, i, w, n, inv_b, [](const Tensor& t) { return t; }));
    }
    out.reconstructed = add_all(out.per_point, gp.total_numel());

    gp.zero_grad();
    backward(scale(sum(log(discriminator.predict(generator.generate(z.detach())))), inv_b));
    out.autodiff = gp.flat_grads();
    gp.zero_grad();
    return out;
}

GradientDecomposition batch_gradient_decomposition(const GeneratorNet& generator, const SampleClassifier& adversary,
                                                   const Tensor& z) {
    require_batch(generator, z);
    if (adversary.encoder.input_dim() != generator.data_dim()) {
        throw DimensionError("batch_gradient_decomposition: encoder width does not match generator output");
    }
    ParamStore gp, ap;
    generator.net.register_params(gp, "generator");
    register_params(ap, adversary);
    FreezeGuard freeze(ap);
    const std::size_t b = z.rows(), d = adversary.encoder.encoding_dim();
    const double inv_b = 1.0 / static_cast<double>(b);

    GradientDecomposition out;
    Tensor eta;
    {
        NoGradGuard no_grad;
        eta = adversary.encoder.encode(generator.generate(z));
    }
    Tensor eta_leaf = eta.detach();
    eta_leaf.set_requires_grad(true);
    backward(log(adversary.predict_encoded(eta_leaf)));
    out.weights.assign(eta_leaf.grad().begin(), eta_leaf.grad().end());

    auto phi = [&](const Tensor& x) { return adversary.encoder.phi.forward(x); };
    for (std::size_t i = 0; i < b; ++i) {
        out.per_point.push_back(point_contribution(generator, gp, z, i, out.weights, d, inv_b, phi));
    }
    out.reconstructed = add_all(out.per_point, gp.total_numel());

    gp.zero_grad();
    backward(log(adversary.predict(generator.generate(z.detach()))));
    out.autodiff = gp.flat_grads();
    gp.zero_grad();
    return out;
}

}  // namespace danlab
