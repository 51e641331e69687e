#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "danlab/tensor.hpp"

namespace testsupport {

using danlab::Tensor;

inline Tensor random_tensor(danlab::Shape shape, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0,
                            bool requires_grad = true) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(danlab::shape_numel(shape));
    for (auto& x : v) x = u(rng);
    return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Relative error; the floor keeps near-zero gradients from dividing by round-off.
inline double rel_err(double a, double b, double floor = 1e-6) {
    return std::fabs(a - b) / std::max({floor, std::fabs(a), std::fabs(b)});
}

struct GradCheck {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

// Central differences of a scalar function against the grads left by backward().
// `skip` lets callers exclude coordinates where the function is not smooth.
inline GradCheck finite_difference_check(const std::function<Tensor()>& loss_fn, std::vector<Tensor> leaves,
                                         double h = 1e-5,
                                         const std::function<bool(std::size_t, std::size_t)>& skip = {}) {
    for (auto& t : leaves) t.zero_grad();
    danlab::backward(loss_fn());
    GradCheck out;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        Tensor t = leaves[li];
        const auto analytic = t.grad();
        auto data = t.mutable_data();
        for (std::size_t k = 0; k < data.size(); ++k) {
            if (skip && skip(li, k)) continue;
            const double orig = data[k];
            double fp, fm;
            {
                danlab::NoGradGuard ng;
                data[k] = orig + h;
                fp = loss_fn().item();
                data[k] = orig - h;
                fm = loss_fn().item();
            }
            data[k] = orig;
            const double numeric = (fp - fm) / (2 * h);
            out.max_rel_err = std::max(out.max_rel_err, rel_err(analytic[k], numeric));
            ++out.checked;
        }
    }
    return out;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path = std::filesystem::temp_directory_path() / ("danlab-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

inline std::string read_file(const std::filesystem::path& p) {
    std::FILE* f = std::fopen(p.string().c_str(), "rb");
    if (!f) return {};
    std::string s;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) s.append(buf, n);
    std::fclose(f);
    return s;
}

}  // namespace testsupport
