#include <doctest.h>

#include <cmath>
#include <random>

#include "danlab/errors.hpp"
#include "danlab/nn.hpp"
#include "support.hpp"

using namespace danlab;
using testsupport::finite_difference_check;
using testsupport::random_tensor;

TEST_CASE("init is deterministic and biases start at zero") {
    const std::vector<std::size_t> dims{2, 32, 1};
    auto a = init_mlp(dims, Activation::relu, Activation::sigmoid, 5);
    auto b = init_mlp(dims, Activation::relu, Activation::sigmoid, 5);
    ParamStore sa, sb;
    a.register_params(sa, "net");
    b.register_params(sb, "net");
    CHECK(sa.flat_values() == sb.flat_values());
    for (const auto& layer : a.layers()) {
        for (double v : layer.bias.data()) CHECK(v == 0.0);
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.in_features() + layer.out_features()));
        for (double v : layer.weight.data()) CHECK(std::fabs(v) <= bound);
    }
    auto c = init_mlp(dims, Activation::relu, Activation::sigmoid, 6);
    ParamStore sc;
    c.register_params(sc, "net");
    CHECK(sc.flat_values() != sa.flat_values());
}

TEST_CASE("zero-weight net with sigmoid output gives 0.5") {
    const std::vector<std::size_t> dims{3, 4, 1};
    auto net = init_mlp(dims, Activation::relu, Activation::sigmoid, 1);
    ParamStore s;
    net.register_params(s, "net");
    s.set_flat_values(std::vector<double>(s.total_numel(), 0.0));
    std::mt19937_64 rng(1);
    auto out = net.forward(random_tensor({5, 3}, rng, -2, 2, false));
    for (double v : out.data()) CHECK(v == 0.5);
}

TEST_CASE("single affine layer") {
    LinearLayer l{Tensor::matrix({{2}}, true), Tensor::matrix({{1}}, true)};
    MlpNet net({l}, Activation::relu, Activation::none);
    CHECK(net.forward(Tensor::matrix({{3}})).item() == 7.0);
}

TEST_CASE("identical rows give identical outputs") {
    const std::vector<std::size_t> dims{2, 8, 8, 3};
    auto net = init_mlp(dims, Activation::relu, Activation::tanh, 9);
    auto x = Tensor::from({4, 2}, {0.3, -0.7, 0.3, -0.7, 0.3, -0.7, 0.3, -0.7});
    auto y = net.forward(x);
    for (std::size_t r = 1; r < 4; ++r)
        for (std::size_t c = 0; c < 3; ++c) CHECK(y.at(r, c) == y.at(0, c));
}

TEST_CASE("forward rejects the wrong width and mismatched layers") {
    const std::vector<std::size_t> dims{2, 4, 1};
    auto net = init_mlp(dims, Activation::relu, Activation::none, 1);
    CHECK_THROWS_AS(net.forward(Tensor::zeros({3, 5})), DimensionError);
    LinearLayer a{Tensor::zeros({2, 3}, true), Tensor::zeros({1, 3}, true)};
    LinearLayer b{Tensor::zeros({4, 1}, true), Tensor::zeros({1, 1}, true)};
    CHECK_THROWS(MlpNet({a, b}, Activation::relu, Activation::none));
}

TEST_CASE("input gradient of an MLP matches finite differences") {
    const std::vector<std::size_t> dims{3, 6, 6, 2};
    auto net = init_mlp(dims, Activation::tanh, Activation::sigmoid, 4);
    std::mt19937_64 rng(4);
    auto x = random_tensor({5, 3}, rng);
    auto res = finite_difference_check([&] { return sum(net.forward(x)); }, {x});
    CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("forward and backward leave parameters unchanged") {
    const std::vector<std::size_t> dims{2, 8, 1};
    auto net = init_mlp(dims, Activation::relu, Activation::sigmoid, 3);
    ParamStore s;
    net.register_params(s, "net");
    auto before = s.flat_values();
    std::mt19937_64 rng(3);
    backward(sum(log(net.forward(random_tensor({6, 2}, rng, -2, 2, false)))));
    CHECK(s.flat_values() == before);
}

TEST_CASE("param store rejects duplicates and names params by layer") {
    const std::vector<std::size_t> dims{2, 3, 1};
    auto net = init_mlp(dims, Activation::relu, Activation::none, 1);
    ParamStore s;
    net.register_params(s, "g");
    CHECK(s.entries()[0].name == "g.0.weight");
    CHECK(s.entries()[3].name == "g.1.bias");
    CHECK_THROWS_AS(net.register_params(s, "g"), ContractError);
}

// Hand evaluation of the bias-corrected recurrences at t = 1:
// m = (1-b1) g, v = (1-b2) g^2, m_hat = g, v_hat = g^2, step = lr g / (|g| + eps).
TEST_CASE("adam first step on a scalar") {
    ParamStore s;
    auto w = Tensor::matrix({{0.0}}, true);
    s.add("w", w);
    AdamState st(s, AdamSettings{0.1, 0.9, 0.999, 1e-8});
    backward(w);  // grad = 1
    adam_step(s, st);
    const double expected = -0.1 * 1.0 / (1.0 + 1e-8);
    CHECK(std::fabs(w.item() - expected) < 1e-15);
    CHECK(std::fabs(w.item() + 0.1) < 1e-8);
}

TEST_CASE("adam leaves parameters fixed under zero gradient") {
    ParamStore s;
    auto w = Tensor::matrix({{1.5, -2.0}}, true);
    s.add("w", w);
    AdamState st(s, AdamSettings{});
    backward(sum(scale(w, 0.0)));
    adam_step(s, st);
    CHECK(w.data()[0] == 1.5);
    CHECK(w.data()[1] == -2.0);
}

TEST_CASE("adam first steps with g and -g are mirror images") {
    std::mt19937_64 rng(8);
    auto w0 = random_tensor({3, 3}, rng);
    auto g = random_tensor({3, 3}, rng, -1, 1, false);
    auto step = [&](double sign) {
        auto w = w0.clone();
        ParamStore s;
        s.add("w", w);
        AdamState st(s, AdamSettings{1e-3, 0.5, 0.999, 1e-8});
        backward(sum(mul(w, scale(g, sign))));
        adam_step(s, st);
        std::vector<double> d;
        for (std::size_t i = 0; i < w.numel(); ++i) d.push_back(w.data()[i] - w0.data()[i]);
        return d;
    };
    auto up = step(1.0), down = step(-1.0);
    for (std::size_t i = 0; i < up.size(); ++i) CHECK(up[i] == -down[i]);
}

TEST_CASE("adam converges on a quadratic") {
    ParamStore s;
    auto w = Tensor::matrix({{0.0}}, true);
    s.add("w", w);
    AdamState st(s, AdamSettings{1e-2, 0.9, 0.999, 1e-8});
    for (int i = 0; i < 5000; ++i) {
        auto d = sub(w, Tensor::scalar(3.0));
        backward(mul(d, d));
        adam_step(s, st);
    }
    CHECK(std::fabs(w.item() - 3.0) < 1e-2);
}

TEST_CASE("adam requires a populated gradient for every parameter") {
    ParamStore s;
    auto a = Tensor::matrix({{1.0}}, true);
    auto b = Tensor::matrix({{1.0}}, true);
    s.add("a", a);
    s.add("b", b);
    AdamState st(s, AdamSettings{});
    backward(a);
    try {
        adam_step(s, st);
        FAIL("expected ContractError");
    } catch (const ContractError& e) {
        CHECK(std::string(e.what()).find("b") != std::string::npos);
    }
}

TEST_CASE("checkpoint round trip is bitwise and load checks names and shapes") {
    testsupport::TempDir dir("ckpt");
    const std::vector<std::size_t> dims{2, 5, 1};
    auto net = init_mlp(dims, Activation::relu, Activation::sigmoid, 12);
    ParamStore s;
    net.register_params(s, "d");
    save_checkpoint(dir.path / "d.ckpt", s, 12, "discriminator");

    auto other = init_mlp(dims, Activation::relu, Activation::sigmoid, 13);
    ParamStore t;
    other.register_params(t, "d");
    auto ck = read_checkpoint(dir.path / "d.ckpt");
    CHECK(ck.seed == 12);
    CHECK(ck.network == "discriminator");
    load_into(t, ck);
    CHECK(t.flat_values() == s.flat_values());

    const std::vector<std::size_t> wider{2, 6, 1};
    auto wrong = init_mlp(wider, Activation::relu, Activation::sigmoid, 1);
    ParamStore u;
    wrong.register_params(u, "d");
    CHECK_THROWS_AS(load_into(u, ck), LoadError);

    ParamStore renamed;
    other.register_params(renamed, "x");
    CHECK_THROWS_AS(load_into(renamed, ck), LoadError);

    CHECK_THROWS_AS(read_checkpoint(dir.path / "missing.ckpt"), LoadError);
}
