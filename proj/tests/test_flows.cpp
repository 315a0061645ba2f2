#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "toytts/flows.hpp"
#include "toytts/ops.hpp"

using namespace toytts;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) {
        x = rng.uniform(lo, hi);
    }
    return Tensor::from_data(std::move(shape), std::move(v));
}

void randomize(const std::vector<NamedParam>& params, Rng& rng, double width) {
    for (const auto& p : params) {
        Tensor t = p.tensor;
        for (double& v : t.mutable_data()) {
            v = rng.uniform(-width, width);
        }
    }
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    }
    return m;
}

// log|det A| by Gaussian elimination with partial pivoting.
double log_abs_det(std::vector<double> a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) {
                piv = r;
            }
        }
        for (std::size_t c = 0; c < n; ++c) {
            std::swap(a[col * n + c], a[piv * n + c]);
        }
        const double p = a[col * n + col];
        acc += std::log(std::abs(p));
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / p;
            for (std::size_t c = col; c < n; ++c) {
                a[r * n + c] -= f * a[col * n + c];
            }
        }
    }
    return acc;
}

// Central-difference Jacobian of a (C, T) -> (C, T) map, row-major n x n.
template <class F>
std::vector<double> numeric_jacobian(const F& f, const Tensor& x, double h = 1e-6) {
    const std::size_t n = x.numel();
    std::vector<double> jac(n * n);
    for (std::size_t k = 0; k < n; ++k) {
        Tensor plus = x.detach(), minus = x.detach();
        plus.mutable_data()[k] += h;
        minus.mutable_data()[k] -= h;
        const Tensor yp = f(plus), ym = f(minus);
        for (std::size_t i = 0; i < n; ++i) {
            jac[i * n + k] = (yp.data()[i] - ym.data()[i]) / (2 * h);
        }
    }
    return jac;
}

}  // namespace

TEST_CASE("fresh coupling layer is the identity") {
    Rng rng(1);
    CouplingLayer layer(CouplingConfig{}, rng);
    const Tensor x = random_tensor({4, 6}, rng);
    const FlowOutput out = layer.forward(x);
    CHECK(max_abs_diff(out.y, x) == 0.0);
    CHECK(out.logdet.item() == 0.0);
    CHECK(max_abs_diff(layer.inverse(x), x) == 0.0);
}

TEST_CASE("forced scale and shift follow the affine law") {
    Rng rng(2);
    CouplingConfig cfg;
    cfg.channels = 2;
    CouplingLayer layer(cfg, rng);
    // Head weights are zero from construction; only the bias remains.
    layer.head().bias.mutable_data()[0] = std::log(2.0);
    layer.head().bias.mutable_data()[1] = 3.0;
    const Tensor x = Tensor::matrix({{0.4}, {1.5}});
    const FlowOutput out = layer.forward(x);
    CHECK(out.y.at(0, 0) == 0.4);
    CHECK(out.y.at(1, 0) == doctest::Approx(2 * 1.5 + 3).epsilon(1e-15));
    CHECK(out.logdet.item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    const Tensor back = layer.inverse(out.y);
    CHECK(back.at(0, 0) == 0.4);
    CHECK(back.at(1, 0) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("log-scale is clamped") {
    Rng rng(3);
    CouplingConfig cfg;
    cfg.channels = 2;
    CouplingLayer layer(cfg, rng);
    fill(layer.head().bias, 100.0);
    const Tensor x = random_tensor({2, 3}, rng);
    const FlowOutput out = layer.forward(x);
    CHECK(out.logdet.item() == 3 * 8.0);
    CHECK(max_abs_diff(layer.inverse(out.y), x) <= 1e-8);
}

TEST_CASE("odd channel counts are rejected") {
    Rng rng(4);
    CouplingConfig cfg;
    cfg.channels = 3;
    CHECK_THROWS_AS(CouplingLayer(cfg, rng), ContractError);
    CouplingLayer ok(CouplingConfig{}, rng);
    CHECK_THROWS_AS(ok.forward(Tensor::zeros({3, 4})), ShapeError);
}

TEST_CASE("coupling round trip on 100 random cases") {
    Rng rng(5);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        CouplingConfig cfg;
        cfg.channels = 2 * static_cast<std::size_t>(rng.uniform_int(1, 3));
        cfg.cond_width = trial % 2 ? 3 : 0;
        CouplingLayer layer(cfg, rng);
        randomize(layer.parameters(), rng, 0.6);
        const Tensor x = random_tensor({cfg.channels, static_cast<std::size_t>(rng.uniform_int(1, 12))}, rng, -3, 3);
        const Tensor cond = cfg.cond_width ? random_tensor({3, 1}, rng) : Tensor{};
        const FlowOutput out = layer.forward(x, cond);
        worst = std::max(worst, max_abs_diff(layer.inverse(out.y, cond), x));
        // First half passes through untouched.
        for (std::size_t c = 0; c < cfg.channels / 2; ++c) {
            for (std::size_t t = 0; t < x.dim(1); ++t) {
                CHECK(out.y.at(c, t) == x.at(c, t));
            }
        }
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("stack round trip on 50 seeds") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        CouplingConfig cfg;
        cfg.cond_width = 2;
        FlowStack stack(cfg, 2 + seed % 3, rng);
        randomize(stack.parameters(), rng, 0.5);
        const Tensor x = random_tensor({4, 1 + seed % 9}, rng, -3, 3);
        const Tensor cond = random_tensor({2, 1}, rng);
        CHECK(max_abs_diff(stack.inverse(stack.forward(x, cond).y, cond), x) <= 1e-8);
    }
}

TEST_CASE("identity stack of depth two returns the input") {
    Rng rng(6);
    FlowStack stack(CouplingConfig{}, 2, rng);
    const Tensor x = random_tensor({4, 5}, rng);
    const FlowOutput out = stack.forward(x);
    // Two flips compose to the identity.
    CHECK(max_abs_diff(out.y, x) == 0.0);
    CHECK(out.logdet.item() == 0.0);
    FlowStack three(CouplingConfig{}, 3, rng);
    CHECK(max_abs_diff(three.forward(x).y, flip_rows(x)) == 0.0);
    CHECK_THROWS_AS(FlowStack(CouplingConfig{}, 1, rng), ContractError);
}

TEST_CASE("log-determinant matches a dense numerical Jacobian") {
    Rng rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        CouplingConfig cfg;
        cfg.channels = trial % 2 ? 2 : 4;
        const std::size_t t = cfg.channels == 2 ? static_cast<std::size_t>(rng.uniform_int(1, 4))
                                                : static_cast<std::size_t>(rng.uniform_int(1, 2));
        CouplingLayer layer(cfg, rng);
        randomize(layer.parameters(), rng, 0.7);
        const Tensor x = random_tensor({cfg.channels, t}, rng, -2, 2);
        const auto jac = numeric_jacobian([&](const Tensor& v) { return layer.forward(v).y; }, x);
        const double numeric = log_abs_det(jac, x.numel());
        CHECK(std::abs(layer.forward(x).logdet.item() - numeric) <= 1e-4);

        FlowStack stack(cfg, 3, rng);
        randomize(stack.parameters(), rng, 0.5);
        const auto sjac = numeric_jacobian([&](const Tensor& v) { return stack.forward(v).y; }, x);
        CHECK(std::abs(stack.forward(x).logdet.item() - log_abs_det(sjac, x.numel())) <= 1e-4);
    }
}

TEST_CASE("stack logdet is the sum of layer logdets in any order") {
    Rng rng(8);
    FlowStack stack(CouplingConfig{}, 4, rng);
    randomize(stack.parameters(), rng, 0.5);
    const Tensor x = random_tensor({4, 7}, rng);
    const auto parts = stack.layer_logdets(x);
    REQUIRE(parts.size() == 4);
    double fwd = 0.0, rev = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        fwd += parts[i].item();
        rev += parts[3 - i].item();
    }
    const FlowOutput out = stack.forward(x);
    CHECK(out.logdet.item() == fwd);
    CHECK(std::abs(fwd - rev) <= 1e-12);

    // Base log-density plus logdet gives the same log p(x) either way.
    double base = 0.0;
    for (double z : out.y.data()) {
        base += -0.5 * z * z - 0.5 * std::log(2 * std::numbers::pi);
    }
    CHECK(std::abs((base + fwd) - (base + rev)) <= 1e-12);
}

TEST_CASE("zero attention scale reduces to a pure convolutional coupling") {
    Rng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        CouplingConfig cfg;
        CouplingLayer layer(cfg, rng);
        randomize(layer.parameters(), rng, 0.7);
        CouplingLayer conv_only = layer;
        conv_only.mutable_config().use_transformer = false;
        layer.mutable_config().attention_scale = 0.0;
        const Tensor x = random_tensor({4, 6}, rng);
        const FlowOutput a = layer.forward(x), b = conv_only.forward(x);
        CHECK(max_abs_diff(a.y, b.y) == 0.0);
        CHECK(a.logdet.item() == b.logdet.item());
        // Nonzero scale does make a difference.
        layer.mutable_config().attention_scale = 1.0;
        CHECK(max_abs_diff(layer.forward(x).y, b.y) > 0.0);
    }
}

TEST_CASE("disabled transformer keeps attention weights off the tape") {
    Rng rng(10);
    CouplingConfig cfg;
    cfg.use_transformer = false;
    CouplingLayer layer(cfg, rng);
    randomize(layer.parameters(), rng, 0.5);
    const FlowOutput out = layer.forward(random_tensor({4, 5}, rng));
    CHECK_FALSE(layer.transformer_active());
    for (const auto& p : layer.attention_parameters()) {
        CHECK_FALSE(graph_contains(out.logdet, p.tensor));
    }
}

TEST_CASE("single position attention is one") {
    Rng rng(11);
    CouplingLayer layer(CouplingConfig{}, rng);
    const Tensor a = layer.attention(random_tensor({4, 1}, rng));
    REQUIRE(a.shape() == Shape{1, 1});
    CHECK(a.item() == 1.0);
}

TEST_CASE("zero query and key weights give uniform attention") {
    Rng rng(12);
    CouplingLayer layer(CouplingConfig{}, rng);
    layer.query().zero();
    layer.key().zero();
    const Tensor a = layer.attention(random_tensor({4, 5}, rng));
    for (double v : a.data()) {
        CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
    }
}

TEST_CASE("attention rows are stochastic and extraction has no side effects") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        FlowStack stack(CouplingConfig{}, 3, rng);
        randomize(stack.parameters(), rng, 2.0);
        const Tensor x = random_tensor({4, static_cast<std::size_t>(rng.uniform_int(1, 10))}, rng, -3, 3);
        const FlowOutput before = stack.forward(x);
        const auto maps = stack.attention_maps(x);
        REQUIRE(maps.size() == 3);
        for (const Tensor& m : maps) {
            CHECK_FALSE(m.requires_grad());
            for (std::size_t r = 0; r < m.dim(0); ++r) {
                double total = 0.0;
                for (std::size_t c = 0; c < m.dim(1); ++c) {
                    CHECK(m.at(r, c) >= 0.0);
                    total += m.at(r, c);
                }
                CHECK(std::abs(total - 1.0) <= 1e-10);
            }
        }
        const FlowOutput after = stack.forward(x);
        CHECK(max_abs_diff(before.y, after.y) == 0.0);
        for (const auto& p : stack.parameters()) {
            CHECK_FALSE(p.tensor.has_grad());
        }
    }
}

TEST_CASE("conditioning changes the transform") {
    Rng rng(14);
    CouplingConfig cfg;
    cfg.cond_width = 2;
    CouplingLayer layer(cfg, rng);
    randomize(layer.parameters(), rng, 0.5);
    const Tensor x = random_tensor({4, 3}, rng);
    const Tensor c1 = random_tensor({2, 1}, rng), c2 = random_tensor({2, 1}, rng);
    CHECK(max_abs_diff(layer.forward(x, c1).y, layer.forward(x, c2).y) > 0.0);
}
