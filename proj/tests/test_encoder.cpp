#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "toytts/encoder.hpp"
#include "toytts/ops.hpp"

using namespace toytts;

namespace {

bool same(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

double l2_diff(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

struct Fixture {
    Rng rng{21};
    EncoderConfig cfg;
    TextEncoder enc{cfg, rng};
    SpeakerTable table{4, cfg.speaker_width, rng};
    std::vector<int> tokens{3, 1, 4, 1, 5};
};

}  // namespace

TEST_CASE("single token output is reproducible under a seed") {
    const auto run = [] {
        Rng rng(3);
        TextEncoder enc(EncoderConfig{}, rng);
        return enc.encode({2});
    };
    const EncoderOutput a = run(), b = run();
    CHECK(a.h_text.shape() == Shape{32, 1});
    CHECK(same(a.h_text, b.h_text));
    CHECK(same(a.mu, b.mu));
    CHECK(same(a.sigma, b.sigma));
}

TEST_CASE("outputs align with tokens and sigma is positive") {
    Fixture f;
    const EncoderOutput o = f.enc.encode(f.tokens, {}, f.table.lookup(1));
    CHECK(o.h_text.shape() == Shape{32, 5});
    CHECK(o.mu.shape() == Shape{4, 5});
    CHECK(o.log_sigma.shape() == Shape{4, 5});
    CHECK(o.block_outputs.size() == 4);
    for (std::size_t i = 0; i < o.sigma.numel(); ++i) {
        CHECK(o.sigma.data()[i] > 0.0);
        CHECK(o.sigma.data()[i] == std::exp(o.log_sigma.data()[i]));
    }
}

TEST_CASE("zero speaker projection makes speakers indistinguishable") {
    Fixture f;
    f.enc.speaker_projection().zero();
    const EncoderOutput none = f.enc.encode(f.tokens);
    for (std::size_t s = 0; s < 4; ++s) {
        const EncoderOutput o = f.enc.encode(f.tokens, {}, f.table.lookup(s));
        CHECK(same(o.h_text, none.h_text));
        CHECK(same(o.mu, none.mu));
    }
}

TEST_CASE("distinct speakers change h_text") {
    Fixture f;
    const EncoderOutput a = f.enc.encode(f.tokens, {}, f.table.lookup(0));
    const EncoderOutput b = f.enc.encode(f.tokens, {}, f.table.lookup(1));
    CHECK(l2_diff(a.h_text, b.h_text) > 0.0);
}

TEST_CASE("speaker injection happens at the third block") {
    Fixture f;
    const EncoderOutput a = f.enc.encode(f.tokens, {}, f.table.lookup(0));
    const EncoderOutput b = f.enc.encode(f.tokens, {}, f.table.lookup(2));
    const EncoderOutput none = f.enc.encode(f.tokens);
    CHECK(same(a.block_outputs[0], b.block_outputs[0]));
    CHECK(same(a.block_outputs[1], b.block_outputs[1]));
    CHECK(same(a.block_outputs[1], none.block_outputs[1]));
    CHECK(l2_diff(a.block_outputs[2], b.block_outputs[2]) > 0.0);
    CHECK(l2_diff(a.block_outputs[2], none.block_outputs[2]) > 0.0);
}

TEST_CASE("swapping speaker rows swaps outputs") {
    Fixture f;
    const EncoderOutput a = f.enc.encode(f.tokens, {}, f.table.lookup(0));
    const EncoderOutput b = f.enc.encode(f.tokens, {}, f.table.lookup(3));
    Tensor& t = f.table.table();
    const std::size_t e = t.dim(0), s = t.dim(1);
    auto data = t.mutable_data();
    for (std::size_t r = 0; r < e; ++r) {
        std::swap(data[r * s + 0], data[r * s + 3]);
    }
    const EncoderOutput a2 = f.enc.encode(f.tokens, {}, f.table.lookup(3));
    const EncoderOutput b2 = f.enc.encode(f.tokens, {}, f.table.lookup(0));
    CHECK(same(a.h_text, a2.h_text));
    CHECK(same(b.h_text, b2.h_text));
    CHECK(same(a.mu, a2.mu));
    CHECK(same(b.log_sigma, b2.log_sigma));
}

TEST_CASE("garbage padding does not reach valid positions") {
    Fixture f;
    const EncoderOutput plain = f.enc.encode(f.tokens, {}, f.table.lookup(1));
    std::vector<int> padded = f.tokens;
    padded.insert(padded.end(), {7, 0, 6, 2});
    const EncoderOutput p = f.enc.encode(padded, f.tokens.size(), f.table.lookup(1));
    // Out-of-vocabulary ids in the padding are never looked up.
    std::vector<int> wild = f.tokens;
    wild.insert(wild.end(), {999, -5});
    const EncoderOutput w = f.enc.encode(wild, f.tokens.size(), f.table.lookup(1));
    for (std::size_t c = 0; c < 32; ++c) {
        for (std::size_t t = 0; t < 5; ++t) {
            CHECK(std::abs(p.h_text.at(c, t) - plain.h_text.at(c, t)) <= 1e-12);
            CHECK(std::abs(w.h_text.at(c, t) - plain.h_text.at(c, t)) <= 1e-12);
        }
        for (std::size_t t = 5; t < 9; ++t) {
            CHECK(p.h_text.at(c, t) == 0.0);
        }
    }
    for (std::size_t c = 0; c < 4; ++c) {
        for (std::size_t t = 0; t < 5; ++t) {
            CHECK(std::abs(p.mu.at(c, t) - plain.mu.at(c, t)) <= 1e-12);
            CHECK(std::abs(p.log_sigma.at(c, t) - plain.log_sigma.at(c, t)) <= 1e-12);
        }
    }
}

TEST_CASE("out-of-range ids are rejected") {
    Fixture f;
    CHECK_THROWS_AS(f.enc.encode({0, 8}), ContractError);
    CHECK_THROWS_AS(f.enc.encode({-1}), ContractError);
    CHECK_THROWS_AS(f.enc.encode({}), ContractError);
    CHECK_THROWS_AS(f.table.lookup(4), ContractError);
    CHECK_THROWS_AS(f.enc.encode({1}, {}, Tensor::zeros({3, 1})), ShapeError);
}

TEST_CASE("speaker table lookup returns the stored column") {
    Rng rng(5);
    SpeakerTable table(3, 2, rng);
    for (std::size_t s = 0; s < 3; ++s) {
        const Tensor v = table.lookup(s);
        CHECK(v.shape() == Shape{2, 1});
        CHECK(v.at(0, 0) == table.table().at(0, s));
        CHECK(v.at(1, 0) == table.table().at(1, s));
    }
}

TEST_CASE("sinusoidal positions") {
    const Tensor p = sinusoidal_positions(6, 4);
    for (std::size_t t = 0; t < 4; ++t) {
        for (std::size_t i = 0; i < 3; ++i) {
            const double angle = static_cast<double>(t) / std::pow(10000.0, 2.0 * static_cast<double>(i) / 6.0);
            CHECK(p.at(2 * i, t) == doctest::Approx(std::sin(angle)).epsilon(1e-15));
            CHECK(p.at(2 * i + 1, t) == doctest::Approx(std::cos(angle)).epsilon(1e-15));
        }
    }
}

TEST_CASE("encoder configuration checks") {
    Rng rng(6);
    EncoderConfig cfg;
    cfg.blocks = 2;
    CHECK_THROWS_AS(TextEncoder(cfg, rng), ContractError);
    cfg = EncoderConfig{};
    cfg.heads = 3;
    CHECK_THROWS_AS(TextEncoder(cfg, rng), ContractError);
}
