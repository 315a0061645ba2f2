#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "toytts/corpus.hpp"
#include "toytts/duration.hpp"
#include "toytts/ops.hpp"
#include "toytts/trainer.hpp"

using namespace toytts;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) {
        x = rng.uniform(lo, hi);
    }
    return Tensor::from_data(std::move(shape), std::move(v));
}

Tensor row(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor::from_data({1, n}, std::move(v));
}

Tensor ones_mask(std::size_t n) { return Tensor::full({1, n}, 1.0); }

// Discriminator whose score is the constant c at every valid token.
DurationDiscriminator constant_disc(const DurationConfig& cfg, double c) {
    Rng rng(0);
    DurationDiscriminator d(cfg, rng);
    d.zero();
    fill(d.head().bias, c);
    return d;
}

DurationBatch random_batch(std::size_t items, std::size_t width, Rng& rng, double log_d = -1.0) {
    DurationBatch b;
    for (std::size_t k = 0; k < items; ++k) {
        const std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 6));
        b.h_text.push_back(random_tensor({width, n}, rng));
        std::vector<double> d(n);
        for (double& v : d) {
            v = log_d >= 0.0 ? log_d : std::log(static_cast<double>(rng.uniform_int(1, 6)));
        }
        b.log_durations.push_back(row(d));
        b.mask.push_back(ones_mask(n));
    }
    return b;
}

// Same items with `extra` garbage columns of padding each.
DurationBatch pad_batch(const DurationBatch& b, std::size_t extra, Rng& rng) {
    DurationBatch p;
    for (std::size_t k = 0; k < b.size(); ++k) {
        const std::size_t n = b.h_text[k].dim(1), h = b.h_text[k].dim(0);
        const Tensor garbage_h = random_tensor({h, extra}, rng, -50, 50);
        p.h_text.push_back(transpose(concat_rows({transpose(b.h_text[k]), transpose(garbage_h)})));
        const Tensor garbage_d = random_tensor({1, extra}, rng, 0, 9);
        p.log_durations.push_back(transpose(concat_rows({transpose(b.log_durations[k]), transpose(garbage_d)})));
        std::vector<double> m(n + extra, 0.0);
        std::fill(m.begin(), m.begin() + static_cast<long>(n), 1.0);
        p.mask.push_back(row(m));
    }
    return p;
}

std::vector<Tensor> pad_noise(const std::vector<Tensor>& noise, std::size_t extra, Rng& rng) {
    std::vector<Tensor> out;
    for (const Tensor& z : noise) {
        out.push_back(transpose(concat_rows({transpose(z), transpose(random_tensor({z.dim(0), extra}, rng, -9, 9))})));
    }
    return out;
}

bool all_grads_zero(const std::vector<NamedParam>& params) {
    for (const auto& p : params) {
        for (double g : p.tensor.grad()) {
            if (g != 0.0) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace

TEST_CASE("zero head generates zero durations") {
    Rng rng(1);
    DurationConfig cfg;
    DurationGenerator gen(cfg, rng);
    gen.head().zero();
    const Tensor h = random_tensor({cfg.text_width, 5}, rng);
    const Tensor d = gen.generate(h, gen.sample_noise(5, rng), ones_mask(5));
    REQUIRE(d.shape() == Shape{1, 5});
    for (double v : d.data()) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("generation is deterministic under a seed") {
    const auto run = [] {
        Rng rng(5);
        DurationGenerator gen(DurationConfig{}, rng);
        const Tensor h = random_tensor({32, 4}, rng);
        return gen.generate(h, gen.sample_noise(4, rng), ones_mask(4));
    };
    const Tensor a = run(), b = run();
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST_CASE("output length follows the token axis") {
    Rng rng(2);
    DurationGenerator gen(DurationConfig{}, rng);
    for (std::size_t n = 1; n <= 7; ++n) {
        CHECK(gen.generate(random_tensor({32, n}, rng), gen.sample_noise(n, rng), ones_mask(n)).dim(1) == n);
    }
}

TEST_CASE("generator shape errors") {
    Rng rng(3);
    DurationGenerator gen(DurationConfig{}, rng);
    const Tensor h = random_tensor({32, 4}, rng);
    CHECK_THROWS_AS(gen.generate(h, gen.sample_noise(3, rng), ones_mask(4)), ShapeError);
    CHECK_THROWS_AS(gen.generate(h, Tensor{}, ones_mask(4)), ShapeError);
    CHECK_THROWS_AS(gen.generate(h, gen.sample_noise(4, rng), ones_mask(3)), ShapeError);
    CHECK_THROWS_AS(gen.generate(random_tensor({31, 4}, rng), gen.sample_noise(4, rng), ones_mask(4)), ShapeError);
}

TEST_CASE("deterministic predictor takes no noise") {
    Rng rng(4);
    DurationConfig cfg;
    cfg.noise_width = 0;
    DurationGenerator gen(cfg, rng);
    CHECK_FALSE(gen.stochastic());
    CHECK_FALSE(gen.sample_noise(3, rng).defined());
    CHECK(gen.generate(random_tensor({32, 3}, rng), Tensor{}, ones_mask(3)).dim(1) == 3);
}

TEST_CASE("discriminator losses for fixed scores") {
    const std::vector<Tensor> mask = {ones_mask(3), ones_mask(2)};
    const auto consts = [&](double v) { return std::vector<Tensor>{Tensor::full({1, 3}, v), Tensor::full({1, 2}, v)}; };
    CHECK(lsgan_disc_loss(consts(1.0), consts(0.0), mask).item() == 0.0);
    CHECK(lsgan_disc_loss(consts(0.5), consts(0.5), mask).item() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(lsgan_disc_loss(consts(0.0), consts(1.0), mask).item() == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("generator adversarial loss for fixed scores") {
    const std::vector<Tensor> mask = {ones_mask(4)};
    CHECK(lsgan_gen_loss({Tensor::full({1, 4}, 1.0)}, mask).item() == 0.0);
    CHECK(lsgan_gen_loss({Tensor::full({1, 4}, 0.0)}, mask).item() == 1.0);
    CHECK(lsgan_gen_loss({Tensor::full({1, 4}, 0.25)}, mask).item() == doctest::Approx(0.5625).epsilon(1e-15));
}

TEST_CASE("mse loss examples") {
    const Tensor d = row({0.3, 1.2, 2.0});
    CHECK(mse_loss(d, d, ones_mask(3)).item() == 0.0);
    CHECK(mse_loss(add_scalar(d, 1.0), d, ones_mask(3)).item() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(mse_loss(row({0, 2}), row({1, 1}), ones_mask(2)).item() == 1.0);
    // Masked positions do not count.
    CHECK(mse_loss(row({0, 2, 50}), row({1, 1, 0}), row({1, 1, 0})).item() == 1.0);
}

TEST_CASE("constant discriminator gives the fixed-point loss") {
    DurationConfig cfg;
    cfg.text_width = 4;
    Rng rng(6);
    const DurationBatch batch = random_batch(3, 4, rng);
    std::vector<Tensor> fake;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        fake.push_back(random_tensor({1, batch.h_text[k].dim(1)}, rng));
    }
    double best_c = -1, best = 1e9;
    for (int k = 0; k <= 20; ++k) {
        const double c = k / 20.0;
        const double loss = adv_loss_d(constant_disc(cfg, c), batch, fake).item();
        CHECK(loss == doctest::Approx((c - 1) * (c - 1) + c * c).epsilon(1e-13));
        if (loss < best) {
            best = loss;
            best_c = c;
        }
    }
    CHECK(best_c == 0.5);
    CHECK(adv_loss_d(constant_disc(cfg, 0.5), batch, fake).item() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(adv_loss_g(constant_disc(cfg, 0.25), batch, fake).item() == doctest::Approx(0.5625).epsilon(1e-15));
}

TEST_CASE("discriminator scores every token separately") {
    Rng rng(7);
    DurationConfig cfg;
    cfg.text_width = 6;
    DurationDiscriminator disc(cfg, rng);
    const std::size_t n = 12;
    const Tensor h = random_tensor({6, n}, rng);
    const Tensor d = random_tensor({1, n}, rng, 0, 2);
    const Tensor s0 = disc.score(d, h, ones_mask(n));
    REQUIRE(s0.shape() == Shape{1, n});
    for (std::size_t k : {0ul, 5ul, 11ul}) {
        Tensor d2 = d.detach();
        d2.mutable_data()[k] += 0.7;
        const Tensor s1 = disc.score(d2, h, ones_mask(n));
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t dist = i > k ? i - k : k - i;
            if (dist > disc.radius()) {
                CHECK(s1.at(i) == s0.at(i));
            }
            changed = changed || s1.at(i) != s0.at(i);
        }
        CHECK(changed);
        DurationBatch b{{h}, {d}, {ones_mask(n)}, {}};
        DurationBatch b2{{h}, {d2}, {ones_mask(n)}, {}};
        CHECK(lsgan_gen_loss({disc.score(d, h, ones_mask(n))}, b.mask).item() !=
              lsgan_gen_loss({disc.score(d2, h, ones_mask(n))}, b2.mask).item());
    }
}

TEST_CASE("padding changes no loss value") {
    Rng rng(8);
    DurationConfig cfg;
    cfg.text_width = 5;
    DurationGenerator gen(cfg, rng);
    DurationDiscriminator disc(cfg, rng);
    const DurationBatch batch = random_batch(4, 5, rng);
    std::vector<Tensor> noise;
    for (const Tensor& h : batch.h_text) {
        noise.push_back(gen.sample_noise(h.dim(1), rng));
    }
    const DurationBatch padded = pad_batch(batch, 3, rng);
    const auto padded_noise = pad_noise(noise, 3, rng);
    const auto d_hat = generate_batch(gen, batch, noise);
    const auto d_hat_p = generate_batch(gen, padded, padded_noise);
    CHECK(std::abs(mse_loss(d_hat, batch).item() - mse_loss(d_hat_p, padded).item()) <= 1e-12);
    CHECK(std::abs(adv_loss_d(disc, batch, d_hat).item() - adv_loss_d(disc, padded, d_hat_p).item()) <= 1e-12);
    CHECK(std::abs(adv_loss_g(disc, batch, d_hat).item() - adv_loss_g(disc, padded, d_hat_p).item()) <= 1e-12);
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const std::size_t n = batch.h_text[k].dim(1);
        for (std::size_t i = 0; i < n + 3; ++i) {
            CHECK(d_hat_p[k].at(i) == (i < n ? doctest::Approx(d_hat[k].at(i)).epsilon(1e-13) : doctest::Approx(0.0)));
        }
    }
}

TEST_CASE("discriminator and generator updates are isolated") {
    Rng rng(9);
    DurationConfig cfg;
    cfg.text_width = 5;
    DurationGenerator gen(cfg, rng);
    DurationDiscriminator disc(cfg, rng);
    const DurationBatch batch = random_batch(3, 5, rng);
    std::vector<Tensor> noise;
    for (const Tensor& h : batch.h_text) {
        noise.push_back(gen.sample_noise(h.dim(1), rng));
    }
    const auto gp = gen.parameters();
    const auto dp = disc.parameters();

    backward(adv_loss_d(disc, batch, generate_batch(gen, batch, noise)));
    CHECK(all_grads_zero(gp));
    CHECK_FALSE(all_grads_zero(dp));
    for (const auto& p : gp) {
        CHECK_FALSE(graph_contains(adv_loss_d(disc, batch, generate_batch(gen, batch, noise)), p.tensor));
    }

    for (const auto& p : dp) {
        Tensor t = p.tensor;
        t.zero_grad();
    }
    const Tensor lg = adv_loss_g(disc, batch, generate_batch(gen, batch, noise));
    backward(lg);
    CHECK(all_grads_zero(dp));
    CHECK_FALSE(all_grads_zero(gp));
    for (const auto& p : dp) {
        CHECK_FALSE(graph_contains(lg, p.tensor));
    }
}

TEST_CASE("zero steps return an empty history") {
    Rng rng(10);
    DurationGenerator gen(DurationConfig{}, rng);
    DurationDiscriminator disc(DurationConfig{}, rng);
    CHECK(train_duration(gen, disc, {}, 0, DurationTrainConfig{}).empty());
}

TEST_CASE("constant durations are learned within 500 steps") {
    for (std::uint64_t seed : {11u, 23u, 37u}) {
        CAPTURE(seed);
        Rng rng(seed);
        DurationConfig cfg;
        DurationGenerator gen(cfg, rng);
        DurationDiscriminator disc(cfg, rng);
        std::vector<DurationBatch> corpus;
        for (int k = 0; k < 4; ++k) {
            corpus.push_back(random_batch(4, cfg.text_width, rng, std::log(4.0)));
        }
        DurationTrainConfig tc;
        tc.generator_opt.lr = TrainConfig{}.duration_opt.lr;
        tc.discriminator_opt.lr = TrainConfig{}.duration_opt.lr;
        tc.seed = seed;
        const auto history = train_duration(gen, disc, corpus, 500, tc);
        REQUIRE(history.size() == 500);
        CHECK(history.back().loss_g_mse <= 1e-2);
        for (const auto& r : history) {
            CHECK(r.isolation_ok);
            CHECK(std::isfinite(r.loss_d));
        }
    }
}

TEST_CASE("toy corpus duration loss falls at least fivefold") {
    Rng rng(12);
    CorpusSpec spec;
    const ToyCorpus corpus = generate_corpus(spec, rng);
    const auto batches = synthetic_duration_corpus(corpus, 32, 8, rng);
    DurationGenerator gen(DurationConfig{}, rng);
    DurationDiscriminator disc(DurationConfig{}, rng);
    DurationTrainConfig tc;
    tc.generator_opt.lr = 5e-3;
    tc.discriminator_opt.lr = 5e-3;
    tc.seed = 4;
    const auto history = train_duration(gen, disc, batches, 2000, tc);
    // Average the last pass over the batches so one batch does not decide.
    double tail = 0.0;
    for (std::size_t k = history.size() - batches.size(); k < history.size(); ++k) {
        tail += history[k].loss_g_mse;
    }
    tail /= static_cast<double>(batches.size());
    CHECK(tail * 5.0 < history.front().loss_g_mse);
}

TEST_CASE("noise draws lead to different durations after training") {
    Rng rng(13);
    const ToyCorpus corpus = generate_corpus(CorpusSpec{}, rng);
    const auto batches = synthetic_duration_corpus(corpus, 32, 8, rng);
    DurationGenerator gen(DurationConfig{}, rng);
    DurationDiscriminator disc(DurationConfig{}, rng);
    DurationTrainConfig tc;
    tc.generator_opt.lr = 5e-3;
    tc.discriminator_opt.lr = 5e-3;
    train_duration(gen, disc, batches, 200, tc);
    const Tensor& h = batches.front().h_text.front();
    const Tensor z1 = gen.sample_noise(h.dim(1), rng);
    Tensor z2 = z1.detach();
    z2.mutable_data()[0] += 1.0;
    const Tensor m = batches.front().mask.front();
    const Tensor a = gen.generate(h, z1, m), b = gen.generate(h, z2, m);
    bool differs = false;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        differs = differs || a.at(i) != b.at(i);
    }
    CHECK(differs);
}

TEST_CASE("mse-only training never evaluates the discriminator") {
    Rng rng(14);
    DurationConfig cfg;
    cfg.noise_width = 0;
    DurationGenerator gen(cfg, rng);
    DurationDiscriminator disc(cfg, rng);
    std::vector<double> before;
    for (const auto& p : disc.parameters()) {
        before.insert(before.end(), p.tensor.data().begin(), p.tensor.data().end());
    }
    std::vector<DurationBatch> corpus = {random_batch(3, cfg.text_width, rng)};
    DurationTrainConfig tc;
    tc.adversarial = false;
    const auto history = train_duration(gen, disc, corpus, 20, tc);
    std::vector<double> after;
    for (const auto& p : disc.parameters()) {
        after.insert(after.end(), p.tensor.data().begin(), p.tensor.data().end());
        CHECK_FALSE(p.tensor.has_grad());
    }
    CHECK(before == after);
    for (const auto& r : history) {
        CHECK(r.loss_d == 0.0);
        CHECK(r.loss_g_adv == 0.0);
    }
}

TEST_CASE("divergence reports the step") {
    Rng rng(15);
    DurationConfig cfg;
    cfg.text_width = 2;
    DurationGenerator gen(cfg, rng);
    DurationDiscriminator disc(cfg, rng);
    DurationBatch b = random_batch(1, 2, rng);
    b.h_text[0] = Tensor::full(b.h_text[0].shape(), 1e200);
    try {
        train_duration(gen, disc, {b}, 5, DurationTrainConfig{});
        FAIL("expected divergence");
    } catch (const TrainingDivergence& e) {
        CHECK(e.step() == 0);
    }
}

TEST_CASE("batch validation rejects durations below one frame") {
    DurationBatch b{{Tensor::zeros({2, 2})}, {row({0.0, -0.1})}, {ones_mask(2)}, {}};
    CHECK_THROWS_AS(b.validate(), ContractError);
    b.mask[0] = row({1, 0});
    CHECK_NOTHROW(b.validate());
}
