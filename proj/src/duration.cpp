#include "toytts/duration.hpp"

#include <cmath>
#include <string>

#include "toytts/ops.hpp"

namespace toytts {

namespace {

void check_token_axis(const char* who, const Tensor& a, const Tensor& mask) {
    if (a.rank() != 2 || mask.rank() != 2 || mask.dim(0) != 1 || a.dim(1) != mask.dim(1)) {
        throw ShapeError(std::string(who) + ": token axis mismatch between " + shape_str(a.shape()) +
                         " and mask " + shape_str(mask.shape()));
    }
}

bool all_zero(const std::vector<NamedParam>& params) {
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

DurationGenerator::DurationGenerator(const DurationConfig& config, Rng& rng)
    : config_(config),
      conv1_(config.text_width + config.noise_width, config.filter_width, config.kernel, rng),
      conv2_(config.filter_width, config.filter_width, config.kernel, rng),
      head_(config.filter_width, 1, 1, rng) {
    if (config.cond_width > 0) {
        cond_ = Linear(config.cond_width, config.filter_width, rng, false);
    }
}

Tensor DurationGenerator::generate(const Tensor& h_text, const Tensor& noise, const Tensor& mask,
                                   const Tensor& cond) const {
    check_token_axis("DurationGenerator", h_text, mask);
    if (h_text.dim(0) != config_.text_width) {
        throw ShapeError("DurationGenerator: h_text " + shape_str(h_text.shape()) + " expected " +
                         std::to_string(config_.text_width) + " channels");
    }
    Tensor x = h_text;
    if (stochastic()) {
        if (!noise.defined() || noise.rank() != 2 || noise.dim(0) != config_.noise_width ||
            noise.dim(1) != h_text.dim(1)) {
            throw ShapeError("DurationGenerator: noise " +
                             (noise.defined() ? shape_str(noise.shape()) : std::string("<none>")) +
                             " does not match h_text " + shape_str(h_text.shape()));
        }
        x = concat_rows({h_text, noise});
    }
    x = mul(x, mask);
    Tensor h = conv1_(x);
    if (cond.defined() && config_.cond_width > 0) {
        h = add(h, cond_(cond));
    }
    h = mul(relu(h), mask);
    h = mul(relu(conv2_(h)), mask);
    return mul(head_(h), mask);
}

Tensor DurationGenerator::sample_noise(std::size_t tokens, Rng& rng) const {
    if (!stochastic()) {
        return {};
    }
    std::vector<double> data(config_.noise_width * tokens);
    for (double& v : data) {
        v = rng.normal();
    }
    return Tensor::from_data({config_.noise_width, tokens}, std::move(data));
}

std::vector<NamedParam> DurationGenerator::parameters() const {
    std::vector<NamedParam> out;
    conv1_.append_params("conv1", out);
    conv2_.append_params("conv2", out);
    head_.append_params("head", out);
    if (config_.cond_width > 0) {
        cond_.append_params("cond", out);
    }
    return out;
}

DurationDiscriminator::DurationDiscriminator(const DurationConfig& config, Rng& rng)
    : config_(config),
      conv1_(config.text_width + 1, config.filter_width, config.kernel, rng),
      conv2_(config.filter_width, config.filter_width, config.kernel, rng),
      head_(config.filter_width, 1, 1, rng) {}

Tensor DurationDiscriminator::score(const Tensor& log_durations, const Tensor& h_text,
                                    const Tensor& mask, bool frozen) const {
    check_token_axis("DurationDiscriminator", h_text, mask);
    check_token_axis("DurationDiscriminator", log_durations, mask);
    Tensor x = mul(concat_rows({h_text, log_durations}), mask);
    if (frozen) {
        Tensor h = mul(relu(conv1_.frozen(x)), mask);
        h = mul(relu(conv2_.frozen(h)), mask);
        return mul(head_.frozen(h), mask);
    }
    Tensor h = mul(relu(conv1_(x)), mask);
    h = mul(relu(conv2_(h)), mask);
    return mul(head_(h), mask);
}

void DurationDiscriminator::zero() {
    conv1_.zero();
    conv2_.zero();
    head_.zero();
}

std::vector<NamedParam> DurationDiscriminator::parameters() const {
    std::vector<NamedParam> out;
    conv1_.append_params("conv1", out);
    conv2_.append_params("conv2", out);
    head_.append_params("head", out);
    return out;
}

std::size_t DurationBatch::valid_tokens() const {
    double total = 0.0;
    for (const Tensor& m : mask) {
        for (double v : m.data()) {
            total += v;
        }
    }
    return static_cast<std::size_t>(std::llround(total));
}

void DurationBatch::validate() const {
    if (log_durations.size() != size() || mask.size() != size() ||
        (!cond.empty() && cond.size() != size())) {
        throw ShapeError("DurationBatch: per-item vectors differ in length");
    }
    for (std::size_t b = 0; b < size(); ++b) {
        check_token_axis("DurationBatch", h_text[b], mask[b]);
        check_token_axis("DurationBatch", log_durations[b], mask[b]);
        for (std::size_t i = 0; i < mask[b].numel(); ++i) {
            const double m = mask[b].at(i);
            if (m != 0.0 && m != 1.0) {
                throw ContractError("DurationBatch: mask entries must be 0 or 1");
            }
            const double d = log_durations[b].at(i);
            if (m == 1.0 && (!std::isfinite(d) || d < 0.0)) {
                throw ContractError("DurationBatch: log duration " + std::to_string(d) +
                                    " at item " + std::to_string(b) + ", token " +
                                    std::to_string(i) + " is below log(1)");
            }
        }
    }
}

Tensor masked_mean(const std::vector<Tensor>& values, const std::vector<Tensor>& masks) {
    if (values.size() != masks.size() || values.empty()) {
        throw ShapeError("masked_mean: " + std::to_string(values.size()) + " values for " +
                         std::to_string(masks.size()) + " masks");
    }
    double count = 0.0;
    Tensor total;
    for (std::size_t b = 0; b < values.size(); ++b) {
        for (double m : masks[b].data()) {
            count += m;
        }
        Tensor s = sum(mul(values[b], masks[b]));
        total = total.defined() ? add(total, s) : s;
    }
    if (count <= 0.0) {
        throw ContractError("masked_mean: no valid positions");
    }
    return scale(total, 1.0 / count);
}

Tensor lsgan_disc_loss(const std::vector<Tensor>& real_scores, const std::vector<Tensor>& fake_scores,
                       const std::vector<Tensor>& masks) {
    std::vector<Tensor> real_terms, fake_terms;
    for (std::size_t b = 0; b < real_scores.size(); ++b) {
        real_terms.push_back(square(add_scalar(real_scores[b], -1.0)));
        fake_terms.push_back(square(fake_scores.at(b)));
    }
    return add(masked_mean(real_terms, masks), masked_mean(fake_terms, masks));
}

Tensor lsgan_gen_loss(const std::vector<Tensor>& fake_scores, const std::vector<Tensor>& masks) {
    std::vector<Tensor> terms;
    for (const Tensor& f : fake_scores) {
        terms.push_back(square(add_scalar(f, -1.0)));
    }
    return masked_mean(terms, masks);
}

std::vector<Tensor> generate_batch(const DurationGenerator& gen, const DurationBatch& batch,
                                   const std::vector<Tensor>& noise) {
    std::vector<Tensor> out;
    out.reserve(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Tensor z = gen.stochastic() ? noise.at(b) : Tensor{};
        const Tensor c = batch.cond.empty() ? Tensor{} : batch.cond[b];
        out.push_back(gen.generate(batch.h_text[b], z, batch.mask[b], c));
    }
    return out;
}

Tensor adv_loss_d(const DurationDiscriminator& disc, const DurationBatch& batch,
                  const std::vector<Tensor>& d_hat) {
    std::vector<Tensor> real, fake;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        real.push_back(disc.score(batch.log_durations[b], batch.h_text[b], batch.mask[b]));
        fake.push_back(disc.score(d_hat.at(b).detach(), batch.h_text[b], batch.mask[b]));
    }
    return lsgan_disc_loss(real, fake, batch.mask);
}

Tensor adv_loss_g(const DurationDiscriminator& disc, const DurationBatch& batch,
                  const std::vector<Tensor>& d_hat) {
    std::vector<Tensor> fake;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        fake.push_back(disc.score(d_hat.at(b), batch.h_text[b], batch.mask[b], true));
    }
    return lsgan_gen_loss(fake, batch.mask);
}

Tensor mse_loss(const Tensor& d_hat, const Tensor& d, const Tensor& mask) {
    return mse_loss(std::vector<Tensor>{d_hat}, DurationBatch{{}, {d}, {mask}, {}});
}

Tensor mse_loss(const std::vector<Tensor>& d_hat, const DurationBatch& batch) {
    std::vector<Tensor> terms;
    for (std::size_t b = 0; b < batch.log_durations.size(); ++b) {
        terms.push_back(square(sub(d_hat.at(b), batch.log_durations[b])));
    }
    return masked_mean(terms, batch.mask);
}

TrainingDivergence::TrainingDivergence(long step, const std::string& what)
    : std::runtime_error("training diverged at step " + std::to_string(step) + ": " + what),
      step_(step) {}

std::vector<DurationLossRow> train_duration(DurationGenerator& gen, DurationDiscriminator& disc,
                                            const std::vector<DurationBatch>& corpus, long steps,
                                            const DurationTrainConfig& config) {
    std::vector<DurationLossRow> history;
    if (steps <= 0) {
        return history;
    }
    if (corpus.empty()) {
        throw ContractError("train_duration: empty corpus");
    }
    for (const auto& batch : corpus) {
        batch.validate();
    }
    const auto gen_params = gen.parameters();
    const auto disc_params = disc.parameters();
    AdamW gen_opt(tensors_of(gen_params), config.generator_opt);
    AdamW disc_opt(tensors_of(disc_params), config.discriminator_opt);
    Rng rng(config.seed);
    const long n_batches = static_cast<long>(corpus.size());

    history.reserve(static_cast<std::size_t>(steps));
    for (long step = 0; step < steps; ++step) {
        const DurationBatch& batch = corpus[static_cast<std::size_t>(step % n_batches)];
        gen_opt.set_epoch(step / n_batches);
        disc_opt.set_epoch(step / n_batches);
        std::vector<Tensor> noise;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            noise.push_back(gen.sample_noise(batch.h_text[b].dim(1), rng));
        }
        DurationLossRow row;
        row.step = step;
        try {
            if (config.adversarial) {
                gen_opt.zero_grad();
                disc_opt.zero_grad();
                const Tensor loss_d = adv_loss_d(disc, batch, generate_batch(gen, batch, noise));
                backward(loss_d);
                row.loss_d = loss_d.item();
                row.isolation_ok = all_zero(gen_params);
                disc_opt.step();
            }

            gen_opt.zero_grad();
            if (config.adversarial) {
                disc_opt.zero_grad();
            }
            const auto d_hat = generate_batch(gen, batch, noise);
            const Tensor loss_mse = mse_loss(d_hat, batch);
            Tensor loss_g = loss_mse;
            if (config.adversarial) {
                const Tensor loss_adv = adv_loss_g(disc, batch, d_hat);
                row.loss_g_adv = loss_adv.item();
                loss_g = add(loss_adv, loss_mse);
            }
            backward(loss_g);
            row.loss_g_mse = loss_mse.item();
            row.isolation_ok = row.isolation_ok && all_zero(disc_params);
            gen_opt.step();
        } catch (const NumericError& e) {
            throw TrainingDivergence(step, e.what());
        }
        if (!std::isfinite(row.loss_d) || !std::isfinite(row.loss_g_adv) ||
            !std::isfinite(row.loss_g_mse)) {
            throw TrainingDivergence(step, "non-finite loss");
        }
        history.push_back(row);
    }
    return history;
}

}  // namespace toytts
