#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "toytts/layers.hpp"
#include "toytts/optim.hpp"
#include "toytts/rng.hpp"
#include "toytts/tensor.hpp"

namespace toytts {

// All duration tensors are channels-first over the token axis: h_text is
// (H, I), noise is (Z, I), durations, scores and masks are (1, I). Masks hold
// 1 on valid tokens and 0 on padding.

struct DurationConfig {
    std::size_t text_width = 32;   // H
    std::size_t noise_width = 2;   // Z; zero gives the deterministic predictor
    std::size_t filter_width = 32;
    std::size_t kernel = 3;
    std::size_t cond_width = 0;    // optional global condition (e.g. speaker)
};

/// Per-token log-duration generator G(z_d, h_text): two masked conv layers
/// over the token axis and a pointwise head.
class DurationGenerator {
public:
    DurationGenerator(const DurationConfig& config, Rng& rng);

    Tensor generate(const Tensor& h_text, const Tensor& noise, const Tensor& mask,
                    const Tensor& cond = {}) const;
    // Standard-normal (Z, tokens) draw; undefined for a deterministic predictor.
    Tensor sample_noise(std::size_t tokens, Rng& rng) const;

    bool stochastic() const { return config_.noise_width > 0; }
    const DurationConfig& config() const { return config_; }
    Conv1d& head() { return head_; }

    std::vector<NamedParam> parameters() const;

private:
    DurationConfig config_;
    Conv1d conv1_, conv2_, head_;
    Linear cond_;
};

/// Conditional discriminator D(d, h_text) emitting one score per token.
class DurationDiscriminator {
public:
    DurationDiscriminator(const DurationConfig& config, Rng& rng);

    // With frozen set the parameters enter the computation detached, so no
    // gradient reaches them.
    Tensor score(const Tensor& log_durations, const Tensor& h_text, const Tensor& mask,
                 bool frozen = false) const;

    // Receptive-field radius in tokens.
    std::size_t radius() const { return 2 * (config_.kernel / 2); }
    Conv1d& head() { return head_; }
    void zero();

    std::vector<NamedParam> parameters() const;

private:
    DurationConfig config_;
    Conv1d conv1_, conv2_, head_;
};

/// Variable-length instances padded to a common token count.
struct DurationBatch {
    std::vector<Tensor> h_text;         // (H, I)
    std::vector<Tensor> log_durations;  // (1, I)
    std::vector<Tensor> mask;           // (1, I)
    std::vector<Tensor> cond;           // (cond_width, 1) per item, or empty

    std::size_t size() const { return h_text.size(); }
    std::size_t valid_tokens() const;
    // Checks shapes, finiteness on valid tokens and exp(d) >= 1 there.
    void validate() const;
};

// Mean over valid tokens of all items.
Tensor masked_mean(const std::vector<Tensor>& values, const std::vector<Tensor>& masks);

// Least-squares adversarial objectives from raw scores.
Tensor lsgan_disc_loss(const std::vector<Tensor>& real_scores, const std::vector<Tensor>& fake_scores,
                       const std::vector<Tensor>& masks);
Tensor lsgan_gen_loss(const std::vector<Tensor>& fake_scores, const std::vector<Tensor>& masks);

// One generate() call per item, using batch.cond when present.
std::vector<Tensor> generate_batch(const DurationGenerator& gen, const DurationBatch& batch,
                                   const std::vector<Tensor>& noise);

/// mean over valid tokens of (D(d)-1)^2 + D(d_hat)^2; d_hat is detached here.
Tensor adv_loss_d(const DurationDiscriminator& disc, const DurationBatch& batch,
                  const std::vector<Tensor>& d_hat);
/// mean over valid tokens of (D(d_hat)-1)^2 with D frozen.
Tensor adv_loss_g(const DurationDiscriminator& disc, const DurationBatch& batch,
                  const std::vector<Tensor>& d_hat);
Tensor mse_loss(const Tensor& d_hat, const Tensor& d, const Tensor& mask);
Tensor mse_loss(const std::vector<Tensor>& d_hat, const DurationBatch& batch);

struct DurationTrainConfig {
    AdamWConfig generator_opt;
    AdamWConfig discriminator_opt;
    // False trains the generator on the MSE term only and never evaluates D.
    bool adversarial = true;
    std::uint64_t seed = 0;
};

struct DurationLossRow {
    long step = 0;
    double loss_d = 0.0;
    double loss_g_adv = 0.0;
    double loss_g_mse = 0.0;
    // Discriminator update left G gradients at zero and vice versa.
    bool isolation_ok = true;
};

class TrainingDivergence : public std::runtime_error {
public:
    TrainingDivergence(long step, const std::string& what);
    long step() const { return step_; }

private:
    long step_;
};

/// Alternating updates, one discriminator step then one generator step
/// (adv + mse) per iteration, cycling through the batches in order.
std::vector<DurationLossRow> train_duration(DurationGenerator& gen, DurationDiscriminator& disc,
                                            const std::vector<DurationBatch>& corpus, long steps,
                                            const DurationTrainConfig& config);

}  // namespace toytts
