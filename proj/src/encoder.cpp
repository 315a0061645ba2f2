#include "toytts/encoder.hpp"

#include <cmath>
#include <string>

#include "toytts/ops.hpp"

namespace toytts {

namespace {

// Large enough that exp() of a masked score underflows to exactly zero.
constexpr double kMaskedScore = -1e9;

}  // namespace

SpeakerTable::SpeakerTable(std::size_t speakers, std::size_t width, Rng& rng)
    : table_(uniform_param({width, speakers}, 1, rng)) {}

Tensor SpeakerTable::lookup(std::size_t id) const {
    if (id >= size()) {
        throw ContractError("SpeakerTable: speaker id " + std::to_string(id) + " out of range [0, " +
                            std::to_string(size()) + ")");
    }
    return gather_cols(table_, {id});
}

Tensor sinusoidal_positions(std::size_t hidden, std::size_t length) {
    std::vector<double> data(hidden * length);
    for (std::size_t c = 0; c < hidden; ++c) {
        const double rate = std::pow(10000.0, -static_cast<double>(c / 2 * 2) / static_cast<double>(hidden));
        for (std::size_t t = 0; t < length; ++t) {
            const double angle = static_cast<double>(t) * rate;
            data[c * length + t] = (c % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return Tensor::from_data({hidden, length}, std::move(data));
}

TextEncoder::TextEncoder(const EncoderConfig& config, Rng& rng) : config_(config) {
    if (config.blocks < 3) {
        throw ContractError("TextEncoder: at least 3 blocks are required");
    }
    if (config.speaker_block >= config.blocks) {
        throw ContractError("TextEncoder: speaker block index out of range");
    }
    if (config.heads == 0 || config.hidden % config.heads != 0) {
        throw ContractError("TextEncoder: hidden width must divide into heads");
    }
    const std::size_t h = config.hidden;
    // One-hot lookup has fan-in 1.
    embedding_ = uniform_param({h, config.vocab_size}, 1, rng);
    for (std::size_t b = 0; b < config.blocks; ++b) {
        Block block{Linear(h, h, rng),
                    Linear(h, h, rng),
                    Linear(h, h, rng),
                    Linear(h, h, rng),
                    Tensor::full({h, 1}, 1.0, true),
                    Tensor::zeros({h, 1}, true),
                    Linear(h, config.ffn, rng),
                    Linear(config.ffn, h, rng),
                    Tensor::full({h, 1}, 1.0, true),
                    Tensor::zeros({h, 1}, true)};
        blocks_.push_back(std::move(block));
    }
    speaker_proj_ = Linear(config.speaker_width, h, rng, false);
    mu_head_ = Linear(h, config.out_channels, rng);
    log_sigma_head_ = Linear(h, config.out_channels, rng);
}

Tensor TextEncoder::project_speaker(const Tensor& speaker) const {
    if (speaker.rank() != 2 || speaker.dim(0) != config_.speaker_width || speaker.dim(1) != 1) {
        throw ShapeError("TextEncoder: speaker vector " + shape_str(speaker.shape()) + ", expected (" +
                         std::to_string(config_.speaker_width) + ", 1)");
    }
    return speaker_proj_(speaker);
}

Tensor TextEncoder::run_block(const Block& block, const Tensor& h, const Tensor& key_bias,
                              const Tensor& mask) const {
    const std::size_t heads = config_.heads;
    const std::size_t dh = config_.hidden / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    const Tensor q = block.query(h);
    const Tensor k = block.key(h);
    const Tensor v = block.value(h);
    std::vector<Tensor> per_head;
    for (std::size_t i = 0; i < heads; ++i) {
        const Tensor qh = slice_rows(q, i * dh, (i + 1) * dh);
        const Tensor kh = slice_rows(k, i * dh, (i + 1) * dh);
        const Tensor vh = slice_rows(v, i * dh, (i + 1) * dh);
        // scores[t, s]: query t against key s; padded keys are excluded.
        const Tensor scores = add(scale(matmul(transpose(qh), kh), inv_sqrt), key_bias);
        const Tensor attn = softmax(scores, 1);
        per_head.push_back(matmul(vh, transpose(attn)));
    }
    Tensor x = add(h, block.out(concat_rows(per_head)));
    x = add(mul(layer_norm(x, 0), block.norm1_gain), block.norm1_bias);
    const Tensor f = block.ffn_out(relu(block.ffn_in(x)));
    x = add(x, f);
    x = add(mul(layer_norm(x, 0), block.norm2_gain), block.norm2_bias);
    return mul(x, mask);
}

EncoderOutput TextEncoder::encode(const std::vector<int>& tokens, std::optional<std::size_t> valid_tokens,
                                  const Tensor& speaker) const {
    const std::size_t len = tokens.size();
    const std::size_t valid = valid_tokens.value_or(len);
    if (len == 0 || valid == 0 || valid > len) {
        throw ContractError("TextEncoder: need 1 <= valid tokens <= sequence length");
    }
    std::vector<std::size_t> ids(len);
    for (std::size_t i = 0; i < len; ++i) {
        if (i >= valid) {
            ids[i] = 0;
            continue;
        }
        if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= config_.vocab_size) {
            throw ContractError("TextEncoder: token id " + std::to_string(tokens[i]) +
                                " out of range [0, " + std::to_string(config_.vocab_size) + ")");
        }
        ids[i] = static_cast<std::size_t>(tokens[i]);
    }
    std::vector<double> mask_data(len, 0.0), bias_data(len, kMaskedScore);
    for (std::size_t i = 0; i < valid; ++i) {
        mask_data[i] = 1.0;
        bias_data[i] = 0.0;
    }
    const Tensor mask = Tensor::from_data({1, len}, std::move(mask_data));
    const Tensor key_bias = Tensor::from_data({1, len}, std::move(bias_data));

    EncoderOutput out;
    Tensor h = gather_cols(embedding_, ids);
    h = mul(add(h, sinusoidal_positions(config_.hidden, len)), mask);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        if (b == config_.speaker_block && speaker.defined()) {
            h = mul(add(h, project_speaker(speaker)), mask);
        }
        h = run_block(blocks_[b], h, key_bias, mask);
        out.block_outputs.push_back(h);
    }
    out.h_text = h;
    out.mu = mul(mu_head_(h), mask);
    out.log_sigma = mul(log_sigma_head_(h), mask);
    out.sigma = exp(out.log_sigma);
    return out;
}

std::vector<NamedParam> TextEncoder::parameters() const {
    std::vector<NamedParam> out;
    out.push_back({"embedding", embedding_});
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        const Block& blk = blocks_[b];
        blk.query.append_params(p + "query", out);
        blk.key.append_params(p + "key", out);
        blk.value.append_params(p + "value", out);
        blk.out.append_params(p + "out", out);
        out.push_back({p + "norm1.gain", blk.norm1_gain});
        out.push_back({p + "norm1.bias", blk.norm1_bias});
        blk.ffn_in.append_params(p + "ffn_in", out);
        blk.ffn_out.append_params(p + "ffn_out", out);
        out.push_back({p + "norm2.gain", blk.norm2_gain});
        out.push_back({p + "norm2.bias", blk.norm2_bias});
    }
    speaker_proj_.append_params("speaker_proj", out);
    mu_head_.append_params("mu_head", out);
    log_sigma_head_.append_params("log_sigma_head", out);
    return out;
}

}  // namespace toytts
