#pragma once

#include <optional>
#include <vector>

#include "toytts/layers.hpp"
#include "toytts/rng.hpp"
#include "toytts/tensor.hpp"

namespace toytts {

/// Learnable speaker embeddings, one column of width E per speaker.
class SpeakerTable {
public:
    SpeakerTable() = default;
    SpeakerTable(std::size_t speakers, std::size_t width, Rng& rng);

    // (E, 1) embedding of `id`; tape-connected to the table.
    Tensor lookup(std::size_t id) const;
    std::size_t size() const { return table_.defined() ? table_.dim(1) : 0; }
    std::size_t width() const { return table_.defined() ? table_.dim(0) : 0; }
    Tensor& table() { return table_; }
    const Tensor& table() const { return table_; }

private:
    Tensor table_;  // (E, S)
};

struct EncoderConfig {
    std::size_t vocab_size = 8;
    std::size_t hidden = 32;       // H
    std::size_t heads = 2;
    std::size_t blocks = 4;
    std::size_t ffn = 64;
    std::size_t out_channels = 4;  // C of the prior
    std::size_t speaker_width = 8; // E
    // Zero-based index of the block whose input receives the speaker vector.
    std::size_t speaker_block = 2;
};

struct EncoderOutput {
    Tensor h_text;     // (H, I)
    Tensor mu;         // (C, I)
    Tensor log_sigma;  // (C, I)
    Tensor sigma;      // (C, I) = exp(log_sigma)
    std::vector<Tensor> block_outputs;
};

/// Post-norm transformer text encoder with sinusoidal positions at the first
/// block, multi-head self-attention restricted to valid tokens, a pointwise
/// feed-forward and per-token prior heads (mu, log sigma). A speaker vector,
/// when given, is projected to H and added at every token at the input of
/// the configured block.
class TextEncoder {
public:
    TextEncoder(const EncoderConfig& config, Rng& rng);

    // tokens may carry trailing padding; only the first valid_tokens take part.
    // Padded columns of every output are zero.
    EncoderOutput encode(const std::vector<int>& tokens, std::optional<std::size_t> valid_tokens = {},
                         const Tensor& speaker = {}) const;

    const EncoderConfig& config() const { return config_; }
    Linear& speaker_projection() { return speaker_proj_; }
    Linear& mu_head() { return mu_head_; }
    Linear& log_sigma_head() { return log_sigma_head_; }
    Tensor& embedding() { return embedding_; }

    // The speaker vector projected to the hidden width, (H, 1).
    Tensor project_speaker(const Tensor& speaker) const;

    std::vector<NamedParam> parameters() const;

private:
    struct Block {
        Linear query, key, value, out;
        Tensor norm1_gain, norm1_bias;
        Linear ffn_in, ffn_out;
        Tensor norm2_gain, norm2_bias;
    };

    Tensor run_block(const Block& block, const Tensor& h, const Tensor& key_bias,
                     const Tensor& mask) const;

    EncoderConfig config_;
    Tensor embedding_;  // (H, V)
    std::vector<Block> blocks_;
    Linear speaker_proj_;
    Linear mu_head_, log_sigma_head_;
};

/// Sinusoidal positional table, (H, length).
Tensor sinusoidal_positions(std::size_t hidden, std::size_t length);

}  // namespace toytts
