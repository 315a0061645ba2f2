#pragma once

#include <vector>

#include "toytts/layers.hpp"
#include "toytts/rng.hpp"
#include "toytts/tensor.hpp"

namespace toytts {

struct CouplingConfig {
    std::size_t channels = 4;      // C, must be even
    std::size_t hidden = 16;       // post-net width
    std::size_t kernel = 3;
    std::size_t key_width = 8;     // attention query/key width
    std::size_t cond_width = 0;
    bool use_transformer = true;
    // Multiplies the attention output before the residual add.
    double attention_scale = 1.0;
    double log_scale_clamp = 8.0;
};

struct FlowOutput {
    Tensor y;
    Tensor logdet;  // scalar
};

/// Affine coupling over (C, T) data. The first C/2 channels pass through a
/// residual single-head self-attention block over time, then a two-layer
/// conv post-net predicts log-scale s and shift t for the other half:
/// y_b = x_b * exp(s) + t. The (s, t) head starts at zero, so a fresh layer
/// is the identity.
class CouplingLayer {
public:
    CouplingLayer(const CouplingConfig& config, Rng& rng);

    FlowOutput forward(const Tensor& x, const Tensor& cond = {}) const;
    Tensor inverse(const Tensor& y, const Tensor& cond = {}) const;

    // Row-stochastic (T, T) attention the block applies to this input; rows
    // are queries. A (1, 1) one when T == 1.
    Tensor attention(const Tensor& x) const;
    // Row-stochastic map from an already split conditioning half.
    Tensor attention_from_half(const Tensor& x_a) const;

    // Time radius covered by the post-net convolutions.
    std::size_t receptive_radius() const { return 2 * (config_.kernel / 2); }
    bool transformer_active() const { return config_.use_transformer; }
    const CouplingConfig& config() const { return config_; }
    CouplingConfig& mutable_config() { return config_; }

    Linear& query() { return query_; }
    const Linear& query() const { return query_; }
    Linear& key() { return key_; }
    const Linear& key() const { return key_; }
    Conv1d& head() { return head_; }
    Conv1d& pre() { return pre_; }
    Conv1d& mid() { return mid_; }

    std::vector<NamedParam> parameters() const;
    std::vector<NamedParam> attention_parameters() const;

    // (s, t) for a given conditioning half; s already clamped.
    std::pair<Tensor, Tensor> scale_shift(const Tensor& x_a, const Tensor& cond) const;

private:
    Tensor mix(const Tensor& x_a) const;
    void check_input(const char* who, const Tensor& x) const;

    CouplingConfig config_;
    Linear query_, key_, value_, out_;
    Conv1d pre_, mid_, head_;
    Linear cond_;
};

/// Coupling layers with a channel flip after each one.
class FlowStack {
public:
    FlowStack(const CouplingConfig& config, std::size_t depth, Rng& rng);

    FlowOutput forward(const Tensor& x, const Tensor& cond = {}) const;
    Tensor inverse(const Tensor& z, const Tensor& cond = {}) const;
    // Per-layer logdets from one forward pass, in layer order.
    std::vector<Tensor> layer_logdets(const Tensor& x, const Tensor& cond = {}) const;
    // Attention map of every layer for the input propagated through the stack.
    std::vector<Tensor> attention_maps(const Tensor& x, const Tensor& cond = {}) const;

    std::size_t depth() const { return layers_.size(); }
    CouplingLayer& layer(std::size_t i) { return layers_.at(i); }
    const CouplingLayer& layer(std::size_t i) const { return layers_.at(i); }
    void set_attention_scale(double scale);

    std::vector<NamedParam> parameters() const;
    std::vector<NamedParam> attention_parameters() const;

private:
    std::vector<CouplingLayer> layers_;
};

}  // namespace toytts
