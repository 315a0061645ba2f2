#include "toytts/flows.hpp"

#include <cmath>
#include <string>

#include "toytts/ops.hpp"

namespace toytts {

CouplingLayer::CouplingLayer(const CouplingConfig& config, Rng& rng) : config_(config) {
    if (config.channels < 2 || config.channels % 2 != 0) {
        throw ContractError("CouplingLayer: channel count must be even, got " +
                            std::to_string(config.channels));
    }
    const std::size_t half = config.channels / 2;
    query_ = Linear(half, config.key_width, rng);
    key_ = Linear(half, config.key_width, rng);
    value_ = Linear(half, half, rng);
    out_ = Linear(half, half, rng);
    pre_ = Conv1d(half, config.hidden, config.kernel, rng);
    mid_ = Conv1d(config.hidden, config.hidden, config.kernel, rng);
    head_ = Conv1d(config.hidden, config.channels, 1, rng);
    head_.zero();
    if (config.cond_width > 0) {
        cond_ = Linear(config.cond_width, config.hidden, rng, false);
    }
}

void CouplingLayer::check_input(const char* who, const Tensor& x) const {
    if (x.rank() != 2 || x.dim(0) != config_.channels) {
        throw ShapeError(std::string(who) + ": expected (" + std::to_string(config_.channels) +
                         ", T), got " + shape_str(x.shape()));
    }
}

Tensor CouplingLayer::attention_from_half(const Tensor& x_a) const {
    const Tensor q = query_(x_a);
    const Tensor k = key_(x_a);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(config_.key_width));
    return softmax(scale(matmul(transpose(q), k), inv_sqrt), 1);
}

Tensor CouplingLayer::mix(const Tensor& x_a) const {
    if (!config_.use_transformer) {
        return x_a;
    }
    const Tensor attn = attention_from_half(x_a);
    const Tensor ctx = matmul(value_(x_a), transpose(attn));
    return add(x_a, scale(out_(ctx), config_.attention_scale));
}

std::pair<Tensor, Tensor> CouplingLayer::scale_shift(const Tensor& x_a, const Tensor& cond) const {
    const std::size_t half = config_.channels / 2;
    Tensor u = pre_(mix(x_a));
    if (cond.defined() && config_.cond_width > 0) {
        u = add(u, cond_(cond));
    }
    u = tanh(mid_(tanh(u)));
    const Tensor st = head_(u);
    Tensor s = clamp(slice_rows(st, 0, half), -config_.log_scale_clamp, config_.log_scale_clamp);
    Tensor t = slice_rows(st, half, config_.channels);
    return {s, t};
}

FlowOutput CouplingLayer::forward(const Tensor& x, const Tensor& cond) const {
    check_input("CouplingLayer::forward", x);
    const std::size_t half = config_.channels / 2;
    const Tensor x_a = slice_rows(x, 0, half);
    const Tensor x_b = slice_rows(x, half, config_.channels);
    auto [s, t] = scale_shift(x_a, cond);
    const Tensor y_b = add(mul(x_b, exp(s)), t);
    return {concat_rows({x_a, y_b}), sum(s)};
}

Tensor CouplingLayer::inverse(const Tensor& y, const Tensor& cond) const {
    check_input("CouplingLayer::inverse", y);
    const std::size_t half = config_.channels / 2;
    const Tensor y_a = slice_rows(y, 0, half);
    const Tensor y_b = slice_rows(y, half, config_.channels);
    auto [s, t] = scale_shift(y_a, cond);
    const Tensor x_b = mul(sub(y_b, t), exp(neg(s)));
    return concat_rows({y_a, x_b});
}

Tensor CouplingLayer::attention(const Tensor& x) const {
    check_input("CouplingLayer::attention", x);
    return attention_from_half(slice_rows(x, 0, config_.channels / 2).detach()).detach();
}

std::vector<NamedParam> CouplingLayer::parameters() const {
    std::vector<NamedParam> out = attention_parameters();
    pre_.append_params("pre", out);
    mid_.append_params("mid", out);
    head_.append_params("head", out);
    if (config_.cond_width > 0) {
        cond_.append_params("cond", out);
    }
    return out;
}

std::vector<NamedParam> CouplingLayer::attention_parameters() const {
    std::vector<NamedParam> out;
    query_.append_params("query", out);
    key_.append_params("key", out);
    value_.append_params("value", out);
    out_.append_params("out", out);
    return out;
}

FlowStack::FlowStack(const CouplingConfig& config, std::size_t depth, Rng& rng) {
    if (depth < 2) {
        throw ContractError("FlowStack: depth must be at least 2");
    }
    for (std::size_t i = 0; i < depth; ++i) {
        layers_.emplace_back(config, rng);
    }
}

FlowOutput FlowStack::forward(const Tensor& x, const Tensor& cond) const {
    Tensor h = x;
    Tensor total;
    for (const CouplingLayer& layer : layers_) {
        FlowOutput out = layer.forward(h, cond);
        total = total.defined() ? add(total, out.logdet) : out.logdet;
        h = flip_rows(out.y);
    }
    return {h, total};
}

Tensor FlowStack::inverse(const Tensor& z, const Tensor& cond) const {
    Tensor h = z;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        h = it->inverse(flip_rows(h), cond);
    }
    return h;
}

std::vector<Tensor> FlowStack::layer_logdets(const Tensor& x, const Tensor& cond) const {
    std::vector<Tensor> out;
    Tensor h = x;
    for (const CouplingLayer& layer : layers_) {
        FlowOutput step = layer.forward(h, cond);
        out.push_back(step.logdet);
        h = flip_rows(step.y);
    }
    return out;
}

std::vector<Tensor> FlowStack::attention_maps(const Tensor& x, const Tensor& cond) const {
    std::vector<Tensor> maps;
    Tensor h = x.detach();
    for (const CouplingLayer& layer : layers_) {
        maps.push_back(layer.attention(h));
        h = flip_rows(layer.forward(h, cond).y).detach();
    }
    return maps;
}

void FlowStack::set_attention_scale(double scale) {
    for (CouplingLayer& layer : layers_) {
        layer.mutable_config().attention_scale = scale;
    }
}

std::vector<NamedParam> FlowStack::parameters() const {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        for (auto& p : layers_[i].parameters()) {
            out.push_back({"layer" + std::to_string(i) + "." + p.name, p.tensor});
        }
    }
    return out;
}

std::vector<NamedParam> FlowStack::attention_parameters() const {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        for (auto& p : layers_[i].attention_parameters()) {
            out.push_back({"layer" + std::to_string(i) + "." + p.name, p.tensor});
        }
    }
    return out;
}

}  // namespace toytts
