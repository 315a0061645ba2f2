#include "toytts/optim.hpp"

namespace toytts {

std::vector<Tensor> tensors_of(const std::vector<NamedParam>& params) {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const auto& p : params) {
        out.push_back(p.tensor);
    }
    return out;
}

Tensor uniform_param(Shape shape, std::size_t fan_in, Rng& rng) {
    if (fan_in == 0) {
        throw ContractError("uniform_param: fan_in must be positive");
    }
    const double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) {
        v = rng.uniform(-k, k);
    }
    return Tensor::from_data(std::move(shape), std::move(data), true);
}

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
    for (const Tensor& p : params_) {
        if (!p.requires_grad()) {
            throw ContractError("AdamW: parameter does not require grad");
        }
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void AdamW::zero_grad() {
    for (Tensor& p : params_) {
        p.zero_grad();
    }
}

double AdamW::lr_at_epoch(const AdamWConfig& config, long epoch) {
    return config.lr * std::pow(config.epoch_decay, static_cast<double>(epoch));
}

double AdamW::lr() const { return lr_at_epoch(config_, epoch_); }

void AdamW::set_epoch(long epoch) { epoch_ = epoch; }

void AdamW::step() {
    ++t_;
    const double lr_now = lr();
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double decay = 1.0 - lr_now * config_.weight_decay;
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = params_[k];
        auto w = p.mutable_data();
        const auto g = p.grad();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = g.empty() ? 0.0 : g[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            w[i] = w[i] * decay - lr_now * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

}  // namespace toytts
