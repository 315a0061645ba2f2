#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "toytts/rng.hpp"
#include "toytts/tensor.hpp"

namespace toytts {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

std::vector<Tensor> tensors_of(const std::vector<NamedParam>& params);

/// Learnable leaf drawn uniformly from [-k, k] with k = 1/sqrt(fan_in).
Tensor uniform_param(Shape shape, std::size_t fan_in, Rng& rng);

struct AdamWConfig {
    double lr = 2e-4;
    double beta1 = 0.8;
    double beta2 = 0.99;
    double weight_decay = 0.01;
    double eps = 1e-9;
    // Multiplied into the learning rate once per epoch.
    double epoch_decay = std::pow(0.999, 1.0 / 8.0);
};

/// AdamW with decoupled weight decay and an exponential per-epoch schedule.
class AdamW {
public:
    AdamW(std::vector<Tensor> params, AdamWConfig config);

    void zero_grad();
    // Applies one update from the accumulated gradients.
    void step();
    void set_epoch(long epoch);

    double lr() const;
    long steps_taken() const { return t_; }
    const AdamWConfig& config() const { return config_; }

    static double lr_at_epoch(const AdamWConfig& config, long epoch);

private:
    std::vector<Tensor> params_;
    AdamWConfig config_;
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
    long epoch_ = 0;
};

}  // namespace toytts
