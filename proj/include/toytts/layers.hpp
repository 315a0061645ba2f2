#pragma once

#include <string>
#include <vector>

#include "toytts/optim.hpp"
#include "toytts/tensor.hpp"

namespace toytts {

/// y = W x + b over channels-first data (in, T) -> (out, T).
struct Linear {
    Tensor weight;  // (out, in)
    Tensor bias;    // (out, 1), undefined when built without bias

    Linear() = default;
    Linear(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);

    Tensor operator()(const Tensor& x) const;
    // Same map with the parameters detached from the tape.
    Tensor frozen(const Tensor& x) const;

    void zero();
    void append_params(const std::string& prefix, std::vector<NamedParam>& out) const;
};

/// Same-padded stride-1 convolution over (channels, T).
struct Conv1d {
    Tensor weight;  // (out, in, kernel)
    Tensor bias;    // (out)

    Conv1d() = default;
    Conv1d(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng);

    Tensor operator()(const Tensor& x) const;
    Tensor frozen(const Tensor& x) const;

    void zero();
    void append_params(const std::string& prefix, std::vector<NamedParam>& out) const;
};

void fill(Tensor& t, double value);

}  // namespace toytts
