#include "toytts/layers.hpp"

#include <algorithm>

#include "toytts/ops.hpp"

namespace toytts {

void fill(Tensor& t, double value) {
    auto d = t.mutable_data();
    std::fill(d.begin(), d.end(), value);
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, bool with_bias)
    : weight(uniform_param({out, in}, in, rng)) {
    if (with_bias) {
        bias = uniform_param({out, 1}, in, rng);
    }
}

Tensor Linear::operator()(const Tensor& x) const {
    Tensor y = matmul(weight, x);
    return bias.defined() ? add(y, bias) : y;
}

Tensor Linear::frozen(const Tensor& x) const {
    Tensor y = matmul(weight.detach(), x);
    return bias.defined() ? add(y, bias.detach()) : y;
}

void Linear::zero() {
    fill(weight, 0.0);
    if (bias.defined()) {
        fill(bias, 0.0);
    }
}

void Linear::append_params(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".weight", weight});
    if (bias.defined()) {
        out.push_back({prefix + ".bias", bias});
    }
}

Conv1d::Conv1d(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng)
    : weight(uniform_param({out, in, kernel}, in * kernel, rng)),
      bias(uniform_param({out}, in * kernel, rng)) {}

Tensor Conv1d::operator()(const Tensor& x) const { return conv1d(x, weight, bias); }

Tensor Conv1d::frozen(const Tensor& x) const { return conv1d(x, weight.detach(), bias.detach()); }

void Conv1d::zero() {
    fill(weight, 0.0);
    fill(bias, 0.0);
}

void Conv1d::append_params(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

}  // namespace toytts
