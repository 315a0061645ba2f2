#pragma once

#include <functional>
#include <vector>

#include "toytts/tensor.hpp"

namespace toytts {

/// Compares the tape gradient of f at x against central differences and
/// returns max_i |analytic - numeric| / max(1, |numeric|). x must be a leaf;
/// it is made differentiable for the duration of the check and restored.
double check_grad(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h = 1e-5);

/// Same measure over several leaves read implicitly by a closure, e.g. the
/// parameters of a module.
double check_grad_params(const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                         double h = 1e-5);

}  // namespace toytts
