#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace toytts {

struct GradCase {
    std::string name;
    double error = 0.0;  // as returned by check_grad
};

/// Finite-difference checks of every differentiable op and of the composed
/// modules (duration generator and discriminator, coupling layer, flow stack,
/// text encoder) at random shapes and values drawn from `seed`. Module
/// parameters are randomized first so no path is hidden behind a zero head.
std::vector<GradCase> gradient_suite(std::uint64_t seed);

}  // namespace toytts
