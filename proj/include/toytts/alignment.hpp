#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "toytts/rng.hpp"
#include "toytts/tensor.hpp"

namespace toytts {

/// Token-by-frame log-likelihood matrix. Only the top-left
/// valid_tokens x valid_frames block takes part in any statistic or search.
struct LogProbGrid {
    std::size_t tokens = 0;
    std::size_t frames = 0;
    std::vector<double> values;  // row-major, tokens x frames
    std::size_t valid_tokens = 0;
    std::size_t valid_frames = 0;

    double at(std::size_t i, std::size_t j) const { return values[i * frames + j]; }

    // Full-size grid from a rank-2 (tokens, frames) tensor.
    static LogProbGrid from_tensor(const Tensor& p);
    static LogProbGrid from_tensor(const Tensor& p, std::size_t valid_tokens, std::size_t valid_frames);
};

/// Monotonic, surjective frame-to-token map stored as per-token frame counts.
struct Alignment {
    std::vector<int> durations;

    // Throws ContractError unless every duration is >= 1 and they sum to frames.
    void validate(std::size_t frames) const;
    std::size_t total_frames() const;
    // Token index for every frame, in frame order.
    std::vector<std::size_t> frame_to_token() const;
};

struct SearchResult {
    Alignment alignment;
    double best_q = 0.0;
};

class InfeasibleAlignment : public ContractError {
public:
    using ContractError::ContractError;
};

/// P[i, j] = sum_c log N(z[j, c]; mu[i, c], sigma[i, c]).
/// z: (frames, channels); mu, sigma: (tokens, channels).
LogProbGrid log_prob_grid(const Tensor& z, const Tensor& mu, const Tensor& sigma);

/// Monotonic alignment search. Each forward cell gets
/// n * std(P) * noise_scale added, n standard normal and std the population
/// deviation over the valid region. No deviates are drawn when noise_scale
/// is zero. On exact ties the backtrack advances to the previous token.
SearchResult mas_search(const LogProbGrid& grid, double noise_scale, Rng& rng);

/// Exhaustive enumeration of every composition of the valid frames into the
/// valid tokens; limited to 6 tokens and 10 frames.
SearchResult brute_force_align(const LogProbGrid& grid);

/// sum over frames j (ascending) of P[token(j), j].
double alignment_log_likelihood(const LogProbGrid& grid, const Alignment& alignment);

/// max(0, 0.01 - 2e-6 * step).
double noise_scale_at(std::int64_t step);

}  // namespace toytts
