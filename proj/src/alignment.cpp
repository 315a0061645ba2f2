#include "toytts/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace toytts {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_grid(const LogProbGrid& grid) {
    if (grid.values.size() != grid.tokens * grid.frames) {
        throw ShapeError("LogProbGrid: " + std::to_string(grid.values.size()) + " values for " +
                         std::to_string(grid.tokens) + " x " + std::to_string(grid.frames));
    }
    if (grid.valid_tokens > grid.tokens || grid.valid_frames > grid.frames) {
        throw ContractError("LogProbGrid: valid region exceeds grid");
    }
    if (grid.valid_tokens == 0) {
        throw ContractError("LogProbGrid: no valid tokens");
    }
    if (grid.valid_tokens > grid.valid_frames) {
        throw InfeasibleAlignment("alignment: " + std::to_string(grid.valid_tokens) +
                                  " tokens cannot cover " + std::to_string(grid.valid_frames) +
                                  " frames monotonically");
    }
    for (std::size_t i = 0; i < grid.valid_tokens; ++i) {
        for (std::size_t j = 0; j < grid.valid_frames; ++j) {
            if (!std::isfinite(grid.at(i, j))) {
                throw NumericError("LogProbGrid: non-finite entry at (" + std::to_string(i) + ", " +
                                   std::to_string(j) + ")");
            }
        }
    }
}

double valid_stddev(const LogProbGrid& grid) {
    const std::size_t n = grid.valid_tokens * grid.valid_frames;
    double mu = 0.0;
    for (std::size_t i = 0; i < grid.valid_tokens; ++i) {
        for (std::size_t j = 0; j < grid.valid_frames; ++j) {
            mu += grid.at(i, j);
        }
    }
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < grid.valid_tokens; ++i) {
        for (std::size_t j = 0; j < grid.valid_frames; ++j) {
            const double d = grid.at(i, j) - mu;
            var += d * d;
        }
    }
    return std::sqrt(var / static_cast<double>(n));
}

}  // namespace

LogProbGrid LogProbGrid::from_tensor(const Tensor& p) {
    if (p.rank() != 2) {
        throw ShapeError("LogProbGrid: expected (tokens, frames), got " + shape_str(p.shape()));
    }
    return from_tensor(p, p.dim(0), p.dim(1));
}

LogProbGrid LogProbGrid::from_tensor(const Tensor& p, std::size_t valid_tokens,
                                     std::size_t valid_frames) {
    if (p.rank() != 2) {
        throw ShapeError("LogProbGrid: expected (tokens, frames), got " + shape_str(p.shape()));
    }
    LogProbGrid g;
    g.tokens = p.dim(0);
    g.frames = p.dim(1);
    g.values.assign(p.data().begin(), p.data().end());
    g.valid_tokens = valid_tokens;
    g.valid_frames = valid_frames;
    if (valid_tokens > g.tokens || valid_frames > g.frames) {
        throw ContractError("LogProbGrid: valid region exceeds grid");
    }
    return g;
}

void Alignment::validate(std::size_t frames) const {
    if (durations.empty()) {
        throw ContractError("Alignment: no tokens");
    }
    long total = 0;
    for (int d : durations) {
        if (d < 1) {
            throw ContractError("Alignment: duration " + std::to_string(d) + " below one frame");
        }
        total += d;
    }
    if (static_cast<std::size_t>(total) != frames) {
        throw ContractError("Alignment: durations sum to " + std::to_string(total) + ", expected " +
                            std::to_string(frames));
    }
}

std::size_t Alignment::total_frames() const {
    std::size_t total = 0;
    for (int d : durations) {
        total += static_cast<std::size_t>(std::max(d, 0));
    }
    return total;
}

std::vector<std::size_t> Alignment::frame_to_token() const {
    std::vector<std::size_t> map;
    map.reserve(total_frames());
    for (std::size_t i = 0; i < durations.size(); ++i) {
        for (int k = 0; k < durations[i]; ++k) {
            map.push_back(i);
        }
    }
    return map;
}

LogProbGrid log_prob_grid(const Tensor& z, const Tensor& mu, const Tensor& sigma) {
    if (z.rank() != 2 || mu.rank() != 2 || sigma.shape() != mu.shape() || z.dim(1) != mu.dim(1)) {
        throw ShapeError("log_prob_grid: z " + shape_str(z.shape()) + ", mu " +
                         shape_str(mu.shape()) + ", sigma " + shape_str(sigma.shape()));
    }
    for (double s : sigma.data()) {
        if (!(s > 0.0)) {
            throw ContractError("log_prob_grid: sigma must be strictly positive");
        }
    }
    const std::size_t frames = z.dim(0), tokens = mu.dim(0), channels = z.dim(1);
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    const auto zd = z.data(), md = mu.data(), sd = sigma.data();
    LogProbGrid g;
    g.tokens = tokens;
    g.frames = frames;
    g.valid_tokens = tokens;
    g.valid_frames = frames;
    g.values.assign(tokens * frames, 0.0);
    for (std::size_t i = 0; i < tokens; ++i) {
        for (std::size_t j = 0; j < frames; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < channels; ++c) {
                const double s = sd[i * channels + c];
                const double d = zd[j * channels + c] - md[i * channels + c];
                acc += -std::log(s) - half_log_2pi - d * d / (2.0 * s * s);
            }
            g.values[i * frames + j] = acc;
        }
    }
    return g;
}

SearchResult mas_search(const LogProbGrid& grid, double noise_scale, Rng& rng) {
    check_grid(grid);
    if (!(noise_scale >= 0.0)) {
        throw ContractError("mas_search: noise_scale must be non-negative");
    }
    const std::size_t ti = grid.valid_tokens, tj = grid.valid_frames;
    const double noise_std = noise_scale > 0.0 ? valid_stddev(grid) * noise_scale : 0.0;

    std::vector<double> q(ti * tj, kNegInf);
    auto Q = [&](std::size_t i, std::size_t j) -> double& { return q[i * tj + j]; };
    for (std::size_t j = 0; j < tj; ++j) {
        for (std::size_t i = 0; i < ti && i <= j; ++i) {
            const double eps = noise_scale > 0.0 ? rng.normal() * noise_std : 0.0;
            double prev;
            if (j == 0) {
                prev = 0.0;
            } else if (i == 0) {
                prev = Q(0, j - 1);
            } else {
                prev = std::max(Q(i - 1, j - 1), Q(i, j - 1));
            }
            Q(i, j) = prev + grid.at(i, j) + eps;
        }
    }

    SearchResult result;
    result.best_q = Q(ti - 1, tj - 1);
    result.alignment.durations.assign(ti, 0);
    std::size_t i = ti - 1;
    for (std::size_t j = tj - 1; j > 0; --j) {
        ++result.alignment.durations[i];
        if (i > 0 && (i == j || Q(i - 1, j - 1) >= Q(i, j - 1))) {
            --i;
        }
    }
    ++result.alignment.durations[0];
    return result;
}

SearchResult brute_force_align(const LogProbGrid& grid) {
    check_grid(grid);
    const std::size_t ti = grid.valid_tokens, tj = grid.valid_frames;
    if (ti > 6 || tj > 10) {
        throw ContractError("brute_force_align: size guard exceeded (" + std::to_string(ti) +
                            " tokens, " + std::to_string(tj) + " frames; limit 6 x 10)");
    }
    // Enumerate compositions by choosing ti-1 cut points among tj-1 gaps.
    std::vector<std::size_t> cuts(ti - 1);
    for (std::size_t k = 0; k + 1 < ti; ++k) {
        cuts[k] = k + 1;
    }
    SearchResult best;
    best.best_q = kNegInf;
    bool first = true;
    while (true) {
        Alignment a;
        std::size_t prev = 0;
        for (std::size_t c : cuts) {
            a.durations.push_back(static_cast<int>(c - prev));
            prev = c;
        }
        a.durations.push_back(static_cast<int>(tj - prev));
        const double score = alignment_log_likelihood(grid, a);
        if (first || score > best.best_q) {
            best.best_q = score;
            best.alignment = a;
            first = false;
        }
        // Next combination in lexicographic order.
        std::size_t k = cuts.size();
        while (k > 0 && cuts[k - 1] == tj - 1 - (cuts.size() - k)) {
            --k;
        }
        if (k == 0) {
            break;
        }
        ++cuts[k - 1];
        for (std::size_t m = k; m < cuts.size(); ++m) {
            cuts[m] = cuts[m - 1] + 1;
        }
    }
    return best;
}

double alignment_log_likelihood(const LogProbGrid& grid, const Alignment& alignment) {
    alignment.validate(grid.valid_frames);
    if (alignment.durations.size() != grid.valid_tokens) {
        throw ContractError("alignment_log_likelihood: alignment covers " +
                            std::to_string(alignment.durations.size()) + " tokens, grid has " +
                            std::to_string(grid.valid_tokens));
    }
    double total = 0.0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < alignment.durations.size(); ++i) {
        for (int k = 0; k < alignment.durations[i]; ++k, ++j) {
            total += grid.at(i, j);
        }
    }
    return total;
}

double noise_scale_at(std::int64_t step) {
    if (step < 0) {
        throw ContractError("noise_scale_at: step must be non-negative");
    }
    return std::max(0.0, 0.01 - 2e-6 * static_cast<double>(step));
}

}  // namespace toytts
