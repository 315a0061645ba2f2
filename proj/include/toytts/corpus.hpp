#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "toytts/rng.hpp"
#include "toytts/tensor.hpp"

namespace toytts {

// Inclusive integer range; durations are drawn uniformly from it.
struct DurationLaw {
    int lo = 1;
    int hi = 1;
};

struct CorpusSpec {
    std::size_t vocab_size = 8;
    std::size_t channels = 4;
    std::size_t instances = 64;
    std::size_t min_tokens = 3;
    std::size_t max_tokens = 8;
    // Bounds for the per-token duration laws drawn at generation time.
    int min_duration = 2;
    int max_duration = 6;
    // When non-empty, one law per token replaces the drawn ones.
    std::vector<DurationLaw> laws;
    double prototype_scale = 1.5;
    // Prototypes are redrawn until every pair is at least this far apart.
    double min_separation = 1.0;
    double observation_noise = 0.0;
    std::size_t speakers = 0;
    double speaker_offset_scale = 0.5;
    // Adjacent identical tokens make their shared boundary unidentifiable.
    bool allow_adjacent_repeats = false;

    void validate() const;
};

struct ToyInstance {
    std::vector<int> tokens;
    std::size_t speaker = 0;
    std::vector<int> durations;
    Tensor frames;  // (C, J)

    std::size_t frame_count() const { return frames.defined() ? frames.dim(1) : 0; }
};

/// Synthetic latent frames with known alignments: every token owns a
/// prototype vector and a duration law; an instance repeats each token's
/// prototype (plus a per-speaker offset) for its sampled duration and adds
/// Gaussian observation noise.
struct ToyCorpus {
    std::size_t vocab_size = 0;
    std::size_t channels = 0;
    double observation_noise = 0.0;
    std::vector<std::vector<double>> prototypes;       // V x C
    std::vector<DurationLaw> laws;                     // V
    std::vector<std::vector<double>> speaker_offsets;  // S x C, empty for one speaker
    std::vector<ToyInstance> instances;

    std::size_t speaker_count() const { return speaker_offsets.empty() ? 1 : speaker_offsets.size(); }

    // Durations sampled from each token's law.
    ToyInstance synthesize(const std::vector<int>& tokens, std::size_t speaker, Rng& rng) const;
    ToyInstance synthesize(const std::vector<int>& tokens, std::size_t speaker,
                           const std::vector<int>& durations, Rng& rng) const;

    // Splits off the last `count` instances into a second corpus sharing the
    // prototypes and laws.
    std::pair<ToyCorpus, ToyCorpus> split_tail(std::size_t count) const;

    // Throws unless every instance is consistent with its durations.
    void validate() const;
};

ToyCorpus generate_corpus(const CorpusSpec& spec, Rng& rng);

void save_corpus(const ToyCorpus& corpus, const std::string& path);
ToyCorpus load_corpus(const std::string& path);
std::string corpus_to_json(const ToyCorpus& corpus);
ToyCorpus corpus_from_json(const std::string& text);

}  // namespace toytts
