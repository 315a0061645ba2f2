#pragma once

#include <cstdint>
#include <string>

#include "toytts/corpus.hpp"
#include "toytts/optim.hpp"

namespace toytts {

/// Everything a toy training run needs. Stored as flat `key = value` text;
/// see docs/formats.md for the key list.
struct TrainConfig {
    std::uint64_t seed = 7;
    long steps_main = 3000;
    long steps_duration = 1000;
    std::size_t batch_size = 8;
    long eval_every = 500;

    AdamWConfig main_opt{.lr = 2e-3};
    AdamWConfig duration_opt{.lr = 1e-3};

    // Ablation switches.
    bool noise_schedule = true;
    bool transformer_block = true;
    bool adversarial_duration = true;
    bool speaker_conditioning = true;

    // Model sizes.
    std::size_t hidden = 32;
    std::size_t heads = 2;
    std::size_t blocks = 4;
    std::size_t ffn = 64;
    std::size_t speaker_width = 8;
    std::size_t flow_depth = 4;
    std::size_t flow_hidden = 16;
    std::size_t flow_key_width = 8;
    std::size_t duration_filter = 32;
    std::size_t duration_noise_width = 2;

    // Corpus; held-out instances are generated alongside the training ones.
    CorpusSpec corpus;
    std::size_t heldout_instances = 32;

    // Rejects negative step counts and inconsistent sizes.
    void validate() const;
};

std::string format_config(const TrainConfig& config);
// Unknown or repeated keys are FormatErrors; omitted keys keep their defaults.
// Step counts must be positive in a config file.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::string& path);
void save_config(const TrainConfig& config, const std::string& path);

}  // namespace toytts
