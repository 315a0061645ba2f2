#pragma once

#include <string>
#include <vector>

#include "toytts/config.hpp"
#include "toytts/duration.hpp"
#include "toytts/encoder.hpp"
#include "toytts/flows.hpp"

namespace toytts {

struct ModelConfig {
    EncoderConfig encoder;
    CouplingConfig flow;
    std::size_t flow_depth = 4;
    DurationConfig duration;
    std::size_t speakers = 0;  // 0 or 1 means single-speaker
    bool speaker_conditioning = true;

    static ModelConfig from_train_config(const TrainConfig& config);
    std::string to_text() const;
    static ModelConfig from_text(const std::string& text);
    bool multi_speaker() const { return speakers > 1; }
};

/// Text encoder, prior heads, flow stack, duration generator/discriminator
/// and speaker table as one parameter bundle.
class ToyModel {
public:
    ToyModel(const ModelConfig& config, Rng& rng);

    const ModelConfig& config() const { return config_; }

    TextEncoder encoder;
    FlowStack flows;
    DurationGenerator generator;
    DurationDiscriminator discriminator;
    SpeakerTable speakers;

    // Raw speaker embedding (E, 1); undefined for single-speaker models.
    Tensor speaker_vector(std::size_t speaker) const;
    // Projected speaker vector fed to flows and duration generator, or
    // undefined when conditioning is off or there is one speaker.
    Tensor condition_vector(const Tensor& speaker_vector) const;

    // Everything in the checkpoint, with stable names.
    std::vector<NamedParam> parameters() const;
    // Encoder, flows and speaker table: what the main phase optimizes.
    std::vector<NamedParam> main_parameters() const;

private:
    ModelConfig config_;
};

/// Binary checkpoint: magic "TTSCKPT1", u32 version, u32-length model
/// config text, u32 tensor count, then per tensor a u32-length name, u32
/// rank, u64 extents and little-endian f64 values. See docs/formats.md.
void save_checkpoint(const ToyModel& model, const std::string& path);
ToyModel load_checkpoint(const std::string& path);
std::string checkpoint_bytes(const ToyModel& model);
ToyModel checkpoint_from_bytes(const std::string& bytes);

}  // namespace toytts
