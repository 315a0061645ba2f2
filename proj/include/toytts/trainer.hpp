#pragma once

#include <functional>
#include <string>
#include <vector>

#include "toytts/alignment.hpp"
#include "toytts/config.hpp"
#include "toytts/corpus.hpp"
#include "toytts/duration.hpp"
#include "toytts/model.hpp"

namespace toytts {

struct AlignmentEval {
    double exact_match_rate = 0.0;   // fraction of tokens whose duration is exact
    double mean_abs_error = 0.0;     // frames per token
    std::size_t tokens = 0;
};

struct MainMetricsRow {
    long step = 0;
    long epoch = 0;
    double lr = 0.0;
    double noise_scale = 0.0;
    double loss = 0.0;  // negative log-likelihood per frame channel
    bool evaluated = false;
    AlignmentEval eval;
};

struct TrainResult {
    ToyModel model;
    std::vector<MainMetricsRow> main;
    std::vector<DurationLossRow> duration;
};

/// Negative log-likelihood of one instance's frames under the model:
/// frames go through the flows, MAS picks the alignment against the prior
/// (outside the tape) and the loss is the aligned Gaussian NLL minus the
/// flow log-determinant. Returns the summed (not averaged) loss.
Tensor instance_nll(const ToyModel& model, const ToyInstance& inst, double noise_scale, Rng& rng,
                    Alignment* chosen = nullptr);

/// Token-by-frame log-likelihood grid of an instance under the model.
LogProbGrid model_grid(const ToyModel& model, const ToyInstance& inst);

using PriorGrid = std::function<LogProbGrid(const ToyInstance&)>;

/// Noise-free MAS against each instance's true durations.
AlignmentEval eval_alignment(const ToyModel& model, const ToyCorpus& corpus);
AlignmentEval eval_alignment(const PriorGrid& prior, const ToyCorpus& corpus);

/// Frozen duration targets: encoder h_text (detached) with log MAS durations
/// (noise 0), grouped into padded batches in corpus order.
std::vector<DurationBatch> build_duration_corpus(const ToyModel& model, const ToyCorpus& corpus,
                                                 std::size_t batch_size);

/// Main phase (encoder + flows via MAS likelihood) followed by the duration
/// phase on frozen MAS targets. Steps of zero skip the phase entirely.
TrainResult train_toy(const TrainConfig& config, const ToyCorpus& train, const ToyCorpus& heldout);

/// Training and held-out corpora drawn from the config's corpus section.
std::pair<ToyCorpus, ToyCorpus> make_corpora(const TrainConfig& config);

std::string main_metrics_csv(const std::vector<MainMetricsRow>& rows);
std::string duration_metrics_csv(const std::vector<DurationLossRow>& rows);

void save_duration_corpus(const std::vector<DurationBatch>& corpus, const std::string& path);
std::vector<DurationBatch> load_duration_corpus(const std::string& path);

// Deterministic synthetic duration corpus: each token gets a fixed random
// embedding as h_text and targets are log of the true durations.
std::vector<DurationBatch> synthetic_duration_corpus(const ToyCorpus& corpus, std::size_t text_width,
                                                     std::size_t batch_size, Rng& rng);

}  // namespace toytts
