#include "toytts/corpus.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace toytts {

using nlohmann::json;

void CorpusSpec::validate() const {
    if (vocab_size < 2) {
        throw ContractError("CorpusSpec: vocabulary needs at least 2 tokens");
    }
    if (channels < 1) {
        throw ContractError("CorpusSpec: at least one channel is required");
    }
    if (min_tokens == 0 || max_tokens < min_tokens) {
        throw ContractError("CorpusSpec: degenerate sequence length range [" +
                            std::to_string(min_tokens) + ", " + std::to_string(max_tokens) + "]");
    }
    if (min_duration < 1 || max_duration < min_duration) {
        throw ContractError("CorpusSpec: duration bounds must satisfy 1 <= min <= max");
    }
    if (!laws.empty()) {
        if (laws.size() != vocab_size) {
            throw ContractError("CorpusSpec: need one duration law per token");
        }
        for (const auto& law : laws) {
            if (law.lo < 1 || law.hi < law.lo) {
                throw ContractError("CorpusSpec: invalid duration law");
            }
        }
    }
    if (observation_noise < 0.0 || prototype_scale <= 0.0) {
        throw ContractError("CorpusSpec: scales must be non-negative");
    }
}

ToyInstance ToyCorpus::synthesize(const std::vector<int>& tokens, std::size_t speaker, Rng& rng) const {
    std::vector<int> durations;
    durations.reserve(tokens.size());
    for (int tok : tokens) {
        if (tok < 0 || static_cast<std::size_t>(tok) >= vocab_size) {
            throw ContractError("ToyCorpus: token " + std::to_string(tok) + " out of range");
        }
        const DurationLaw& law = laws[static_cast<std::size_t>(tok)];
        durations.push_back(static_cast<int>(rng.uniform_int(law.lo, law.hi)));
    }
    return synthesize(tokens, speaker, durations, rng);
}

ToyInstance ToyCorpus::synthesize(const std::vector<int>& tokens, std::size_t speaker,
                                  const std::vector<int>& durations, Rng& rng) const {
    if (tokens.empty() || tokens.size() != durations.size()) {
        throw ContractError("ToyCorpus: tokens and durations must be non-empty and equal length");
    }
    if (speaker >= speaker_count()) {
        throw ContractError("ToyCorpus: speaker " + std::to_string(speaker) + " out of range");
    }
    std::size_t frames = 0;
    for (int d : durations) {
        if (d < 1) {
            throw ContractError("ToyCorpus: durations must be at least 1");
        }
        frames += static_cast<std::size_t>(d);
    }
    std::vector<double> data(channels * frames);
    std::size_t j = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& proto = prototypes.at(static_cast<std::size_t>(tokens[i]));
        for (int k = 0; k < durations[i]; ++k, ++j) {
            for (std::size_t c = 0; c < channels; ++c) {
                double v = proto[c];
                if (!speaker_offsets.empty()) {
                    v += speaker_offsets[speaker][c];
                }
                if (observation_noise > 0.0) {
                    v += observation_noise * rng.normal();
                }
                data[c * frames + j] = v;
            }
        }
    }
    ToyInstance inst;
    inst.tokens = tokens;
    inst.speaker = speaker;
    inst.durations = durations;
    inst.frames = Tensor::from_data({channels, frames}, std::move(data));
    return inst;
}

std::pair<ToyCorpus, ToyCorpus> ToyCorpus::split_tail(std::size_t count) const {
    if (count > instances.size()) {
        throw ContractError("ToyCorpus::split_tail: not enough instances");
    }
    ToyCorpus head = *this, tail = *this;
    head.instances.assign(instances.begin(), instances.end() - static_cast<long>(count));
    tail.instances.assign(instances.end() - static_cast<long>(count), instances.end());
    return {std::move(head), std::move(tail)};
}

void ToyCorpus::validate() const {
    if (prototypes.size() != vocab_size || laws.size() != vocab_size) {
        throw FormatError("ToyCorpus: prototype or law table does not match vocabulary");
    }
    for (const auto& p : prototypes) {
        if (p.size() != channels) {
            throw FormatError("ToyCorpus: prototype width does not match channels");
        }
    }
    for (const auto& inst : instances) {
        if (inst.tokens.empty() || inst.tokens.size() != inst.durations.size()) {
            throw FormatError("ToyCorpus: instance tokens and durations disagree");
        }
        long total = 0;
        for (int d : inst.durations) {
            if (d < 1) {
                throw FormatError("ToyCorpus: duration below one frame");
            }
            total += d;
        }
        if (!inst.frames.defined() || inst.frames.rank() != 2 || inst.frames.dim(0) != channels ||
            static_cast<long>(inst.frames.dim(1)) != total) {
            throw FormatError("ToyCorpus: frame matrix does not match durations");
        }
        for (int tok : inst.tokens) {
            if (tok < 0 || static_cast<std::size_t>(tok) >= vocab_size) {
                throw FormatError("ToyCorpus: token out of range");
            }
        }
        if (inst.speaker >= speaker_count()) {
            throw FormatError("ToyCorpus: speaker out of range");
        }
    }
}

ToyCorpus generate_corpus(const CorpusSpec& spec, Rng& rng) {
    spec.validate();
    ToyCorpus corpus;
    corpus.vocab_size = spec.vocab_size;
    corpus.channels = spec.channels;
    corpus.observation_noise = spec.observation_noise;

    constexpr int kMaxAttempts = 10000;
    for (std::size_t v = 0; v < spec.vocab_size; ++v) {
        std::vector<double> proto(spec.channels);
        for (int attempt = 0;; ++attempt) {
            for (double& x : proto) {
                x = spec.prototype_scale * rng.normal();
            }
            bool far = true;
            for (const auto& other : corpus.prototypes) {
                double d2 = 0.0;
                for (std::size_t c = 0; c < spec.channels; ++c) {
                    d2 += (proto[c] - other[c]) * (proto[c] - other[c]);
                }
                far = far && std::sqrt(d2) >= spec.min_separation;
            }
            if (far) {
                break;
            }
            if (attempt == kMaxAttempts) {
                throw ContractError("generate_corpus: cannot place prototypes with the requested separation");
            }
        }
        corpus.prototypes.push_back(proto);
    }

    if (!spec.laws.empty()) {
        corpus.laws = spec.laws;
    } else {
        for (std::size_t v = 0; v < spec.vocab_size; ++v) {
            DurationLaw law;
            law.lo = static_cast<int>(rng.uniform_int(spec.min_duration, spec.max_duration));
            law.hi = static_cast<int>(rng.uniform_int(law.lo, spec.max_duration));
            corpus.laws.push_back(law);
        }
    }

    if (spec.speakers > 1) {
        for (std::size_t s = 0; s < spec.speakers; ++s) {
            std::vector<double> offset(spec.channels);
            for (double& x : offset) {
                x = spec.speaker_offset_scale * rng.normal();
            }
            corpus.speaker_offsets.push_back(offset);
        }
    }

    const auto vocab = static_cast<std::int64_t>(spec.vocab_size);
    for (std::size_t n = 0; n < spec.instances; ++n) {
        const auto len = static_cast<std::size_t>(rng.uniform_int(
            static_cast<std::int64_t>(spec.min_tokens), static_cast<std::int64_t>(spec.max_tokens)));
        std::vector<int> tokens;
        for (std::size_t i = 0; i < len; ++i) {
            int tok;
            if (i > 0 && !spec.allow_adjacent_repeats) {
                // Uniform over the other V-1 tokens.
                tok = static_cast<int>(rng.uniform_int(0, vocab - 2));
                if (tok >= tokens.back()) {
                    ++tok;
                }
            } else {
                tok = static_cast<int>(rng.uniform_int(0, vocab - 1));
            }
            tokens.push_back(tok);
        }
        const std::size_t speaker =
            spec.speakers > 1 ? static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(spec.speakers) - 1)) : 0;
        corpus.instances.push_back(corpus.synthesize(tokens, speaker, rng));
    }
    return corpus;
}

std::string corpus_to_json(const ToyCorpus& corpus) {
    json j;
    j["format"] = "toytts-corpus";
    j["version"] = 1;
    j["vocab_size"] = corpus.vocab_size;
    j["channels"] = corpus.channels;
    j["observation_noise"] = corpus.observation_noise;
    j["prototypes"] = corpus.prototypes;
    json laws = json::array();
    for (const auto& law : corpus.laws) {
        laws.push_back({law.lo, law.hi});
    }
    j["duration_laws"] = laws;
    j["speaker_offsets"] = corpus.speaker_offsets;
    json insts = json::array();
    for (const auto& inst : corpus.instances) {
        json frames = json::array();
        const std::size_t c = inst.frames.dim(0), n = inst.frames.dim(1);
        for (std::size_t t = 0; t < n; ++t) {
            json row = json::array();
            for (std::size_t k = 0; k < c; ++k) {
                row.push_back(inst.frames.at(k, t));
            }
            frames.push_back(row);
        }
        insts.push_back({{"tokens", inst.tokens},
                         {"speaker", inst.speaker},
                         {"durations", inst.durations},
                         {"frames", frames}});
    }
    j["instances"] = insts;
    return j.dump();
}

ToyCorpus corpus_from_json(const std::string& text) {
    ToyCorpus corpus;
    try {
        const json j = json::parse(text);
        if (j.at("format") != "toytts-corpus" || j.at("version") != 1) {
            throw FormatError("corpus: unsupported format or version");
        }
        corpus.vocab_size = j.at("vocab_size").get<std::size_t>();
        corpus.channels = j.at("channels").get<std::size_t>();
        corpus.observation_noise = j.at("observation_noise").get<double>();
        corpus.prototypes = j.at("prototypes").get<std::vector<std::vector<double>>>();
        for (const auto& law : j.at("duration_laws")) {
            corpus.laws.push_back({law.at(0).get<int>(), law.at(1).get<int>()});
        }
        corpus.speaker_offsets = j.at("speaker_offsets").get<std::vector<std::vector<double>>>();
        for (const auto& ji : j.at("instances")) {
            ToyInstance inst;
            inst.tokens = ji.at("tokens").get<std::vector<int>>();
            inst.speaker = ji.at("speaker").get<std::size_t>();
            inst.durations = ji.at("durations").get<std::vector<int>>();
            const auto rows = ji.at("frames").get<std::vector<std::vector<double>>>();
            std::vector<double> data(corpus.channels * rows.size());
            for (std::size_t t = 0; t < rows.size(); ++t) {
                if (rows[t].size() != corpus.channels) {
                    throw FormatError("corpus: frame width does not match channels");
                }
                for (std::size_t c = 0; c < corpus.channels; ++c) {
                    data[c * rows.size() + t] = rows[t][c];
                }
            }
            inst.frames = Tensor::from_data({corpus.channels, rows.size()}, std::move(data));
            corpus.instances.push_back(std::move(inst));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("corpus: ") + e.what());
    }
    corpus.validate();
    return corpus;
}

void save_corpus(const ToyCorpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    out << corpus_to_json(corpus) << '\n';
}

ToyCorpus load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return corpus_from_json(ss.str());
}

}  // namespace toytts
