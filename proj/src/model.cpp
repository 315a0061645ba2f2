#include "toytts/model.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace toytts {

namespace {

constexpr char kMagic[8] = {'T', 'T', 'S', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    std::uint64_t take(int width) {
        if (pos_ + static_cast<std::size_t>(width) > bytes_.size()) {
            throw FormatError("checkpoint: truncated file");
        }
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
        }
        return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
    std::uint64_t u64() { return take(8); }
    double f64() { return std::bit_cast<double>(take(8)); }
    std::string str(std::size_t n) {
        if (pos_ + n > bytes_.size()) {
            throw FormatError("checkpoint: truncated file");
        }
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

std::map<std::string, std::string> parse_kv(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("checkpoint: malformed config line '" + line + "'");
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

}  // namespace

ModelConfig ModelConfig::from_train_config(const TrainConfig& c) {
    ModelConfig m;
    m.encoder.vocab_size = c.corpus.vocab_size;
    m.encoder.hidden = c.hidden;
    m.encoder.heads = c.heads;
    m.encoder.blocks = c.blocks;
    m.encoder.ffn = c.ffn;
    m.encoder.out_channels = c.corpus.channels;
    m.encoder.speaker_width = c.speaker_width;
    m.encoder.speaker_block = 2;
    m.speakers = c.corpus.speakers;
    m.speaker_conditioning = c.speaker_conditioning;
    const bool cond = m.multi_speaker() && m.speaker_conditioning;

    m.flow.channels = c.corpus.channels;
    m.flow.hidden = c.flow_hidden;
    m.flow.key_width = c.flow_key_width;
    m.flow.use_transformer = c.transformer_block;
    m.flow.cond_width = cond ? c.hidden : 0;
    m.flow_depth = c.flow_depth;

    m.duration.text_width = c.hidden;
    m.duration.filter_width = c.duration_filter;
    m.duration.noise_width = c.adversarial_duration ? c.duration_noise_width : 0;
    m.duration.cond_width = cond ? c.hidden : 0;
    return m;
}

std::string ModelConfig::to_text() const {
    std::ostringstream os;
    os << "encoder.vocab_size=" << encoder.vocab_size << '\n'
       << "encoder.hidden=" << encoder.hidden << '\n'
       << "encoder.heads=" << encoder.heads << '\n'
       << "encoder.blocks=" << encoder.blocks << '\n'
       << "encoder.ffn=" << encoder.ffn << '\n'
       << "encoder.out_channels=" << encoder.out_channels << '\n'
       << "encoder.speaker_width=" << encoder.speaker_width << '\n'
       << "encoder.speaker_block=" << encoder.speaker_block << '\n'
       << "flow.channels=" << flow.channels << '\n'
       << "flow.hidden=" << flow.hidden << '\n'
       << "flow.kernel=" << flow.kernel << '\n'
       << "flow.key_width=" << flow.key_width << '\n'
       << "flow.cond_width=" << flow.cond_width << '\n'
       << "flow.use_transformer=" << (flow.use_transformer ? 1 : 0) << '\n'
       << "flow.attention_scale=" << fmt_double(flow.attention_scale) << '\n'
       << "flow.log_scale_clamp=" << fmt_double(flow.log_scale_clamp) << '\n'
       << "flow.depth=" << flow_depth << '\n'
       << "duration.text_width=" << duration.text_width << '\n'
       << "duration.noise_width=" << duration.noise_width << '\n'
       << "duration.filter_width=" << duration.filter_width << '\n'
       << "duration.kernel=" << duration.kernel << '\n'
       << "duration.cond_width=" << duration.cond_width << '\n'
       << "speakers=" << speakers << '\n'
       << "speaker_conditioning=" << (speaker_conditioning ? 1 : 0) << '\n';
    return os.str();
}

ModelConfig ModelConfig::from_text(const std::string& text) {
    const auto kv = parse_kv(text);
    auto get = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) {
            throw FormatError("checkpoint: model config lacks '" + key + "'");
        }
        return it->second;
    };
    auto sz = [&](const std::string& key) { return static_cast<std::size_t>(std::stoull(get(key))); };
    auto dbl = [&](const std::string& key) { return std::stod(get(key)); };
    ModelConfig m;
    try {
        m.encoder.vocab_size = sz("encoder.vocab_size");
        m.encoder.hidden = sz("encoder.hidden");
        m.encoder.heads = sz("encoder.heads");
        m.encoder.blocks = sz("encoder.blocks");
        m.encoder.ffn = sz("encoder.ffn");
        m.encoder.out_channels = sz("encoder.out_channels");
        m.encoder.speaker_width = sz("encoder.speaker_width");
        m.encoder.speaker_block = sz("encoder.speaker_block");
        m.flow.channels = sz("flow.channels");
        m.flow.hidden = sz("flow.hidden");
        m.flow.kernel = sz("flow.kernel");
        m.flow.key_width = sz("flow.key_width");
        m.flow.cond_width = sz("flow.cond_width");
        m.flow.use_transformer = sz("flow.use_transformer") != 0;
        m.flow.attention_scale = dbl("flow.attention_scale");
        m.flow.log_scale_clamp = dbl("flow.log_scale_clamp");
        m.flow_depth = sz("flow.depth");
        m.duration.text_width = sz("duration.text_width");
        m.duration.noise_width = sz("duration.noise_width");
        m.duration.filter_width = sz("duration.filter_width");
        m.duration.kernel = sz("duration.kernel");
        m.duration.cond_width = sz("duration.cond_width");
        m.speakers = sz("speakers");
        m.speaker_conditioning = sz("speaker_conditioning") != 0;
    } catch (const std::logic_error& e) {
        throw FormatError(std::string("checkpoint: bad model config value: ") + e.what());
    }
    return m;
}

ToyModel::ToyModel(const ModelConfig& config, Rng& rng)
    : encoder(config.encoder, rng),
      flows(config.flow, config.flow_depth, rng),
      generator(config.duration, rng),
      discriminator(config.duration, rng),
      config_(config) {
    if (config.multi_speaker()) {
        speakers = SpeakerTable(config.speakers, config.encoder.speaker_width, rng);
    }
}

Tensor ToyModel::speaker_vector(std::size_t speaker) const {
    if (!config_.multi_speaker()) {
        if (speaker != 0) {
            throw ContractError("ToyModel: single-speaker model got speaker " + std::to_string(speaker));
        }
        return {};
    }
    return speakers.lookup(speaker);
}

Tensor ToyModel::condition_vector(const Tensor& speaker_vector) const {
    if (!speaker_vector.defined() || !config_.speaker_conditioning) {
        return {};
    }
    return encoder.project_speaker(speaker_vector);
}

std::vector<NamedParam> ToyModel::main_parameters() const {
    std::vector<NamedParam> out;
    for (auto& p : encoder.parameters()) {
        out.push_back({"encoder." + p.name, p.tensor});
    }
    for (auto& p : flows.parameters()) {
        out.push_back({"flow." + p.name, p.tensor});
    }
    if (config_.multi_speaker()) {
        out.push_back({"speakers.table", speakers.table()});
    }
    return out;
}

std::vector<NamedParam> ToyModel::parameters() const {
    std::vector<NamedParam> out = main_parameters();
    for (auto& p : generator.parameters()) {
        out.push_back({"duration_gen." + p.name, p.tensor});
    }
    for (auto& p : discriminator.parameters()) {
        out.push_back({"duration_disc." + p.name, p.tensor});
    }
    return out;
}

std::string checkpoint_bytes(const ToyModel& model) {
    std::string out(kMagic, sizeof kMagic);
    put_u32(out, kVersion);
    const std::string cfg = model.config().to_text();
    put_u32(out, static_cast<std::uint32_t>(cfg.size()));
    out += cfg;
    const auto params = model.parameters();
    put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        put_u32(out, static_cast<std::uint32_t>(p.name.size()));
        out += p.name;
        put_u32(out, static_cast<std::uint32_t>(p.tensor.rank()));
        for (std::size_t d : p.tensor.shape()) {
            put_u64(out, d);
        }
        for (double v : p.tensor.data()) {
            put_u64(out, std::bit_cast<std::uint64_t>(v));
        }
    }
    return out;
}

ToyModel checkpoint_from_bytes(const std::string& bytes) {
    Reader r(bytes);
    if (r.str(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
        throw FormatError("checkpoint: bad magic bytes");
    }
    if (const auto v = r.u32(); v != kVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(v));
    }
    const ModelConfig cfg = ModelConfig::from_text(r.str(r.u32()));
    Rng scratch(0);
    ToyModel model(cfg, scratch);
    std::map<std::string, Tensor> by_name;
    for (auto& p : model.parameters()) {
        by_name.emplace(p.name, p.tensor);
    }
    const std::uint32_t count = r.u32();
    if (count != by_name.size()) {
        throw FormatError("checkpoint: holds " + std::to_string(count) + " tensors, model needs " +
                          std::to_string(by_name.size()));
    }
    for (std::uint32_t k = 0; k < count; ++k) {
        const std::string name = r.str(r.u32());
        const auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw FormatError("checkpoint: unexpected tensor '" + name + "'");
        }
        Shape shape(r.u32());
        for (auto& d : shape) {
            d = r.u64();
        }
        Tensor& dst = it->second;
        if (shape != dst.shape()) {
            throw FormatError("checkpoint: tensor '" + name + "' has shape " + shape_str(shape) +
                              ", model expects " + shape_str(dst.shape()));
        }
        for (double& v : dst.mutable_data()) {
            v = r.f64();
        }
    }
    if (!r.done()) {
        throw FormatError("checkpoint: trailing bytes");
    }
    return model;
}

void save_checkpoint(const ToyModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    const std::string bytes = checkpoint_bytes(model);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ToyModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_bytes(ss.str());
}

}  // namespace toytts
