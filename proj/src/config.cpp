#include "toytts/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace toytts {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) {
        throw FormatError("config: key '" + key + "' expects a number, got '" + s + "'");
    }
    return v;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& s) {
    Int v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw FormatError("config: key '" + key + "' expects an integer, got '" + s + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true") {
        return true;
    }
    if (s == "false") {
        return false;
    }
    throw FormatError("config: key '" + key + "' expects true or false, got '" + s + "'");
}

struct Key {
    const char* name;
    std::function<std::string(const TrainConfig&)> get;
    std::function<void(TrainConfig&, const std::string&)> set;
};

template <class Member>
Key opt_dbl(const char* name, AdamWConfig TrainConfig::*opt, Member member) {
    return {name, [opt, member](const TrainConfig& c) { return fmt_double((c.*opt).*member); },
            [opt, member, name](TrainConfig& c, const std::string& v) {
                (c.*opt).*member = parse_double(name, v);
            }};
}

template <class T>
Key integer(const char* name, T TrainConfig::*field) {
    return {name, [field](const TrainConfig& c) { return std::to_string(c.*field); },
            [field, name](TrainConfig& c, const std::string& v) { c.*field = parse_int<T>(name, v); }};
}

template <class T>
Key corpus_int(const char* name, T CorpusSpec::*field) {
    return {name, [field](const TrainConfig& c) { return std::to_string(c.corpus.*field); },
            [field, name](TrainConfig& c, const std::string& v) {
                c.corpus.*field = parse_int<T>(name, v);
            }};
}

Key corpus_dbl(const char* name, double CorpusSpec::*field) {
    return {name, [field](const TrainConfig& c) { return fmt_double(c.corpus.*field); },
            [field, name](TrainConfig& c, const std::string& v) {
                c.corpus.*field = parse_double(name, v);
            }};
}

Key boolean(const char* name, bool TrainConfig::*field) {
    return {name, [field](const TrainConfig& c) { return std::string(c.*field ? "true" : "false"); },
            [field, name](TrainConfig& c, const std::string& v) { c.*field = parse_bool(name, v); }};
}

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        integer("seed", &TrainConfig::seed),
        integer("steps_main", &TrainConfig::steps_main),
        integer("steps_duration", &TrainConfig::steps_duration),
        integer("batch_size", &TrainConfig::batch_size),
        integer("eval_every", &TrainConfig::eval_every),
        opt_dbl("lr_main", &TrainConfig::main_opt, &AdamWConfig::lr),
        opt_dbl("lr_duration", &TrainConfig::duration_opt, &AdamWConfig::lr),
        opt_dbl("beta1", &TrainConfig::main_opt, &AdamWConfig::beta1),
        opt_dbl("beta2", &TrainConfig::main_opt, &AdamWConfig::beta2),
        opt_dbl("weight_decay", &TrainConfig::main_opt, &AdamWConfig::weight_decay),
        opt_dbl("adam_eps", &TrainConfig::main_opt, &AdamWConfig::eps),
        opt_dbl("epoch_decay", &TrainConfig::main_opt, &AdamWConfig::epoch_decay),
        boolean("noise_schedule", &TrainConfig::noise_schedule),
        boolean("transformer_block", &TrainConfig::transformer_block),
        boolean("adversarial_duration", &TrainConfig::adversarial_duration),
        boolean("speaker_conditioning", &TrainConfig::speaker_conditioning),
        integer("hidden", &TrainConfig::hidden),
        integer("heads", &TrainConfig::heads),
        integer("blocks", &TrainConfig::blocks),
        integer("ffn", &TrainConfig::ffn),
        integer("speaker_width", &TrainConfig::speaker_width),
        integer("flow_depth", &TrainConfig::flow_depth),
        integer("flow_hidden", &TrainConfig::flow_hidden),
        integer("flow_key_width", &TrainConfig::flow_key_width),
        integer("duration_filter", &TrainConfig::duration_filter),
        integer("duration_noise_width", &TrainConfig::duration_noise_width),
        corpus_int("vocab_size", &CorpusSpec::vocab_size),
        corpus_int("channels", &CorpusSpec::channels),
        corpus_int("train_instances", &CorpusSpec::instances),
        integer("heldout_instances", &TrainConfig::heldout_instances),
        corpus_int("min_tokens", &CorpusSpec::min_tokens),
        corpus_int("max_tokens", &CorpusSpec::max_tokens),
        corpus_int("min_duration", &CorpusSpec::min_duration),
        corpus_int("max_duration", &CorpusSpec::max_duration),
        corpus_dbl("prototype_scale", &CorpusSpec::prototype_scale),
        corpus_dbl("min_separation", &CorpusSpec::min_separation),
        corpus_dbl("observation_noise", &CorpusSpec::observation_noise),
        corpus_int("speakers", &CorpusSpec::speakers),
    };
    return table;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

void TrainConfig::validate() const {
    if (steps_main < 0 || steps_duration < 0) {
        throw ContractError("TrainConfig: step counts must be non-negative");
    }
    if (batch_size == 0 || eval_every <= 0) {
        throw ContractError("TrainConfig: batch_size and eval_every must be positive");
    }
    if (hidden == 0 || heads == 0 || hidden % heads != 0) {
        throw ContractError("TrainConfig: hidden must be a positive multiple of heads");
    }
    if (blocks < 3) {
        throw ContractError("TrainConfig: the text encoder needs at least 3 blocks");
    }
    if (flow_depth < 2) {
        throw ContractError("TrainConfig: flow_depth must be at least 2");
    }
    if (corpus.channels % 2 != 0) {
        throw ContractError("TrainConfig: channels must be even for coupling layers");
    }
    corpus.validate();
}

std::string format_config(const TrainConfig& config) {
    std::ostringstream os;
    for (const Key& k : keys()) {
        os << k.name << " = " << k.get(config) << '\n';
    }
    return os.str();
}

TrainConfig parse_config(const std::string& text) {
    TrainConfig config;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const Key* match = nullptr;
        for (const Key& k : keys()) {
            if (key == k.name) {
                match = &k;
            }
        }
        if (!match) {
            throw FormatError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
        if (!seen.insert(key).second) {
            throw FormatError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
        match->set(config, value);
    }
    // The duration optimizer shares every setting but the learning rate.
    const double lr_duration = config.duration_opt.lr;
    config.duration_opt = config.main_opt;
    config.duration_opt.lr = lr_duration;
    if (config.steps_main <= 0 || config.steps_duration <= 0) {
        throw FormatError("config: steps_main and steps_duration must be positive");
    }
    config.validate();
    return config;
}

TrainConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void save_config(const TrainConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    out << format_config(config);
}

}  // namespace toytts
