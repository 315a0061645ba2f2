#include "toytts/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "toytts/ops.hpp"

namespace toytts {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Pads a (R, n) tensor with zero columns up to `width`.
Tensor pad_cols(const Tensor& a, std::size_t width) {
    const std::size_t rows = a.dim(0), n = a.dim(1);
    std::vector<double> data(rows * width, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            data[r * width + c] = a.at(r, c);
        }
    }
    return Tensor::from_data({rows, width}, std::move(data));
}

Tensor mask_row(std::size_t valid, std::size_t width) {
    std::vector<double> data(width, 0.0);
    std::fill(data.begin(), data.begin() + static_cast<long>(valid), 1.0);
    return Tensor::from_data({1, width}, std::move(data));
}

Tensor log_durations_row(const std::vector<int>& durations, std::size_t width) {
    std::vector<double> data(width, 0.0);
    for (std::size_t i = 0; i < durations.size(); ++i) {
        data[i] = std::log(static_cast<double>(durations[i]));
    }
    return Tensor::from_data({1, width}, std::move(data));
}

}  // namespace

LogProbGrid model_grid(const ToyModel& model, const ToyInstance& inst) {
    const Tensor sv = model.speaker_vector(inst.speaker);
    const EncoderOutput enc = model.encoder.encode(inst.tokens, {}, sv);
    const Tensor cond = model.condition_vector(sv);
    const FlowOutput flow = model.flows.forward(inst.frames, cond);
    return log_prob_grid(transpose(flow.y.detach()), transpose(enc.mu.detach()),
                         transpose(enc.sigma.detach()));
}

Tensor instance_nll(const ToyModel& model, const ToyInstance& inst, double noise_scale, Rng& rng,
                    Alignment* chosen) {
    const Tensor sv = model.speaker_vector(inst.speaker);
    const EncoderOutput enc = model.encoder.encode(inst.tokens, {}, sv);
    const Tensor cond = model.condition_vector(sv);
    const FlowOutput flow = model.flows.forward(inst.frames, cond);

    const LogProbGrid grid = log_prob_grid(transpose(flow.y.detach()), transpose(enc.mu.detach()),
                                           transpose(enc.sigma.detach()));
    const SearchResult found = mas_search(grid, noise_scale, rng);
    const auto frame_tokens = found.alignment.frame_to_token();

    const Tensor mu_f = gather_cols(enc.mu, frame_tokens);
    const Tensor log_sigma_f = gather_cols(enc.log_sigma, frame_tokens);
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    const Tensor quad = scale(mul(square(sub(flow.y, mu_f)), exp(scale(log_sigma_f, -2.0))), 0.5);
    const Tensor nll = sum(add_scalar(add(log_sigma_f, quad), half_log_2pi));
    if (chosen) {
        *chosen = found.alignment;
    }
    return sub(nll, flow.logdet);
}

AlignmentEval eval_alignment(const PriorGrid& prior, const ToyCorpus& corpus) {
    AlignmentEval ev;
    std::size_t exact = 0;
    double abs_err = 0.0;
    Rng unused(0);
    for (const auto& inst : corpus.instances) {
        const SearchResult found = mas_search(prior(inst), 0.0, unused);
        for (std::size_t i = 0; i < inst.durations.size(); ++i) {
            const int diff = found.alignment.durations[i] - inst.durations[i];
            exact += diff == 0 ? 1 : 0;
            abs_err += std::abs(diff);
            ++ev.tokens;
        }
    }
    if (ev.tokens > 0) {
        ev.exact_match_rate = static_cast<double>(exact) / static_cast<double>(ev.tokens);
        ev.mean_abs_error = abs_err / static_cast<double>(ev.tokens);
    }
    return ev;
}

AlignmentEval eval_alignment(const ToyModel& model, const ToyCorpus& corpus) {
    if (corpus.channels != model.config().flow.channels ||
        corpus.vocab_size > model.config().encoder.vocab_size) {
        throw ContractError("eval_alignment: corpus dimensions do not match the checkpoint");
    }
    return eval_alignment([&](const ToyInstance& inst) { return model_grid(model, inst); }, corpus);
}

std::vector<DurationBatch> build_duration_corpus(const ToyModel& model, const ToyCorpus& corpus,
                                                 std::size_t batch_size) {
    std::vector<DurationBatch> out;
    Rng unused(0);
    for (std::size_t start = 0; start < corpus.instances.size(); start += batch_size) {
        const std::size_t end = std::min(start + batch_size, corpus.instances.size());
        std::size_t width = 0;
        for (std::size_t n = start; n < end; ++n) {
            width = std::max(width, corpus.instances[n].tokens.size());
        }
        DurationBatch batch;
        for (std::size_t n = start; n < end; ++n) {
            const ToyInstance& inst = corpus.instances[n];
            const Tensor sv = model.speaker_vector(inst.speaker);
            const EncoderOutput enc = model.encoder.encode(inst.tokens, {}, sv);
            const SearchResult found = mas_search(model_grid(model, inst), 0.0, unused);
            batch.h_text.push_back(pad_cols(enc.h_text.detach(), width));
            batch.log_durations.push_back(log_durations_row(found.alignment.durations, width));
            batch.mask.push_back(mask_row(inst.tokens.size(), width));
            const Tensor cond = model.condition_vector(sv);
            if (cond.defined() && model.config().duration.cond_width > 0) {
                batch.cond.push_back(cond.detach());
            }
        }
        out.push_back(std::move(batch));
    }
    return out;
}

std::pair<ToyCorpus, ToyCorpus> make_corpora(const TrainConfig& config) {
    CorpusSpec spec = config.corpus;
    spec.instances = config.corpus.instances + config.heldout_instances;
    Rng rng = Rng(config.seed).fork(0);
    return generate_corpus(spec, rng).split_tail(config.heldout_instances);
}

TrainResult train_toy(const TrainConfig& config, const ToyCorpus& train, const ToyCorpus& heldout) {
    config.validate();
    const Rng root(config.seed);
    Rng init_rng = root.fork(1);
    Rng order_rng = root.fork(2);
    Rng mas_rng = root.fork(3);
    TrainResult result{ToyModel(ModelConfig::from_train_config(config), init_rng), {}, {}};
    ToyModel& model = result.model;

    if (config.steps_main > 0) {
        if (train.instances.empty()) {
            throw ContractError("train_toy: empty training corpus");
        }
        AdamW opt(tensors_of(model.main_parameters()), config.main_opt);
        const std::size_t n = train.instances.size();
        const long per_epoch = static_cast<long>((n + config.batch_size - 1) / config.batch_size);
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) {
            order[i] = i;
        }
        for (long step = 0; step < config.steps_main; ++step) {
            const long epoch = step / per_epoch;
            const long slot = step % per_epoch;
            if (slot == 0) {
                for (std::size_t i = n - 1; i > 0; --i) {
                    const auto j = static_cast<std::size_t>(order_rng.uniform_int(0, static_cast<std::int64_t>(i)));
                    std::swap(order[i], order[j]);
                }
            }
            opt.set_epoch(epoch);
            MainMetricsRow row;
            row.step = step;
            row.epoch = epoch;
            row.lr = opt.lr();
            row.noise_scale = config.noise_schedule ? noise_scale_at(step) : 0.0;

            const std::size_t begin = static_cast<std::size_t>(slot) * config.batch_size;
            const std::size_t end = std::min(begin + config.batch_size, n);
            try {
                Tensor total;
                double denom = 0.0;
                for (std::size_t k = begin; k < end; ++k) {
                    const ToyInstance& inst = train.instances[order[k]];
                    const Tensor nll = instance_nll(model, inst, row.noise_scale, mas_rng);
                    total = total.defined() ? add(total, nll) : nll;
                    denom += static_cast<double>(inst.frames.numel());
                }
                const Tensor loss = scale(total, 1.0 / denom);
                row.loss = loss.item();
                opt.zero_grad();
                backward(loss);
                opt.step();
            } catch (const NumericError& e) {
                throw TrainingDivergence(step, std::string(e.what()) + " (main phase, noise_scale " +
                                                   fmt_double(row.noise_scale) + ", last loss " +
                                                   (result.main.empty() ? std::string("n/a")
                                                                        : fmt_double(result.main.back().loss)) +
                                                   ")");
            }
            if (!std::isfinite(row.loss)) {
                throw TrainingDivergence(step, "non-finite main loss");
            }
            if ((step + 1) % config.eval_every == 0 || step + 1 == config.steps_main) {
                if (!heldout.instances.empty()) {
                    row.evaluated = true;
                    row.eval = eval_alignment(model, heldout);
                }
            }
            result.main.push_back(row);
        }
    }

    if (config.steps_duration > 0) {
        const auto dcorpus = build_duration_corpus(model, train, config.batch_size);
        DurationTrainConfig dcfg;
        dcfg.generator_opt = config.duration_opt;
        dcfg.discriminator_opt = config.duration_opt;
        dcfg.adversarial = config.adversarial_duration;
        dcfg.seed = root.fork(4).next_u64();
        result.duration = train_duration(model.generator, model.discriminator, dcorpus,
                                         config.steps_duration, dcfg);
    }
    return result;
}

std::string main_metrics_csv(const std::vector<MainMetricsRow>& rows) {
    std::ostringstream os;
    os << "step,epoch,lr,noise_scale,loss,exact_match,mean_abs_error\n";
    for (const auto& r : rows) {
        os << r.step << ',' << r.epoch << ',' << fmt_double(r.lr) << ',' << fmt_double(r.noise_scale)
           << ',' << fmt_double(r.loss) << ',';
        if (r.evaluated) {
            os << fmt_double(r.eval.exact_match_rate) << ',' << fmt_double(r.eval.mean_abs_error);
        } else {
            os << ',';
        }
        os << '\n';
    }
    return os.str();
}

std::string duration_metrics_csv(const std::vector<DurationLossRow>& rows) {
    std::ostringstream os;
    os << "step,loss_d,loss_g_adv,loss_g_mse\n";
    for (const auto& r : rows) {
        os << r.step << ',' << fmt_double(r.loss_d) << ',' << fmt_double(r.loss_g_adv) << ','
           << fmt_double(r.loss_g_mse) << '\n';
    }
    return os.str();
}

namespace {

using nlohmann::json;

json tensor_rows(const Tensor& t) {
    json rows = json::array();
    for (std::size_t r = 0; r < t.dim(0); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < t.dim(1); ++c) {
            row.push_back(t.at(r, c));
        }
        rows.push_back(row);
    }
    return rows;
}

Tensor rows_tensor(const json& j) {
    return Tensor::matrix(j.get<std::vector<std::vector<double>>>());
}

}  // namespace

void save_duration_corpus(const std::vector<DurationBatch>& corpus, const std::string& path) {
    json j;
    j["format"] = "toytts-duration-corpus";
    j["version"] = 1;
    json batches = json::array();
    for (const auto& b : corpus) {
        json items = json::array();
        for (std::size_t k = 0; k < b.size(); ++k) {
            json item{{"h_text", tensor_rows(b.h_text[k])},
                      {"log_durations", tensor_rows(b.log_durations[k])},
                      {"mask", tensor_rows(b.mask[k])}};
            if (!b.cond.empty()) {
                item["cond"] = tensor_rows(b.cond[k]);
            }
            items.push_back(item);
        }
        batches.push_back({{"items", items}});
    }
    j["batches"] = batches;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    out << j.dump() << '\n';
}

std::vector<DurationBatch> load_duration_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path);
    }
    std::vector<DurationBatch> out;
    try {
        const json j = json::parse(in);
        if (j.at("format") != "toytts-duration-corpus" || j.at("version") != 1) {
            throw FormatError("duration corpus: unsupported format or version");
        }
        for (const auto& jb : j.at("batches")) {
            DurationBatch b;
            for (const auto& item : jb.at("items")) {
                b.h_text.push_back(rows_tensor(item.at("h_text")));
                b.log_durations.push_back(rows_tensor(item.at("log_durations")));
                b.mask.push_back(rows_tensor(item.at("mask")));
                if (item.contains("cond")) {
                    b.cond.push_back(rows_tensor(item.at("cond")));
                }
            }
            b.validate();
            out.push_back(std::move(b));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("duration corpus: ") + e.what());
    }
    if (out.empty()) {
        throw FormatError("duration corpus: no batches");
    }
    return out;
}

std::vector<DurationBatch> synthetic_duration_corpus(const ToyCorpus& corpus, std::size_t text_width,
                                                     std::size_t batch_size, Rng& rng) {
    std::vector<double> table(text_width * corpus.vocab_size);
    for (double& v : table) {
        v = rng.normal();
    }
    const Tensor embed = Tensor::from_data({text_width, corpus.vocab_size}, std::move(table));
    std::vector<DurationBatch> out;
    for (std::size_t start = 0; start < corpus.instances.size(); start += batch_size) {
        const std::size_t end = std::min(start + batch_size, corpus.instances.size());
        std::size_t width = 0;
        for (std::size_t n = start; n < end; ++n) {
            width = std::max(width, corpus.instances[n].tokens.size());
        }
        DurationBatch batch;
        for (std::size_t n = start; n < end; ++n) {
            const ToyInstance& inst = corpus.instances[n];
            std::vector<std::size_t> ids(inst.tokens.begin(), inst.tokens.end());
            batch.h_text.push_back(pad_cols(gather_cols(embed, ids), width));
            batch.log_durations.push_back(log_durations_row(inst.durations, width));
            batch.mask.push_back(mask_row(inst.tokens.size(), width));
        }
        out.push_back(std::move(batch));
    }
    return out;
}

}  // namespace toytts
