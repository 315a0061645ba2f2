#include "toytts/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "toytts/gradsuite.hpp"
#include "toytts/ops.hpp"
#include "toytts/trainer.hpp"

namespace toytts {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << text;
}

std::string durations_csv(const std::vector<int>& durations) {
    std::string line;
    for (std::size_t i = 0; i < durations.size(); ++i) {
        line += (i ? "," : "") + std::to_string(durations[i]);
    }
    return line + "\n";
}

// Gray levels scaled linearly from [min, max] to [0, 255], each cell drawn
// as a cell x cell block. A dotted line marks the edge of the band the
// post-net convolutions can see (|query - key| <= radius).
std::string attention_pgm(const Tensor& map, std::size_t radius) {
    constexpr std::size_t cell = 8;
    const std::size_t t = map.dim(0);
    const auto [lo_it, hi_it] = std::minmax_element(map.data().begin(), map.data().end());
    const double lo = *lo_it, span = *hi_it - *lo_it;
    const std::size_t side = t * cell;
    std::vector<unsigned char> px(side * side);
    for (std::size_t q = 0; q < t; ++q) {
        for (std::size_t k = 0; k < t; ++k) {
            const double v = span > 0.0 ? (map.at(q, k) - lo) / span : 0.0;
            const auto g = static_cast<unsigned char>(std::lround(v * 255.0));
            for (std::size_t y = 0; y < cell; ++y) {
                for (std::size_t x = 0; x < cell; ++x) {
                    px[(q * cell + y) * side + k * cell + x] = g;
                }
            }
            const bool right_edge = k == q + radius;
            const bool left_edge = q == k + radius;
            if (right_edge || left_edge) {
                const std::size_t x = right_edge ? k * cell + cell - 1 : k * cell;
                for (std::size_t y = 0; y < cell; ++y) {
                    px[(q * cell + y) * side + x] = y % 2 ? 0 : 255;
                }
            }
        }
    }
    std::string out = "P5\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
    out.append(px.begin(), px.end());
    return out;
}

std::string matrix_csv(const Tensor& m) {
    std::string out;
    for (std::size_t r = 0; r < m.dim(0); ++r) {
        for (std::size_t c = 0; c < m.dim(1); ++c) {
            out += (c ? "," : "") + fmt(m.at(r, c));
        }
        out += "\n";
    }
    return out;
}

bool is_duration_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path);
    }
    try {
        return nlohmann::json::parse(in).value("format", "") == "toytts-duration-corpus";
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

int cmd_mas(const std::string& grid_path, double noise_scale, std::uint64_t seed, const std::string& out_path,
            std::ostream& out) {
    const auto rows = read_csv_matrix(grid_path);
    LogProbGrid grid;
    grid.tokens = grid.valid_tokens = rows.size();
    grid.frames = grid.valid_frames = rows.front().size();
    for (const auto& row : rows) {
        grid.values.insert(grid.values.end(), row.begin(), row.end());
    }
    Rng rng(seed);
    const SearchResult found = mas_search(grid, noise_scale, rng);
    if (!out_path.empty()) {
        write_text(out_path, durations_csv(found.alignment.durations));
    } else {
        out << "durations " << durations_csv(found.alignment.durations);
    }
    out << "best_q " << fmt(found.best_q) << "\n";
    return 0;
}

int cmd_train_duration(long steps, std::uint64_t seed, const std::string& corpus_path,
                       const std::string& out_path, double lr, bool deterministic, std::size_t batch_size,
                       std::ostream& out) {
    const Rng root(seed);
    std::vector<DurationBatch> corpus;
    if (is_duration_corpus(corpus_path)) {
        corpus = load_duration_corpus(corpus_path);
    } else {
        Rng embed_rng = root.fork(2);
        corpus = synthetic_duration_corpus(load_corpus(corpus_path), DurationConfig{}.text_width, batch_size,
                                           embed_rng);
    }
    const DurationBatch& first = corpus.front();
    DurationConfig dc;
    dc.text_width = first.h_text.front().dim(0);
    dc.noise_width = deterministic ? 0 : dc.noise_width;
    dc.cond_width = first.cond.empty() ? 0 : first.cond.front().dim(0);
    Rng init = root.fork(1);
    DurationGenerator gen(dc, init);
    DurationDiscriminator disc(dc, init);
    DurationTrainConfig cfg;
    cfg.generator_opt.lr = lr;
    cfg.discriminator_opt.lr = lr;
    cfg.adversarial = !deterministic;
    cfg.seed = root.fork(3).next_u64();
    const auto rows = train_duration(gen, disc, corpus, steps, cfg);
    write_text(out_path, duration_metrics_csv(rows));
    if (!rows.empty()) {
        out << "steps " << rows.size() << " final_loss_g_mse " << fmt(rows.back().loss_g_mse) << "\n";
    } else {
        out << "steps 0\n";
    }
    return 0;
}

void print_eval(std::ostream& out, const AlignmentEval& ev) {
    out << "exact_match " << fmt(ev.exact_match_rate) << "\nmean_abs_error " << fmt(ev.mean_abs_error)
        << "\ntokens " << ev.tokens << "\n";
}

int cmd_train_toy(const std::string& config_path, const std::string& out_dir, std::uint64_t seed,
                  std::ostream& out) {
    TrainConfig config = load_config(config_path);
    config.seed = seed;
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    const auto [train, heldout] = make_corpora(config);
    const TrainResult result = train_toy(config, train, heldout);
    save_config(config, (dir / "config.txt").string());
    write_text(dir / "main_metrics.csv", main_metrics_csv(result.main));
    write_text(dir / "duration_metrics.csv", duration_metrics_csv(result.duration));
    save_checkpoint(result.model, (dir / "model.ckpt").string());
    save_corpus(train, (dir / "train_corpus.json").string());
    save_corpus(heldout, (dir / "heldout_corpus.json").string());
    save_duration_corpus(build_duration_corpus(result.model, train, config.batch_size),
                         (dir / "duration_corpus.json").string());
    print_eval(out, eval_alignment(result.model, heldout));
    return 0;
}

int cmd_gen_corpus(const std::string& config_path, const std::string& out_dir, std::uint64_t seed,
                   std::ostream& out) {
    TrainConfig config = config_path.empty() ? TrainConfig{} : load_config(config_path);
    config.seed = seed;
    config.validate();
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    const auto [train, heldout] = make_corpora(config);
    save_corpus(train, (dir / "train_corpus.json").string());
    save_corpus(heldout, (dir / "heldout_corpus.json").string());
    out << "train " << train.instances.size() << "\nheldout " << heldout.instances.size() << "\n";
    return 0;
}

int cmd_check_grad(std::uint64_t seed, int count, std::ostream& out) {
    constexpr double tolerance = 1e-4;
    double worst = 0.0;
    for (int n = 0; n < count; ++n) {
        for (const GradCase& c : gradient_suite(seed + static_cast<std::uint64_t>(n))) {
            out << "seed " << seed + static_cast<std::uint64_t>(n) << " " << c.name << " " << fmt(c.error)
                << (c.error <= tolerance ? "" : " FAIL") << "\n";
            worst = std::max(worst, c.error);
        }
    }
    out << "max_error " << fmt(worst) << (worst <= tolerance ? " ok" : " FAIL") << "\n";
    return worst <= tolerance ? 0 : 1;
}

int cmd_dump_attention(const std::string& ckpt, const std::string& input, const std::string& out_dir,
                       std::size_t speaker, std::ostream& out) {
    const ToyModel model = load_checkpoint(ckpt);
    const Tensor x = Tensor::matrix(read_csv_matrix(input));
    if (x.dim(0) != model.config().flow.channels) {
        throw ShapeError("dump-attention: input has " + std::to_string(x.dim(0)) + " rows, the model expects " +
                         std::to_string(model.config().flow.channels) + " channels");
    }
    const Tensor cond = model.condition_vector(model.speaker_vector(speaker));
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    const auto maps = model.flows.attention_maps(x, cond);
    for (std::size_t i = 0; i < maps.size(); ++i) {
        const std::string stem = "layer" + std::to_string(i);
        write_text(dir / (stem + ".csv"), matrix_csv(maps[i]));
        write_text(dir / (stem + ".pgm"), attention_pgm(maps[i], model.flows.layer(i).receptive_radius()));
    }
    out << "layers " << maps.size() << "\nframes " << x.dim(1) << "\n";
    return 0;
}

}  // namespace

std::vector<std::vector<double>> read_csv_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read " + path);
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            std::size_t used = 0;
            try {
                row.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || cell.find_first_not_of(" \t\r", used) != std::string::npos) {
                throw FormatError(path + ": not a number: '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw FormatError(path + ": ragged rows");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty() || rows.front().empty()) {
        throw FormatError(path + ": empty matrix");
    }
    return rows;
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Toy alignment, duration and flow training tools", "toytts"};
    app.require_subcommand(1);

    std::string grid, mas_out;
    double noise_scale = 0.0;
    std::uint64_t mas_seed = 0;
    auto* mas = app.add_subcommand("mas", "Monotonic alignment search over a token x frame CSV grid");
    mas->add_option("--grid", grid, "CSV, row = token, column = frame")->required();
    mas->add_option("--noise-scale", noise_scale, "Noise scale (0 = exact search)")->check(CLI::NonNegativeNumber);
    mas->add_option("--seed", mas_seed, "Seed for the noise draws");
    mas->add_option("--out", mas_out, "Durations CSV (printed when omitted)");

    long dur_steps = 0;
    std::uint64_t dur_seed = 0;
    std::string dur_corpus, dur_out;
    double dur_lr = TrainConfig{}.duration_opt.lr;
    bool deterministic = false;
    std::size_t dur_batch = 8;
    auto* td = app.add_subcommand("train-duration", "Train the duration generator and discriminator");
    td->add_option("--steps", dur_steps)->required()->check(CLI::NonNegativeNumber);
    td->add_option("--seed", dur_seed)->required();
    td->add_option("--corpus", dur_corpus, "Duration corpus or toy corpus JSON")->required();
    td->add_option("--out", dur_out, "Per-step loss CSV")->required();
    td->add_option("--lr", dur_lr)->check(CLI::PositiveNumber);
    td->add_flag("--deterministic", deterministic, "No noise input, MSE loss only");
    td->add_option("--batch-size", dur_batch, "Batch size when building from a toy corpus")
        ->check(CLI::PositiveNumber);

    std::string toy_config, toy_out;
    std::uint64_t toy_seed = 0;
    auto* tt = app.add_subcommand("train-toy", "End-to-end toy run: main phase then duration phase");
    tt->add_option("--config", toy_config)->required()->check(CLI::ExistingFile);
    tt->add_option("--out", toy_out, "Output directory")->required();
    tt->add_option("--seed", toy_seed)->required();

    std::string gc_config, gc_out;
    std::uint64_t gc_seed = 0;
    auto* gc = app.add_subcommand("gen-corpus", "Write training and held-out toy corpora");
    gc->add_option("--config", gc_config)->check(CLI::ExistingFile);
    gc->add_option("--out", gc_out, "Output directory")->required();
    gc->add_option("--seed", gc_seed)->required();

    std::string ev_ckpt, ev_corpus;
    auto* ev = app.add_subcommand("eval-align", "Noise-free alignment accuracy of a checkpoint");
    ev->add_option("--ckpt", ev_ckpt)->required()->check(CLI::ExistingFile);
    ev->add_option("--corpus", ev_corpus)->required()->check(CLI::ExistingFile);

    std::uint64_t cg_seed = 0;
    int cg_count = 1;
    auto* cg = app.add_subcommand("check-grad", "Finite-difference check of every op and module");
    cg->add_option("--seed", cg_seed)->required();
    cg->add_option("--count", cg_count, "Consecutive seeds to check")->check(CLI::PositiveNumber);

    std::string da_ckpt, da_input, da_out;
    std::size_t da_speaker = 0;
    auto* da = app.add_subcommand("dump-attention", "Per-layer flow attention maps as CSV and PGM");
    da->add_option("--ckpt", da_ckpt)->required()->check(CLI::ExistingFile);
    da->add_option("--input", da_input, "CSV, row = channel, column = frame")->required()->check(CLI::ExistingFile);
    da->add_option("--out", da_out, "Output directory")->required();
    da->add_option("--speaker", da_speaker, "Speaker id for multi-speaker checkpoints");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? 0 : 2;
    }

    try {
        if (mas->parsed()) {
            return cmd_mas(grid, noise_scale, mas_seed, mas_out, out);
        }
        if (td->parsed()) {
            return cmd_train_duration(dur_steps, dur_seed, dur_corpus, dur_out, dur_lr, deterministic, dur_batch,
                                      out);
        }
        if (tt->parsed()) {
            return cmd_train_toy(toy_config, toy_out, toy_seed, out);
        }
        if (gc->parsed()) {
            return cmd_gen_corpus(gc_config, gc_out, gc_seed, out);
        }
        if (ev->parsed()) {
            print_eval(out, eval_alignment(load_checkpoint(ev_ckpt), load_corpus(ev_corpus)));
            return 0;
        }
        if (cg->parsed()) {
            return cmd_check_grad(cg_seed, cg_count, out);
        }
        if (da->parsed()) {
            return cmd_dump_attention(da_ckpt, da_input, da_out, da_speaker, out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace toytts
