#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "toytts/cli.hpp"

using namespace toytts;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_command(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("toytts_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

const char* kSmallConfig =
    "steps_main = 8\nsteps_duration = 4\nbatch_size = 4\neval_every = 4\nhidden = 8\nffn = 8\n"
    "blocks = 3\nflow_depth = 2\nflow_hidden = 4\nflow_key_width = 4\nduration_filter = 4\n"
    "train_instances = 8\nheldout_instances = 4\nmax_tokens = 5\n";

}  // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(run({}).code == 2);
    CHECK(run({"nonsense"}).code == 2);
    CHECK(run({"mas"}).code == 2);
    CHECK(run({"check-grad", "--seed", "1", "--bogus"}).code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("mas prints durations and the best score") {
    const auto dir = fresh_dir("mas");
    write(dir / "grid.csv", "-1,-2,-9\n-9,-4,-1\n");
    const Run r = run({"mas", "--grid", (dir / "grid.csv").string()});
    CHECK(r.code == 0);
    CHECK(r.out == "durations 2,1\nbest_q -4\n");
    const Run w = run({"mas", "--grid", (dir / "grid.csv").string(), "--out", (dir / "d.csv").string()});
    CHECK(w.out == "best_q -4\n");
    CHECK(slurp(dir / "d.csv") == "2,1\n");
    write(dir / "wide.csv", "-1\n-2\n");
    const Run bad = run({"mas", "--grid", (dir / "wide.csv").string()});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("error:") == 0);
    write(dir / "ragged.csv", "-1,-2\n-3\n");
    CHECK(run({"mas", "--grid", (dir / "ragged.csv").string()}).code == 1);
    fs::remove_all(dir);
}

TEST_CASE("training commands require a seed") {
    const auto dir = fresh_dir("seed");
    write(dir / "cfg.txt", kSmallConfig);
    CHECK(run({"train-toy", "--config", (dir / "cfg.txt").string(), "--out", (dir / "o").string()}).code == 2);
    CHECK(run({"train-duration", "--steps", "3", "--corpus", "x", "--out", "y"}).code == 2);
    fs::remove_all(dir);
}

TEST_CASE("train-toy output is bit identical across repeats") {
    const auto dir = fresh_dir("toy");
    write(dir / "cfg.txt", kSmallConfig);
    const auto go = [&](const std::string& sub) {
        return run({"train-toy", "--config", (dir / "cfg.txt").string(), "--out", (dir / sub).string(), "--seed",
                    "5"});
    };
    const Run a = go("a"), b = go("b");
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(a.out == b.out);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
        ++files;
        CHECK(slurp(entry.path()) == slurp(dir / "b" / entry.path().filename()));
    }
    CHECK(files == 7);
    CHECK(slurp(dir / "a" / "config.txt").find("seed = 5\n") != std::string::npos);

    const Run ev = run({"eval-align", "--ckpt", (dir / "a" / "model.ckpt").string(), "--corpus",
                        (dir / "a" / "heldout_corpus.json").string()});
    CHECK(ev.code == 0);
    CHECK(ev.out == a.out);

    write(dir / "x.csv", "0,1,2,3,4\n1,1,1,1,1\n0,0,1,1,1\n-1,0,1,0,-1\n");
    const auto dump = [&](const std::string& sub, const std::string& input = "x.csv") {
        return run({"dump-attention", "--ckpt", (dir / "a" / "model.ckpt").string(), "--input",
                    (dir / input).string(), "--out", (dir / sub).string()});
    };
    REQUIRE(dump("att1").code == 0);
    REQUIRE(dump("att2").code == 0);
    for (int layer = 0; layer < 2; ++layer) {
        const std::string stem = "layer" + std::to_string(layer);
        CHECK(slurp(dir / "att1" / (stem + ".csv")) == slurp(dir / "att2" / (stem + ".csv")));
        const std::string pgm = slurp(dir / "att1" / (stem + ".pgm"));
        CHECK(pgm == slurp(dir / "att2" / (stem + ".pgm")));
        CHECK(pgm.rfind("P5\n40 40\n255\n", 0) == 0);
        CHECK(pgm.size() == std::string("P5\n40 40\n255\n").size() + 40 * 40);
        const auto rows = read_csv_matrix((dir / "att1" / (stem + ".csv")).string());
        REQUIRE(rows.size() == 5);
        for (const auto& row : rows) {
            double total = 0.0;
            for (double v : row) {
                total += v;
            }
            CHECK(std::abs(total - 1.0) <= 1e-10);
        }
    }
    write(dir / "bad.csv", "1,2\n3,4\n");
    CHECK(dump("att3", "bad.csv").code == 1);

    const auto td = [&](const std::string& out) {
        return run({"train-duration", "--steps", "5", "--seed", "3", "--corpus",
                    (dir / "a" / "duration_corpus.json").string(), "--out", (dir / out).string()});
    };
    REQUIRE(td("d1.csv").code == 0);
    REQUIRE(td("d2.csv").code == 0);
    CHECK(slurp(dir / "d1.csv") == slurp(dir / "d2.csv"));
    fs::remove_all(dir);
}

TEST_CASE("gen-corpus and train-duration from a toy corpus are deterministic") {
    const auto dir = fresh_dir("gen");
    REQUIRE(run({"gen-corpus", "--seed", "4", "--out", (dir / "a").string()}).code == 0);
    REQUIRE(run({"gen-corpus", "--seed", "4", "--out", (dir / "b").string()}).code == 0);
    CHECK(slurp(dir / "a" / "train_corpus.json") == slurp(dir / "b" / "train_corpus.json"));
    CHECK(slurp(dir / "a" / "heldout_corpus.json") == slurp(dir / "b" / "heldout_corpus.json"));
    const auto go = [&](const std::string& out, const std::string& seed) {
        return run({"train-duration", "--steps", "20", "--seed", seed, "--corpus",
                    (dir / "a" / "train_corpus.json").string(), "--out", (dir / out).string()});
    };
    REQUIRE(go("x.csv", "1").code == 0);
    REQUIRE(go("y.csv", "1").code == 0);
    REQUIRE(go("z.csv", "2").code == 0);
    const std::string x = slurp(dir / "x.csv");
    CHECK(x == slurp(dir / "y.csv"));
    CHECK(x != slurp(dir / "z.csv"));
    CHECK(x.rfind("step,loss_d,loss_g_adv,loss_g_mse\n", 0) == 0);
    REQUIRE(run({"train-duration", "--steps", "0", "--seed", "1", "--corpus",
                 (dir / "a" / "train_corpus.json").string(), "--out", (dir / "e.csv").string()})
                .code == 0);
    CHECK(slurp(dir / "e.csv") == "step,loss_d,loss_g_adv,loss_g_mse\n");
    const Run det = run({"train-duration", "--steps", "5", "--seed", "1", "--deterministic", "--corpus",
                         (dir / "a" / "train_corpus.json").string(), "--out", (dir / "m.csv").string()});
    REQUIRE(det.code == 0);
    CHECK(slurp(dir / "m.csv").find("\n4,0,0,") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("check-grad passes and repeats exactly") {
    const Run a = run({"check-grad", "--seed", "3"});
    const Run b = run({"check-grad", "--seed", "3"});
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.find(" ok\n") != std::string::npos);
    CHECK(a.out.find("FAIL") == std::string::npos);
}
