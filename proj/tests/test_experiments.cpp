#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "schro4/experiments.hpp"

using namespace schro4;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("schro4_test_" + name);
    fs::remove_all(d);
    return d;
}

int cli(const std::string& args) {
    const std::string cmd = std::string(SCHRO4_CLI) + " " + args + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

int config_error_line(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.line();
    }
    return -1;
}

const char* kSmallSweep = R"({
  "mode": "carleman-sweep",
  "grid": {"n_x": 16, "n_t": 24, "T": 1.0},
  "carleman": {"lambda_list": [1e-6, 2e-6], "mu_list": [1]}
})";

}  // namespace

TEST_CASE("modes") {
    for (Mode m : {Mode::Solve, Mode::VerifyIdentity, Mode::CarlemanSweep, Mode::Stability, Mode::Reconstruct})
        CHECK(parse_mode(mode_name(m)) == m);
    CHECK_THROWS_AS(parse_mode("sweep"), ConfigError);
}

TEST_CASE("config parsing") {
    SUBCASE("empty object gives the defaults") {
        const ExperimentConfig c = parse_config("{}");
        CHECK_FALSE(c.mode_declared);
        CHECK(c.grid.n_x == 64);
        CHECK(c.carleman.C0 == 0.0);
        CHECK(c.inverse.epsilon_ladder.size() == 5);
    }
    SUBCASE("values are read") {
        const ExperimentConfig c = parse_config(kSmallSweep);
        CHECK(c.mode == Mode::CarlemanSweep);
        CHECK(c.mode_declared);
        CHECK(c.grid.n_t == 24);
        CHECK(c.carleman.lambda_list == std::vector<double>{1e-6, 2e-6});
    }
    SUBCASE("errors carry the line of the offending key") {
        CHECK(config_error_line("{\n  \"grid\": {\n    \"n_x\": 4\n  }\n}") == 3);
        CHECK(config_error_line("{\n  \"mode\": \"solve\",\n  \"colour\": 1\n}") == 3);
        CHECK(config_error_line("{\n  \"mode\": \"bogus\"\n}") == 2);
        CHECK(config_error_line("{\n  \"inverse\": {\n    \"m\": 1,\n    \"reg\": \"small\"\n  }\n}") == 4);
        CHECK(config_error_line("{\n  \"carleman\": {\"x0\": 0.5}\n}") == 2);
        CHECK(config_error_line("{\n  \"grid\": {\n    \"n_x\": 16,\n    \"n_t\": 1.5\n  }\n}") == 4);
    }
    SUBCASE("malformed JSON reports a line") {
        CHECK(config_error_line("{\n  \"grid\": {\n    \"n_x\": 16,,\n  }\n}") == 3);
    }
    SUBCASE("message names the key") {
        try {
            parse_config("{\"solve\": {\"source\": \"laser\"}}");
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("solve.source") != std::string::npos);
        }
    }
}

TEST_CASE("config hash") {
    const ExperimentConfig a = parse_config(kSmallSweep);
    const ExperimentConfig b = parse_config(a.canonical_json());
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    ExperimentConfig c = a;
    c.seed = 2;
    CHECK(c.hash() != a.hash());
    // formatting of the input does not matter
    CHECK(parse_config("{\"mode\":\"solve\"}").hash() == parse_config("{\n \"mode\" : \"solve\"\n}").hash());
}

TEST_CASE("solve with zero data writes zeros") {
    ExperimentConfig c = parse_config(R"({"grid": {"n_x": 12, "n_t": 10, "T": 0.1}, "solve": {"u0": "zero"}})");
    const fs::path dir = scratch("zero");
    const RunResult r = run_experiment(c, dir.string());
    CHECK(r.exit_code == kOk);
    std::ifstream in(dir / "field.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("# schro4 ", 0) == 0);
    CHECK(line.find("config_hash=" + c.hash()) != std::string::npos);
    std::getline(in, line);
    CHECK(line == "t,x,re,im");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        const auto re = line.find(',', line.find(',') + 1);
        double vr = 0, vi = 0;
        CHECK(std::sscanf(line.c_str() + re + 1, "%lf,%lf", &vr, &vi) == 2);
        CHECK(vr == 0.0);
        CHECK(vi == 0.0);
    }
    CHECK(rows == 11 * 14);
}

TEST_CASE("every output file declares the config hash") {
    const ExperimentConfig c = parse_config(kSmallSweep);
    const fs::path dir = scratch("headers");
    const RunResult r = run_experiment(c, dir.string());
    CHECK(r.exit_code == kOk);
    int csvs = 0;
    for (const auto& f : r.files) {
        if (fs::path(f).extension() != ".csv") continue;
        ++csvs;
        CHECK(slurp(dir / f).rfind("# schro4 " + std::string(kVersion) + " config_hash=" + c.hash(), 0) == 0);
    }
    CHECK(csvs == 2);
    CHECK(slurp(dir / "summary.txt").find(c.hash()) != std::string::npos);
}

TEST_CASE("sweep table has one row per member and pair") {
    const ExperimentConfig c = parse_config(kSmallSweep);
    const fs::path dir = scratch("rows");
    run_experiment(c, dir.string());
    std::ifstream in(dir / "sweep_summary.csv");
    std::string line;
    int n = -2;
    while (std::getline(in, line)) ++n;
    CHECK(n == 2);
    std::ifstream in2(dir / "sweep.csv");
    n = -2;
    while (std::getline(in2, line)) ++n;
    CHECK(n == 2 * 20);
}

TEST_CASE("reruns are byte identical") {
    const ExperimentConfig c = parse_config(kSmallSweep);
    const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
    const RunResult ra = run_experiment(c, a.string());
    const RunResult rb = run_experiment(c, b.string());
    REQUIRE(ra.files == rb.files);
    for (const auto& f : ra.files) CHECK(slurp(a / f) == slurp(b / f));
}

TEST_CASE("numerical failures are reported with exit code 3") {
    // no C0 in an empty-looking range meets a spread of exactly 1 on a nontrivial sweep
    ExperimentConfig c = parse_config(R"({
      "mode": "carleman-sweep",
      "grid": {"n_x": 16, "n_t": 24, "T": 1.0},
      "carleman": {"mu_list": [1, 2], "calibrate_k_min": -40, "calibrate_k_max": -39, "max_spread": 1}
    })");
    const RunResult r = run_experiment(c, scratch("numfail").string());
    CHECK(r.exit_code == kNumericalFailure);
    CHECK(r.summary.find("numerical failure in carleman-sweep") != std::string::npos);
}

TEST_CASE("command-line exit codes") {
    const fs::path dir = scratch("cli");
    fs::create_directories(dir);
    const std::string good = (dir / "good.json").string();
    std::ofstream(good) << R"({"grid": {"n_x": 12, "n_t": 10, "T": 0.1}, "solve": {"u0": "zero"}})";
    const std::string bad = (dir / "bad.json").string();
    std::ofstream(bad) << "{\n  \"grid\": {\"n_x\": -3}\n}";
    const std::string tight = (dir / "tight.json").string();
    std::ofstream(tight) << R"({"grid": {"n_x": 12, "n_t": 10, "T": 0.1}, "solve": {"mass_tolerance": 1e-300}})";

    const std::string out = " --out " + (dir / "out").string();
    CHECK(cli("solve --config " + good + out) == kOk);
    CHECK(cli("solve --config " + good + out + " --seed 5") == kOk);
    CHECK(slurp(dir / "out" / "config.json").find("\"seed\": 5") != std::string::npos);
    CHECK(cli("solve --config " + bad + out) == kConfigError);
    CHECK(cli("nonsense --config " + good + out) == kConfigError);
    CHECK(cli("solve --config " + (dir / "missing.json").string() + out) == kConfigError);
    CHECK(cli("solve" + out) == kConfigError);
    CHECK(cli("solve --config " + tight + out) == kAcceptanceFailure);
    CHECK(cli("carleman-sweep --config " + std::string(SCHRO4_CONFIGS) + "/solve.json" + out) == kConfigError);
}

TEST_CASE("shipped configs parse") {
    for (const auto& e : fs::directory_iterator(SCHRO4_CONFIGS)) {
        CAPTURE(e.path().string());
        const ExperimentConfig c = load_config(e.path().string());
        CHECK(c.mode_declared);
    }
}
