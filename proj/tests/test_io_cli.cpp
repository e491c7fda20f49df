#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fractal/build.hpp"
#include "fractal/config.hpp"
#include "fractal/train.hpp"

using namespace fractal;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FRACTALNET_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path);
    os << content;
}

} // namespace

TEST_CASE("net serialization round trip is bit exact") {
    auto ifs = builtin_ifs("cantor2d");
    LayeredNet net = build_exact_classifier(ifs, 2, 0.01);
    std::stringstream ss;
    write_net(ss, net);
    LayeredNet back = read_net(ss);
    REQUIRE(back.depth() == net.depth());
    for (int l = 0; l < net.depth(); ++l) {
        CHECK(back.layers[std::size_t(l)].w == net.layers[std::size_t(l)].w);
        CHECK(back.layers[std::size_t(l)].b == net.layers[std::size_t(l)].b);
    }
    std::stringstream bad("layers 1\n2 2\n1 2 3");
    CHECK_THROWS_AS(read_net(bad), ParseError);
}

TEST_CASE("config parsing with grids, comments and errors") {
    std::istringstream src("# comment\n"
                           "fractal = cantor1d\n"
                           "n = 4\n"
                           "depth = 1\n"
                           "depth = 3 # inline comment\n"
                           "width = 32\n"
                           "lr = 0.01\n"
                           "seeds = 2\n");
    KeyValueFile kv = KeyValueFile::parse(src, "<test>");
    ExperimentConfig cfg = resolve_config(kv, false);
    CHECK(cfg.fractal == "cantor1d");
    CHECK(cfg.n == 4);
    CHECK(cfg.depths == std::vector<int>{1, 3});
    CHECK(cfg.widths == std::vector<int>{32});
    CHECK(cfg.seeds == 2);
    CHECK(cfg.gap_style == GapStyle::FullComplement); // non-cantor2d default
    CHECK(cfg.curve_spec == "uniform");               // n != 5 fallback

    std::istringstream bad("depth 3\n");
    CHECK_THROWS_AS(KeyValueFile::parse(bad, "<test>"), ConfigError);

    std::istringstream preset("fractal = cantor2d\nn = 4\ncurve = preset:1\n");
    CHECK_THROWS_AS(resolve_config(KeyValueFile::parse(preset, "<t>"), false).make_curve(),
                    ConfigError);
}

TEST_CASE("long-run defaults differ from desk defaults") {
    std::istringstream empty1(""), empty2("");
    ExperimentConfig desk = resolve_config(KeyValueFile::parse(empty1, "<t>"), false);
    ExperimentConfig paper = resolve_config(KeyValueFile::parse(empty2, "<t>"), true);
    CHECK(desk.n == 3);
    CHECK(desk.steps == 10000);
    CHECK(paper.n == 5);
    CHECK(paper.steps == 1000000);
    CHECK(paper.widths.size() == 6);
}

TEST_CASE("cli gen writes exact row counts and is deterministic") {
    const std::string dir = "/tmp/fractal_cli_gen";
    fs::remove_all(dir);
    write_file("/tmp/fractal_gen.cfg",
               "fractal = cantor1d\nn = 3\ntrain_size = 300\ntest_size = 70\n");
    REQUIRE(run_cli("gen --config /tmp/fractal_gen.cfg --out " + dir) == 0);
    Dataset train_ds = read_dataset(dir + "/train.csv");
    Dataset test_ds = read_dataset(dir + "/test.csv");
    CHECK(train_ds.size() == 300);
    CHECK(test_ds.size() == 70);

    const std::string again = dir + "_again";
    fs::remove_all(again);
    REQUIRE(run_cli("gen --config /tmp/fractal_gen.cfg --out " + again) == 0);
    CHECK(slurp(dir + "/train.csv") == slurp(again + "/train.csv"));
    CHECK(slurp(dir + "/test.csv") == slurp(again + "/test.csv"));
    CHECK(slurp(dir + "/train.csv.meta") == slurp(again + "/train.csv.meta"));
}

TEST_CASE("cli exit codes") {
    write_file("/tmp/fractal_badfractal.cfg", "fractal = moomin\n");
    CHECK(run_cli("gen --config /tmp/fractal_badfractal.cfg --out /tmp/fractal_cli_bad") == 2);

    // Corrupted net file fails verification with exit 3.
    write_file("/tmp/fractal_broken.net", "layers 1\n1 1\n0\n1\n");
    write_file("/tmp/fractal_bv.cfg", "fractal = cantor1d\nn = 2\nverify_m = 500\n");
    CHECK(run_cli("build-verify --config /tmp/fractal_bv.cfg --out /tmp/fractal_cli_bv "
                  "--net /tmp/fractal_broken.net") == 3);

    write_file("/tmp/fractal_probe_small.cfg",
               "fractal = cantor1d\nn = 8\ncurve = fine\nt = 2\nk = 4\ndelta = 0.5\n"
               "trials = 2\n");
    CHECK(run_cli("probe --config /tmp/fractal_probe_small.cfg --out /tmp/fractal_cli_pb")
          == 4);

    CHECK(run_cli("frobnicate") == 2);
}

TEST_CASE("cli build-verify emits the advertised header shape") {
    write_file("/tmp/fractal_bv2.cfg", "fractal = cantor2d\nn = 3\nverify_m = 2000\n");
    const std::string dir = "/tmp/fractal_cli_bv2";
    fs::remove_all(dir);
    REQUIRE(run_cli("build-verify --config /tmp/fractal_bv2.cfg --out " + dir) == 0);
    LayeredNet net = load_net(dir + "/classifier.net");
    CHECK(net.depth() == 7);      // 2n+1
    CHECK(net.max_width() == 40); // 5dr
}

TEST_CASE("cli probe csv has one row per trial") {
    write_file("/tmp/fractal_probe.cfg",
               "fractal = cantor1d\nn = 15\ncurve = fine\nt = 2\nk = 4\ndelta = 0.5\n"
               "trials = 3\n");
    const std::string dir = "/tmp/fractal_cli_probe";
    fs::remove_all(dir);
    REQUIRE(run_cli("probe --config /tmp/fractal_probe.cfg --out " + dir) == 0);
    std::ifstream in(dir + "/probe.csv");
    std::string line;
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 4); // header + trials
    // Determinism across reruns.
    const std::string again = dir + "_again";
    fs::remove_all(again);
    REQUIRE(run_cli("probe --config /tmp/fractal_probe.cfg --out " + again) == 0);
    CHECK(slurp(dir + "/probe.csv") == slurp(again + "/probe.csv"));
}

TEST_CASE("cli regions reports counts for a net file") {
    auto ifs = builtin_ifs("cantor1d");
    LayeredNet net = build_exact_classifier(ifs, 2, 0.01);
    save_net("/tmp/fractal_regions.net", net);
    CHECK(run_cli("regions --net /tmp/fractal_regions.net") == 0);
    CHECK(run_cli("regions") == 2);
}
