#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "airtraj/geo.hpp"
#include "airtraj/time_util.hpp"

using namespace airtraj;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string& bin() {
    static const std::string path = [] {
        const char* env = std::getenv("AIRTRAJ_BIN");
        REQUIRE_MESSAGE(env != nullptr, "AIRTRAJ_BIN must point at the CLI binary");
        return std::string(env);
    }();
    return path;
}

RunResult run(const std::string& args) {
    const fs::path out = fs::temp_directory_path() / "airtraj_cli_stdout.txt";
    const fs::path err = fs::temp_directory_path() / "airtraj_cli_stderr.txt";
    const std::string cmd = bin() + " " + args + " >" + out.string() + " 2>" + err.string();
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = raw < 0 ? raw : WEXITSTATUS(raw);
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

const fs::path kWork = fs::temp_directory_path() / "airtraj_cli_work";

} // namespace

TEST_CASE("help exits 0 for the tool and every subcommand") {
    CHECK(run("--help").exit_code == 0);
    for (const char* sub : {"process", "synth", "train", "predict", "eval", "plot"})
        CHECK(run(std::string(sub) + " --help").exit_code == 0);
}

TEST_CASE("unknown subcommands and flags exit 2 with usage text") {
    const auto bad_sub = run("frobnicate");
    CHECK(bad_sub.exit_code == 2);
    const auto bad_flag = run("synth --no-such-flag --out /tmp/x");
    CHECK(bad_flag.exit_code == 2);
    const auto nothing = run("");
    CHECK(nothing.exit_code == 2);
}

TEST_CASE("synth, train, eval succeed on defaults") {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    const std::string data = (kWork / "data").string();
    const std::string ckpt = (kWork / "model.ckpt").string();
    const std::string report = (kWork / "report.json").string();

    const auto synth = run("synth --scenes 3 --seed 5 --out " + data);
    CAPTURE(synth.err);
    CHECK(synth.exit_code == 0);

    const auto train = run("train --data " + data + " --epochs 1 --limit-windows 10 --seed 1 --out " + ckpt);
    CAPTURE(train.err);
    CHECK(train.exit_code == 0);
    CHECK(fs::exists(ckpt));

    const auto eval = run("eval --ckpt " + ckpt + " --data " + data + " --n 5 --seed 2 --out " + report);
    CAPTURE(eval.err);
    CHECK(eval.exit_code == 0);

    const auto j = nlohmann::json::parse(slurp(report));
    CHECK(j.at("n_samples").get<int>() == 5);
    CHECK(j.at("ade_km").get<double>() >= 0.0);
    CHECK(j.contains("config_hash"));
    CHECK(j.contains("dataset_fingerprint"));
}

TEST_CASE("eval with a missing checkpoint exits 1 with the missing-input category") {
    const auto r = run("eval --ckpt /nonexistent.ckpt --data /tmp --n 5 --out /tmp/r.json");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("[missing-input]") != std::string::npos);
}

TEST_CASE("process turns raw logs plus METAR into day-partitioned scenes") {
    const fs::path dir = kWork / "process";
    fs::remove_all(dir);
    fs::create_directories(dir / "raw");

    // Two aircraft orbit near the frame origin for a few minutes.
    const geo::FrameConfig frame;
    const std::int64_t t0 = civil_to_epoch(2020, 9, 18, 14, 0);
    {
        std::ofstream raw(dir / "raw" / "2020-09-18.csv");
        raw << "timestamp,aircraft_id,lat,lon,alt_ft\n";
        for (int i = 0; i < 200; i += 4) { // sparse 4-second reports
            raw << (t0 + i) << ",AAA111," << (frame.origin_lat + 0.0001 * i) << ","
                << frame.origin_lon << "," << (1300 + i) << "\n";
            raw << (t0 + i) << ",BBB222," << (frame.origin_lat - 0.00005 * i) << ","
                << (frame.origin_lon + 0.0001 * i) << "," << (1500 + i) << "\n";
        }
        raw << "not,a,valid,line\n";                    // malformed: too few fields
        raw << (t0 + 300) << ",CCC333,91.0,0.0,100\n";  // cleaned: latitude out of range
    }
    {
        std::ofstream metar(dir / "metar.txt");
        metar << "KBTP 181353Z 26008KT 10SM CLR 21/13 A3000\n";
        metar << "KBTP 181453Z 27010G18KT 10SM CLR 22/12 A2999\n";
        metar << "garbage line that does not parse\n";
    }

    const auto r = run("process --raw " + (dir / "raw").string() + " --metar " +
                       (dir / "metar.txt").string() + " --out " + (dir / "out").string());
    CAPTURE(r.err);
    CHECK(r.exit_code == 0);
    CHECK(r.err.find(":102:") != std::string::npos); // malformed line diagnostic with line number

    const fs::path scene_file = dir / "out" / "2020-09-18" / "scenes.csv";
    REQUIRE(fs::exists(scene_file));
    const auto scenes = geo::read_scenes_file(scene_file.string());
    REQUIRE(scenes.size() == 1);
    CHECK(scenes[0].agents.size() == 2);
    // 1 Hz grid across the reported span.
    CHECK(scenes[0].agents[0].points.size() == 197);
    // Wind attached from the nearest report, in the runway frame.
    CHECK(scenes[0].wind.size() == static_cast<std::size_t>(scenes[0].duration_s()));
    CHECK(scenes[0].wind[0].u_along != 0.0);
}

TEST_CASE("predict emits N samples per agent and plots draw exactly N polylines each") {
    const std::string data = (kWork / "data").string();
    const std::string ckpt = (kWork / "model.ckpt").string();
    REQUIRE(fs::exists(ckpt)); // produced by the synth/train/eval case

    const std::string pred = (kWork / "pred.json").string();
    const auto p = run("predict --ckpt " + ckpt + " --data " + data +
                       " --n 4 --seed 9 --window 2 --out " + pred);
    CAPTURE(p.err);
    CHECK(p.exit_code == 0);

    const auto j = nlohmann::json::parse(slurp(pred));
    const auto& agents = j.at("window").at("agents");
    REQUIRE(agents.size() >= 1);
    for (const auto& a : agents) {
        CHECK(a.at("samples").size() == 4);
        CHECK(a.at("best_index").get<int>() >= 0);
        CHECK(a.at("best_index").get<int>() < 4);
    }

    const std::string svg1 = (kWork / "pred1.svg").string();
    const std::string svg2 = (kWork / "pred2.svg").string();
    CHECK(run("plot --pred " + pred + " --out " + svg1).exit_code == 0);
    CHECK(run("plot --pred " + pred + " --out " + svg2).exit_code == 0);
    const std::string b1 = slurp(svg1), b2 = slurp(svg2);
    CHECK(b1 == b2); // identical bytes for identical input

    // N sample polylines plus truth plus history, per agent.
    std::size_t count = 0, at = 0;
    while ((at = b1.find("<polyline", at)) != std::string::npos) {
        ++count;
        at += 9;
    }
    CHECK(count == agents.size() * (4 + 2));
}

TEST_CASE("scene plots render one polyline per agent, deterministically") {
    const fs::path scene_file = kWork / "data" / "day_000" / "scene_000000.csv";
    REQUIRE(fs::exists(scene_file));
    const std::string svg1 = (kWork / "scene1.svg").string();
    const std::string svg2 = (kWork / "scene2.svg").string();
    CHECK(run("plot --scene " + scene_file.string() + " --out " + svg1).exit_code == 0);
    CHECK(run("plot --scene " + scene_file.string() + " --out " + svg2).exit_code == 0);
    const std::string b1 = slurp(svg1);
    CHECK(b1 == slurp(svg2));

    const auto scenes = geo::read_scenes_file(scene_file.string());
    std::size_t count = 0, at = 0;
    while ((at = b1.find("<polyline", at)) != std::string::npos) {
        ++count;
        at += 9;
    }
    CHECK(count == scenes[0].agents.size());
}

TEST_CASE("the data-root environment variable overrides the flag") {
    const std::string report = (kWork / "env_report.json").string();
    const std::string cmd = "AIRTRAJ_DATA_ROOT=" + (kWork / "data").string() + " " + bin() +
                            " eval --baseline const-velocity --data /does/not/exist --n 2 --seed 3 --out " +
                            report + " >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(raw) == 0);
    CHECK(fs::exists(report));
}

TEST_CASE("a config contradicting the checkpoint architecture is rejected") {
    const std::string ckpt = (kWork / "model.ckpt").string();
    const fs::path cfg_file = kWork / "other.cfg";
    std::ofstream(cfg_file) << "model.tcn_channels = 8\n";
    const auto r = run("predict --ckpt " + ckpt + " --data " + (kWork / "data").string() +
                       " --config " + cfg_file.string() + " --n 1 --out /tmp/p.json");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("[bad-config]") != std::string::npos);
    CHECK(r.err.find("mismatch") != std::string::npos);
}
