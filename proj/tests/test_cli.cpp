#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string err;
};

fs::path scratch()
{
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("epg_cli_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

Result run(const std::string& args)
{
    const auto err = scratch() / "stderr.txt";
    const std::string cmd = std::string(EPG_CLI) + " " + args + " > /dev/null 2> " + err.string();
    const int status = std::system(cmd.c_str());
    std::ifstream in(err);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path small_config()
{
    const auto p = scratch() / "cfg.json";
    std::ofstream(p) << R"({
  "seed": 3,
  "cohort": {"n_pps": 3, "n_control": 1, "baseline_s": 600, "early_s": 600, "late_s": 600},
  "training": {"budget_s_per_phase": 300, "batch_size": 8, "max_epochs": 1, "steps_per_epoch": 3, "max_val_segments": 32},
  "evaluation": {"pool_lengths": [5, 30, 60], "report_pool_length_s": 30},
  "explain": {"segments_per_class": 1, "profile_segments_per_class": 20}
})";
    return p;
}

}  // namespace

TEST_CASE("--help on every command exits 0")
{
    for (const char* cmd : {"", "generate", "preprocess", "train", "evaluate", "cam", "report", "count"})
        CHECK(run(std::string(cmd) + " --help").code == 0);
}

TEST_CASE("usage and configuration errors exit 2 with an error object")
{
    const auto missing = run("generate --config /nonexistent/cfg.json --out " + (scratch() / "g0").string());
    CHECK(missing.code == 2);
    const auto j = nlohmann::json::parse(missing.err);
    CHECK(j.at("error").at("kind") == "config");

    const auto bad = scratch() / "bad.json";
    std::ofstream(bad) << "{\"training\": {\"epochs\": 3}}";
    const auto r = run("generate --config " + bad.string() + " --out " + (scratch() / "g1").string());
    CHECK(r.code == 2);
    CHECK(r.err.find("training.epochs") != std::string::npos);

    CHECK(run("train --store x").code == 2);
    CHECK(run("count --model Nope").code == 2);
}

TEST_CASE("missing inputs and incomplete runs")
{
    const auto empty = scratch() / "empty_run";
    fs::create_directories(empty);
    CHECK(run("evaluate --run " + empty.string() + " --store " + (scratch() / "none.epgs").string()).code == 2);
    const auto rep = run("report --run " + empty.string());
    CHECK(rep.code == 3);
    const auto j = nlohmann::json::parse(rep.err);
    CHECK(j.at("error").at("missing").size() >= 1);
    CHECK(run("preprocess --in " + (scratch() / "nowhere").string() + " --out " + (scratch() / "s.epgs").string()).code == 3);
}

TEST_CASE("the same configuration and seed give identical generator outputs")
{
    const auto cfg = small_config();
    REQUIRE(run("generate -q --config " + cfg.string() + " --out " + (scratch() / "ga").string()).code == 0);
    REQUIRE(run("generate -q --config " + cfg.string() + " --out " + (scratch() / "gb").string()).code == 0);
    const auto a = nlohmann::json::parse(slurp(scratch() / "ga" / "manifest.json"));
    const auto b = nlohmann::json::parse(slurp(scratch() / "gb" / "manifest.json"));
    CHECK(a.at("outputs") == b.at("outputs"));
    CHECK(a.at("config_digest") == b.at("config_digest"));
    CHECK(a.at("tool_version") == "0.1.0");

    REQUIRE(run("generate -q --seed 4 --config " + cfg.string() + " --out " + (scratch() / "gc").string()).code == 0);
    const auto c = nlohmann::json::parse(slurp(scratch() / "gc" / "manifest.json"));
    CHECK(c.at("outputs") != a.at("outputs"));
}

TEST_CASE("full pipeline on a four-subject cohort produces a report")
{
    const auto cfg = small_config().string();
    const auto gen = (scratch() / "gen").string();
    const auto store = (scratch() / "data" / "store.epgs").string();
    const auto rund = (scratch() / "run").string();
    REQUIRE(run("generate -q --config " + cfg + " --out " + gen).code == 0);
    REQUIRE(run("preprocess -q --in " + gen + " --out " + store).code == 0);
    REQUIRE(run("train -q --config " + cfg + " --store " + store + " --run " + rund).code == 0);
    CHECK(run("report -q --run " + rund).code == 3);
    REQUIRE(run("evaluate -q --run " + rund + " --store " + store).code == 0);
    REQUIRE(run("cam -q --checkpoint " + rund + "/folds/PPS01/checkpoint.epgw --store " + store + " --out " + rund +
                "/cam --events " + gen + "/PPS01.events.csv")
                .code == 0);
    REQUIRE(run("report -q --run " + rund).code == 0);

    int artifacts = 0;
    for (const auto& e : fs::directory_iterator(fs::path(rund) / "report"))
        artifacts += e.path().extension() == ".csv" || e.path().extension() == ".svg";
    CHECK(artifacts >= 6);
    CHECK(fs::is_regular_file(fs::path(rund) / "report" / "metrics_table.csv"));
    CHECK(fs::is_regular_file(fs::path(rund) / "report" / "pool_curve.svg"));
    CHECK(fs::is_regular_file(fs::path(rund) / "cam" / "event_overlap.json"));

    // Re-running the report reproduces it byte for byte.
    const auto first = slurp(fs::path(rund) / "report" / "manifest.json");
    REQUIRE(run("report -q --run " + rund).code == 0);
    CHECK(slurp(fs::path(rund) / "report" / "manifest.json") == first);
    fs::remove_all(scratch());
}
