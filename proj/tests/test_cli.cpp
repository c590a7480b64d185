#include "sslab/cli.hpp"
#include "sslab/config.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int sslab_run(std::vector<std::string> args) {
    args.insert(args.begin(), "sslab");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return sslab::run(static_cast<int>(argv.size()), argv.data());
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("sslab_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

nlohmann::json load(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

std::string first_line(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    return line;
}

} // namespace

TEST_CASE("usage and configuration errors exit with 2") {
    CHECK(sslab_run({}) == 2);
    CHECK(sslab_run({"frobnicate"}) == 2);
    const fs::path dir = scratch("errors");
    CHECK(sslab_run({"simulate", "--out", dir.string()}) == 2); // no seed
    CHECK(sslab_run({"simulate", "--set", "seed=1", "--set", "bogus=1", "--out", dir.string()}) == 2);
    CHECK(sslab_run({"simulate", "--set", "seed=1", "--config", (dir / "absent.json").string()}) == 2);
    CHECK(sslab_run({"test", "--set", "seed=1"}) == 2); // --data is required
    CHECK(sslab_run({"test", "--set", "seed=1", "--data", (dir / "absent.csv").string(), "--out",
                     dir.string()}) == 3);
    fs::remove_all(dir);
}

TEST_CASE("oracle verification") {
    const fs::path dir = scratch("verify");
    CHECK(sslab_run({"oracle-verify", "--set", "seed=1", "--out", dir.string()}) == 0);
    CHECK(first_line(dir / "oracle_verify.csv") == "point_id,s,lhs,rhs,abs_diff,error");
    // An unreachable threshold is reported through the exit code.
    CHECK(sslab_run({"oracle-verify", "--set", "seed=1", "--set", "oracle_verify_tolerance=1e-15", "--out",
                     dir.string()}) == 1);
    fs::remove_all(dir);
}

TEST_CASE("symmetry check on the population") {
    const fs::path dir = scratch("check");
    CHECK(sslab_run({"symmetry-check", "--set", "seed=1", "--out", dir.string()}) == 0);
    const auto report = load(dir / "symmetry.json");
    CHECK(report["p_value"].is_null());
    CHECK(report["points"].size() == 27); // 9 points under 3 channels
    CHECK(first_line(dir / "residuals.csv") == "point_id,level_i,level_j,residual,channel");
    CHECK(fs::exists(dir / "welfare_gap.csv"));
    fs::remove_all(dir);
}

TEST_CASE("simulate, test and report") {
    const fs::path dir = scratch("pipeline");
    const std::vector<std::string> common{"--set", "seed=7", "--set", "n=20000", "--set", "B=19"};
    auto with = [&](std::vector<std::string> args, const fs::path& out) {
        args.insert(args.end(), common.begin(), common.end());
        args.push_back("--out");
        args.push_back(out.string());
        return sslab_run(args);
    };
    REQUIRE(with({"simulate"}, dir) == 0);
    CHECK(fs::exists(dir / "data.csv"));
    const auto meta = load(dir / "data.meta.json");
    CHECK(meta["n"] == 20000);

    const std::string data = (dir / "data.csv").string();
    REQUIRE(with({"test", "--data", data}, dir / "a") == 0);
    REQUIRE(with({"test", "--data", data}, dir / "b") == 0);
    auto a = load(dir / "a" / "report.json");
    auto b = load(dir / "b" / "report.json");
    CHECK(a["meta"].contains("dataset_hash"));
    CHECK(a["meta"].contains("failed_replicates"));
    CHECK(a["replicates"].size() == 19);
    CHECK(a["p_value"].is_number());

    // The embedded hash is the hash of the resolved configuration, which
    // ignores the output directory.
    nlohmann::json overrides = {{"seed", 7}, {"n", 20000}, {"B", 19}};
    const sslab::RunConfig cfg = sslab::resolve_config(overrides);
    CHECK(a["meta"]["config_hash"] == cfg.hash());

    // Reruns agree byte for byte apart from the timing and output location.
    for (auto* r : {&a, &b}) {
        (*r)["meta"].erase("runtime_s");
        (*r)["meta"]["config"].erase("output_dir");
    }
    const bool identical = a.dump() == b.dump();
    CHECK(identical);

    const fs::path csv = dir / "rendered.csv";
    CHECK(sslab_run({"report", "--report", (dir / "a" / "report.json").string(), "--csv", csv.string()}) == 0);
    CHECK(first_line(csv) == "point_id,level_i,level_j,residual,channel");
    fs::remove_all(dir);
}

TEST_CASE("Monte Carlo study command") {
    const fs::path dir = scratch("mc");
    CHECK(sslab_run({"mc-study", "--set", "seed=3", "--set", "mc.reps=1", "--set", "mc.ns=[20000]", "--set",
                     "mc.B=19", "--out", dir.string()}) == 0);
    CHECK(first_line(dir / "mc.csv") == "system,n,channel,reps,reject_rate_5pct,mean_T,sd_T");
    CHECK(fs::exists(dir / "mc_replicates.csv"));
    CHECK(sslab_run({"mc-study", "--set", "seed=3", "--set", "mc.reps=0", "--out", dir.string()}) == 2);
    fs::remove_all(dir);
}
