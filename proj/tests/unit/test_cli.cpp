#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "heatinv/cli.hpp"

using namespace heatinv;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("heatinv_unit_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

fs::path small_config(const fs::path& dir) {
    std::ofstream(dir / "cfg.json") << R"({"grid": {"n_x": 17, "n_t": 17},
        "data": {"N": 32},
        "chain": {"n_steps": 60, "burn_in": 20, "seed": 4}})";
    return dir / "cfg.json";
}

}  // namespace

TEST(Cli, UsageErrors) {
    EXPECT_EQ(cli({}).code, kExitUsage);
    EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
    EXPECT_EQ(cli({"forward", "--format", "xml"}).code, kExitUsage);
    EXPECT_EQ(cli({"--help"}).code, kExitOk);
    EXPECT_NE(cli({"--version"}).out.find(kVersion), std::string::npos);
}

TEST(Cli, SchemaErrorIsReportedAsJson) {
    const fs::path dir = fresh("schema");
    std::ofstream(dir / "bad.json") << R"({"grid": {"dimension": 1}})";
    const CliResult r = cli({"forward", "-c", (dir / "bad.json").string(), "-o", (dir / "out").string()});
    EXPECT_EQ(r.code, kExitSchema);
    const auto j = nlohmann::json::parse(r.err);
    EXPECT_EQ(j.at("error").at("category"), "schema");
}

TEST(Cli, ForwardWritesSolutionAndManifest) {
    const fs::path dir = fresh("forward");
    const fs::path cfg = small_config(dir);
    const CliResult r = cli({"forward", "-c", cfg.string(), "-o", (dir / "a").string(), "--format", "binary"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_TRUE(fs::exists(dir / "a" / "solution.bin"));
    EXPECT_TRUE(fs::exists(dir / "a" / "solution.json"));
    const auto m = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
    EXPECT_EQ(m.at("invocation").at("command"), "forward");
    EXPECT_EQ(m.at("config").at("grid").at("n_x"), 17);
}

TEST(Cli, ReplayIsByteIdentical) {
    const fs::path dir = fresh("replay");
    const fs::path cfg = small_config(dir);
    ASSERT_EQ(cli({"sample", "-c", cfg.string(), "-o", (dir / "a").string()}).code, kExitOk);
    ASSERT_EQ(cli({"replay", (dir / "a" / "manifest.json").string(), "-o", (dir / "b").string()}).code, kExitOk);
    for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), dir / "a");
        EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / rel)) << rel;
    }
}

TEST(Cli, SampleFromSavedDataAndResume) {
    const fs::path dir = fresh("resume");
    const fs::path cfg = small_config(dir);
    ASSERT_EQ(cli({"simulate", "-c", cfg.string(), "-o", (dir / "data").string()}).code, kExitOk);
    const std::string data = (dir / "data" / "dataset.csv").string();
    ASSERT_EQ(cli({"sample", "-c", cfg.string(), "--data", data, "-o", (dir / "full").string()}).code, kExitOk);

    std::ofstream(dir / "half.json") << R"({"grid": {"n_x": 17, "n_t": 17},
        "data": {"N": 32},
        "chain": {"n_steps": 30, "burn_in": 20, "seed": 4}})";
    ASSERT_EQ(cli({"sample", "-c", (dir / "half.json").string(), "--data", data, "-o", (dir / "half").string()}).code,
              kExitOk);
    const CliResult r = cli({"sample", "-c", cfg.string(), "--data", data, "--resume", (dir / "half").string(), "-o",
                       (dir / "rest").string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_EQ(slurp(dir / "full" / "chain" / "states.csv"), slurp(dir / "rest" / "chain" / "states.csv"));
    EXPECT_EQ(slurp(dir / "full" / "posterior_mean.csv"), slurp(dir / "rest" / "posterior_mean.csv"));
}

TEST(Cli, MissingInputIsUsageError) {
    const fs::path dir = fresh("missing");
    EXPECT_EQ(cli({"sample", "--data", (dir / "nope.csv").string()}).code, kExitUsage);
    EXPECT_EQ(cli({"replay", (dir / "nope.json").string()}).code, kExitUsage);
}
