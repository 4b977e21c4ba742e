#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

#include "spinmachine/harness/acceptance.hpp"
#include "spinmachine/harness/recipes.hpp"
#include "spinmachine/harness/sweep.hpp"

using namespace spinmachine;
using namespace spinmachine::harness;
namespace fs = std::filesystem;

namespace {

const char* kSmallChain = R"({
  "name": "small",
  "kind": "chain",
  "chain": {"N": 3, "E": [1.0, 0.9, 0.7], "J": 0.5, "K": 0.1, "F": 0.05},
  "cycle": {"beta1": 0.5, "beta2": 1.0, "tau1": 1.0, "tau2": 0.6},
  "axes": [{"field": "ratio", "start": -1.0, "stop": 2.0, "step": 0.25},
           {"field": "tau1", "values": [0.5, 1.5]}],
  "analyses": ["thermo", "regime", "ansatz", "mixing"]
})";

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("spinmachine_test_" + name);
    fs::remove_all(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SPINMACHINE_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Harness, ShortestRoundTripDoubles) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(-2.0), "-2");
    EXPECT_EQ(format_double(1e-300), "1e-300");
    EXPECT_EQ(format_double(std::nan("")), "nan");
    EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
    std::mt19937_64 rng(81);
    for (int k = 0; k < 1000; ++k) {
        const double v = std::ldexp(std::uniform_real_distribution<double>(-1, 1)(rng), static_cast<int>(k % 200) - 100);
        EXPECT_EQ(std::stod(format_double(v)), v);
    }
}

TEST(Harness, CsvQuoting) {
    Table t{{"a", "b", "c", "d"}, {{Cell{1.5}, Cell{7L}, Cell{std::string("x,y")}, Cell{}}}};
    EXPECT_EQ(t.csv(), "a,b,c,d\n1.5,7,\"x,y\",\n");
    EXPECT_EQ(format_cell(std::string("say \"hi\"")), "\"say \"\"hi\"\"\"");
}

TEST(Harness, Sha256KnownVector) {
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Harness, OutputDirectoryPrecedence) {
    ::unsetenv(kOutputEnv);
    EXPECT_EQ(resolve_output_dir(""), fs::path("out"));
    ::setenv(kOutputEnv, "/tmp/from_env", 1);
    EXPECT_EQ(resolve_output_dir(""), fs::path("/tmp/from_env"));
    EXPECT_EQ(resolve_output_dir("flag_dir"), fs::path("flag_dir"));
    ::unsetenv(kOutputEnv);
}

TEST(Harness, GridValuesAreSnapped) {
    const SweepConfig c = parse_config_text(kSmallChain);
    ASSERT_EQ(c.axes.size(), 2u);
    EXPECT_EQ(c.axes[0].values.size(), 13u);
    EXPECT_EQ(c.axes[0].values[6], 0.5);
    EXPECT_EQ(c.axes[0].values.back(), 2.0);
    const auto grid = expand_grid(c);
    ASSERT_EQ(grid.size(), 26u);
    EXPECT_EQ(grid[0].values, (std::vector<double>{-1.0, 0.5}));
    EXPECT_EQ(grid[1].values, (std::vector<double>{-1.0, 1.5}));
    EXPECT_EQ(grid[2].values, (std::vector<double>{-0.75, 0.5}));
}

TEST(Harness, LinspaceAndLinearChainFields) {
    const SweepConfig c = parse_config_text(R"({"chain": {"N": 5, "E": {"linear": [1, 2]}, "J": [1, 2, 3, 4]},
        "axes": [{"field": "tau1", "linspace": [0, 1, 5]}]})");
    EXPECT_EQ(c.chain.E, (std::vector<double>{1.0, 1.25, 1.5, 1.75, 2.0}));
    EXPECT_EQ(c.chain.J, (std::vector<double>{1, 2, 3, 4}));
    EXPECT_EQ(c.axes[0].values, (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
}

TEST(Harness, ConfigErrors) {
    const std::vector<std::string> bad{
        "not json",
        R"({"kind": "ring"})",
        R"({"chain": {"N": 1, "E": 1}})",
        R"({"chain": {"N": 3, "E": [1, 2]}})",
        R"({"chain": {"N": 3, "E": 1}, "axes": [{"field": "J_R", "values": [1]}]})",
        R"({"chain": {"N": 3, "E": 1}, "axes": [{"field": "tau1", "values": []}]})",
        R"({"chain": {"N": 3, "E": 1}, "axes": [{"field": "tau1", "linspace": [0, 1]}]})",
        R"({"chain": {"N": 3, "E": 1}, "axes": [{"field": "tau1", "start": 1, "stop": 0, "step": 0.1}]})",
        R"({"chain": {"N": 3, "E": 1}, "analyses": ["entropy"]})",
        R"({"chain": {"N": 3, "E": 1}, "analyses": ["nosym_closed"]})",
        R"({"kind": "nosym", "nosym": {"E1": 1}, "analyses": ["lowtemp"]})",
        R"({"chain": {"N": 3, "E": 1}, "cycle": {"beta1": -1}})",
        R"({"chain": {"N": 3, "E": 1}, "cycle": {"mode": "three-stroke"}})",
        R"({"chain": {"N": 3, "E": 1}, "method": "magic"})",
        R"({"chain": {"N": 3, "E": 1}, "tol": 0})",
    };
    for (const auto& text : bad) EXPECT_THROW(parse_config_text(text), ConfigError) << text;
    const SweepConfig big = parse_config_text(R"({"chain": {"N": 20, "E": 1, "J": 1}, "analyses": ["thermo"]})");
    EXPECT_THROW(SweepRunner{big}, ConfigError);
}

TEST(Harness, ShippedRecipesMatchRecipeFiles) {
    for (const auto& name : recipe_names()) {
        const fs::path p = fs::path(SPINMACHINE_SOURCE_DIR) / "recipes" / (name + ".json");
        const json file = json::parse(read_text(p));
        EXPECT_EQ(json::parse(recipe_text(name)), file) << name;
        EXPECT_NO_THROW(recipe(name)) << name;
    }
    EXPECT_THROW(recipe_text("fig9"), ConfigError);
}

TEST(Harness, SweepIsDeterministicAcrossJobCounts) {
    const SweepConfig c = parse_config_text(kSmallChain);
    const SweepResult one = run_sweep(c, 1);
    const SweepResult three = run_sweep(c, 3);
    EXPECT_EQ(one.table.csv(), three.table.csv());
    EXPECT_EQ(one.flagged, 0);
    EXPECT_EQ(one.table.columns, sweep_columns(c));
    EXPECT_EQ(one.table.columns.back(), "status");
}

TEST(Harness, WrittenFilesAreByteIdentical) {
    const SweepConfig c = parse_config_text(kSmallChain);
    const fs::path a = scratch("a"), b = scratch("b");
    const WrittenFiles fa = write_sweep(run_sweep(c, 2), c, a);
    const WrittenFiles fb = write_sweep(run_sweep(c, 1), c, b);
    EXPECT_EQ(read_text(fa.csv), read_text(fb.csv));
    EXPECT_EQ(read_text(fa.sidecar), read_text(fb.sidecar));
    const json side = json::parse(read_text(fa.sidecar));
    EXPECT_EQ(side.at("version"), kToolVersion);
    EXPECT_EQ(side.at("config_sha256"), sha256_hex(c.canonical));
    EXPECT_EQ(side.at("rows"), 26);
    EXPECT_FALSE(side.contains("timestamp"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Harness, SweepRegimesMatchPrediction) {
    const SweepConfig c = parse_config_text(kSmallChain);
    const SweepResult r = run_sweep(c);
    const auto& cols = r.table.columns;
    const auto col = [&](const std::string& n) { return std::find(cols.begin(), cols.end(), n) - cols.begin(); };
    for (const auto& row : r.table.rows) {
        const std::string got = std::get<std::string>(row[col("regime")]);
        const std::string want = std::get<std::string>(row[col("predicted_regime")]);
        if (got != "D" && want != "D") EXPECT_EQ(got, want);
        EXPECT_EQ(std::get<std::string>(row[col("status")]), "ok");
    }
}

TEST(Harness, NoSymSweepAgreesWithClosedForm) {
    const SweepConfig c = parse_config_text(R"({"name": "ns", "kind": "nosym",
        "nosym": {"E1": 1, "J_R": 0.375, "K_R": 0.075, "F": 0.2},
        "cycle": {"beta1": 0.3, "beta2": 0.6, "tau1": 1.0, "tau2": 2.0},
        "axes": [{"field": "E2", "start": -3, "stop": 3, "step": 0.5}],
        "analyses": ["thermo", "regime", "nosym_closed"]})");
    const SweepResult r = run_sweep(c);
    const auto& cols = r.table.columns;
    const auto dev = std::find(cols.begin(), cols.end(), "closed_deviation") - cols.begin();
    for (const auto& row : r.table.rows) EXPECT_LT(std::get<double>(row[dev]), 1e-10);
}

TEST(Harness, CliExitCodes) {
    const fs::path dir = scratch("cli");
    fs::create_directories(dir);
    const fs::path good = dir / "good.json";
    write_text(good, kSmallChain);
    EXPECT_EQ(run_cli("sweep " + good.string() + " --out " + (dir / "o1").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "o1" / "small.csv"));
    EXPECT_TRUE(fs::exists(dir / "o1" / "small.json"));

    // Unresolved series within a one-cycle budget flags every point.
    const fs::path flagged = dir / "flagged.json";
    write_text(flagged, R"({"name": "lt", "chain": {"N": 60, "E": 1, "J": 1},
        "axes": [{"field": "tau1", "values": [1.0, 2.0]}], "analyses": ["lowtemp"],
        "cycle": {"beta1": 10, "beta2": 12, "mode": "two-stroke"}, "lowtemp": {"budget": 1}})");
    EXPECT_EQ(run_cli("sweep " + flagged.string() + " --out " + (dir / "o2").string()), 2);

    const fs::path broken = dir / "broken.json";
    write_text(broken, R"({"chain": {"N": 3, "E": [1, 2]}})");
    EXPECT_EQ(run_cli("sweep " + broken.string() + " --out " + (dir / "o3").string()), 1);

    ::setenv(kOutputEnv, (dir / "env").string().c_str(), 1);
    EXPECT_EQ(run_cli("sweep " + good.string()), 0);
    ::unsetenv(kOutputEnv);
    EXPECT_TRUE(fs::exists(dir / "env" / "small.csv"));
    EXPECT_EQ(read_text(dir / "env" / "small.csv"), read_text(dir / "o1" / "small.csv"));
    fs::remove_all(dir);
}

TEST(Harness, AcceptanceSelection) {
    EXPECT_EQ(select_criteria("all").size(), 11u);
    EXPECT_EQ(select_criteria("c4"), std::vector<std::string>{"c4"});
    EXPECT_THROW(select_criteria("c12"), ConfigError);
}
