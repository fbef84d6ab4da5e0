#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "test_support.hpp"

namespace fs = std::filesystem;
using qevade::test::TempDir;

namespace {

int run_cli(const std::string& args) {
    std::string command = std::string(QEVADE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    return std::system(command.c_str());
}

void write_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST_CASE("cli: synth -> rank-features -> train -> attack -> report chain") {
    TempDir dir;
    const std::string base = dir.path.string();

    REQUIRE(run_cli("synth --benign 40 --malware 40 --features 6 --informative 4"
                    " --noise 0.1 --seed 3 --out " + base + "/data.csv") == 0);
    REQUIRE(fs::exists(dir.path / "data.csv"));

    REQUIRE(run_cli("rank-features --data " + base + "/data.csv --k 4 --seed 1 --out " +
                    base + "/ranked") == 0);
    REQUIRE(fs::exists(dir.path / "ranked" / "ranking.json"));
    REQUIRE(fs::exists(dir.path / "ranked" / "ranking.txt"));
    REQUIRE(fs::exists(dir.path / "ranked" / "reduced.csv"));

    REQUIRE(run_cli("train --data " + base + "/ranked/reduced.csv --algorithms DT,LR"
                    " --seed 2 --out " + base + "/models") == 0);
    REQUIRE(fs::exists(dir.path / "models" / "dt.json"));
    REQUIRE(fs::exists(dir.path / "models" / "lr.json"));

    // malware-only slice for the attack
    REQUIRE(run_cli("synth --benign 1 --malware 20 --features 6 --informative 4"
                    " --noise 0.1 --seed 9 --out " + base + "/mixed.csv") == 0);
    // (the attack rejects benign rows, so filter via rank-features' column order)
    std::ifstream in(dir.path / "mixed.csv");
    std::string header, line, malware_csv;
    std::getline(in, header);
    malware_csv = header + "\n";
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '1') malware_csv += line + "\n";
    }
    write_file(dir.path / "malware_full.csv", malware_csv);
    REQUIRE(run_cli("rank-features --data " + base + "/malware_full.csv --k 6 --seed 1"
                    " --out " + base + "/unused") != 0);  // single-class data fails

    // project the malware rows onto the attack features by reusing the
    // reduced training csv column order
    REQUIRE(run_cli("attack --mode spa --budgets 1..3 --models " + base + "/models" +
                    " --malware " + base + "/malware6.csv --episodes 200 --seed 4"
                    " --out " + base + "/attack_missing") != 0);  // missing file fails

    // build a proper malware csv over the reduced feature set
    std::ifstream reduced(dir.path / "ranked" / "reduced.csv");
    std::string reduced_header;
    std::getline(reduced, reduced_header);
    std::string malware_rows = reduced_header + "\n";
    while (std::getline(reduced, line)) {
        if (!line.empty() && line[0] == '1') malware_rows += line + "\n";
    }
    write_file(dir.path / "malware.csv", malware_rows);

    REQUIRE(run_cli("attack --mode spa --budgets 1..3 --models " + base + "/models" +
                    " --malware " + base + "/malware.csv --episodes 200 --seed 4 --out " +
                    base + "/attack") == 0);
    REQUIRE(fs::exists(dir.path / "attack" / "dt_SPA_b1.json"));
    REQUIRE(fs::exists(dir.path / "attack" / "lr_SPA_b3.json"));
    REQUIRE(fs::exists(dir.path / "attack" / "summary.csv"));
    REQUIRE(fs::exists(dir.path / "attack" / "policies" / "dt.json"));

    REQUIRE(run_cli("defend --models " + base + "/models --policies " + base +
                    "/attack/policies --train " + base + "/ranked/reduced.csv --test " +
                    base + "/ranked/reduced.csv --budgets 1..2 --modes spa --seed 5"
                    " --out " + base + "/defense") == 0);
    REQUIRE(fs::exists(dir.path / "defense" / "report.csv"));
    REQUIRE(fs::exists(dir.path / "defense" / "spa" / "models" / "dt.json"));
}

TEST_CASE("cli: ingest builds a labeled csv from manifests") {
    TempDir dir;
    write_file(dir.path / "manifests" / "a.xml",
               "<manifest><uses-permission android:name=\"P_A\"/></manifest>");
    write_file(dir.path / "manifests" / "b.xml",
               "<manifest><uses-permission android:name=\"P_B\"/>"
               "<uses-permission android:name=\"P_C\"/></manifest>");
    write_file(dir.path / "vocab.txt", "P_A\nP_B\nP_C\n");

    const std::string base = dir.path.string();
    REQUIRE(run_cli("ingest --label 1 --manifests " + base + "/manifests --vocab " +
                    base + "/vocab.txt --out " + base + "/malware.csv") == 0);
    std::ifstream in(dir.path / "malware.csv");
    std::string header, row1, row2;
    std::getline(in, header);
    std::getline(in, row1);
    std::getline(in, row2);
    CHECK(header == "label,P_A,P_B,P_C");
    CHECK(row1 == "1,1,0,0");
    CHECK(row2 == "1,0,1,1");
}

TEST_CASE("cli: pipeline with a config file and report re-emission") {
    TempDir dir;
    const std::string base = dir.path.string();
    write_file(dir.path / "config.json", R"({
        "dataset": {"synth": {"n_benign": 30, "n_malware": 30, "k": 5,
                               "informative": 3, "noise": 0.1, "seed": 2}},
        "feature_k": 5,
        "algorithms": ["DT"],
        "episodes": 200,
        "budgets": [1, 2],
        "modes": ["SPA"],
        "defense": false,
        "master_seed": 3,
        "n_folds": 3
    })");

    REQUIRE(run_cli("pipeline --config " + base + "/config.json --out " + base +
                    "/run") == 0);
    REQUIRE(fs::exists(dir.path / "run" / "manifest.json"));
    REQUIRE(run_cli("report --run " + base + "/run --format csv,svg") == 0);

    // exit code propagates failures
    CHECK(run_cli("pipeline --config " + base + "/missing.json") != 0);
    CHECK(run_cli("report --run " + base + "/run --format bogus") != 0);
}

TEST_CASE("cli: QEVADE_OUT prefixes relative output paths") {
    TempDir dir;
    std::string command = "QEVADE_OUT=" + dir.path.string() + " " + QEVADE_CLI_PATH +
                          " synth --benign 5 --malware 5 --features 3 --informative 2"
                          " --noise 0 --seed 1 --out nested/data.csv >/dev/null 2>&1";
    REQUIRE(std::system(command.c_str()) == 0);
    CHECK(fs::exists(dir.path / "nested" / "data.csv"));
}
