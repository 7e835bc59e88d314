#include "frd/cli.hpp"
#include "frd/error.hpp"
#include "frd/io.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace frd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Sandbox {
    fs::path root;
    Sandbox() {
        std::random_device rd;
        root = fs::temp_directory_path() / ("frd-cli-" + std::to_string(rd()));
        fs::create_directories(root);
    }
    ~Sandbox() { fs::remove_all(root); }
    std::string cache() const { return (root / "cache").string(); }
    std::string out() const { return (root / "out").string(); }
};

struct Outcome {
    int code = 0;
    std::string out, err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "frd");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    Outcome o;
    o.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
}

std::vector<std::string> small(const Sandbox& sb, std::vector<std::string> extra) {
    std::vector<std::string> a{"--t-max", "8", "--cache-dir", sb.cache(), "--output-dir", sb.out(), "--set", "lag_radius=2"};
    a.insert(a.begin(), extra.begin(), extra.end());
    return a;
}

std::string read(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

fs::path only_file(const std::string& dir, const std::string& prefix, const std::string& ext) {
    fs::path found;
    int n = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.rfind(prefix, 0) == 0 && e.path().extension() == ext && name.find("manifest") == std::string::npos) {
            found = e.path();
            ++n;
        }
    }
    REQUIRE(n == 1);
    return found;
}

}  // namespace

TEST_CASE("configuration validation") {
    CHECK(resolve_config(json::object()).d == 3);
    CHECK_THROWS_AS(resolve_config({{"model", "ising"}}), ConfigError);
    CHECK_THROWS_AS(resolve_config({{"d", 2}}), ConfigError);
    CHECK_THROWS_AS(resolve_config({{"model", "membrane"}, {"d", 4}}), ConfigError);
    CHECK_THROWS_AS(resolve_config({{"d", 7}}), ConfigError);
    CHECK_THROWS_AS(resolve_config({{"unknown_key", 1}}), ConfigError);
    CHECK_THROWS_AS(resolve_config({{"tolerances", {{"sos", -1.0}}}}), ConfigError);

    RunConfig m = resolve_config({{"model", "membrane"}, {"d", 5}});
    CHECK(m.spectral_only);
    CHECK(std::find(m.checks.begin(), m.checks.end(), "greens") == m.checks.end());

    // the hash ignores where things are written and how many threads run
    RunConfig a = resolve_config({{"output_dir", "x"}, {"workers", 3}});
    RunConfig b = resolve_config({{"output_dir", "y"}});
    CHECK(a.hash() == b.hash());
    CHECK(a.hash() != resolve_config({{"seed", 2}}).hash());

    json doc = json::object();
    apply_override(doc, "percolate.boxes=[8,12]");
    apply_override(doc, "model=gff");
    CHECK(doc["percolate"]["boxes"] == json::array({8, 12}));
    CHECK(doc["model"] == "gff");
    CHECK_THROWS(apply_override(doc, "no-equals-sign"));
}

TEST_CASE("exit codes for bad input") {
    Sandbox sb;
    CHECK(run({"--version"}).code == kExitPass);
    CHECK(run({"build", "--model", "ising", "--cache-dir", sb.cache()}).code == kExitConfig);
    CHECK(run({"build", "--bogus"}).code == kExitConfig);
    CHECK(run(small(sb, {"sample", "--set", "sample.t_max=12"})).code == kExitConfig);
}

TEST_CASE("build uses the cache and recovers from damage") {
    Sandbox sb;
    Outcome first = run(small(sb, {"build"}));
    REQUIRE(first.code == kExitPass);
    CHECK(first.out.find("cache bank built") != std::string::npos);
    Outcome second = run(small(sb, {"build"}));
    CHECK(second.out.find("cache bank hit") != std::string::npos);

    fs::path bank = only_file(sb.cache(), "bank-", ".bin");
    {
        std::fstream f(bank, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(64);
        f.put('\x7f');
    }
    Outcome third = run(small(sb, {"build"}));
    CHECK(third.code == kExitPass);
    CHECK(third.out.find("cache bank rebuilt") != std::string::npos);
    CHECK(fs::exists(bank.string() + ".json"));
}

TEST_CASE("verify reports the first negative weight of a wide bump") {
    Sandbox sb;
    const std::string report = (sb.root / "report.json").string();
    Outcome o = run({"--half-width", "0.5", "--t-max", "12", "--cache-dir", sb.cache(), "--output-dir", sb.out(),
                     "verify", "--checks", "nonnegativity,sos", "--report", report});
    CHECK(o.code == kExitVerifyFail);
    json r = json::parse(read(report));
    CHECK(r["schema"] == "frd-verify/1");
    CHECK(r["passed"] == false);
    CHECK(r["h"] == 0.5);
    REQUIRE(r["checks"].size() == 1);
    CHECK(r["checks"][0]["id"] == "nonnegativity");
    CHECK(r["checks"][0]["passed"] == false);
    CHECK(r["checks"][0]["detail"].get<std::string>().find("10.2113") != std::string::npos);
    REQUIRE(r["skipped"].size() == 1);
    CHECK(r["skipped"][0]["id"] == "sos");
}

TEST_CASE("verify passes the structural checks on a small bank") {
    Sandbox sb;
    const std::string report = (sb.root / "report.json").string();
    Outcome o = run(small(sb, {"verify", "--checks", "partition,nonnegativity,sos,finite-range",
                               "--report", report}));
    CHECK(o.code == kExitPass);
    json r = json::parse(read(report));
    CHECK(r["passed"] == true);
    CHECK(r["checks"].size() == 4);
    for (const auto& c : r["checks"]) CHECK(c["passed"] == true);
    CHECK(r["config_hash"].get<std::string>().size() == 64);
}

TEST_CASE("sample and percolate are reproducible") {
    Sandbox sb;
    auto sample_args = small(sb, {"--seed", "9", "sample", "--box", "6", "--count", "2"});
    REQUIRE(run(sample_args).code == kExitPass);
    fs::path csv = only_file(sb.out(), "sample-", ".csv");
    const std::string first = read(csv);
    sample_args.insert(sample_args.begin(), {"--workers", "2"});
    REQUIRE(run(sample_args).code == kExitPass);
    CHECK(read(csv) == first);
    CHECK(first.rfind("sample,x1,x2,x3,value\n", 0) == 0);
    CHECK(std::count(first.begin(), first.end(), '\n') == 1 + 2 * 216);

    auto perc_args = small(sb, {"--set", "percolate.count=7", "percolate", "--boxes", "6", "--samples", "12"});
    REQUIRE(run(perc_args).code == kExitPass);
    fs::path pcsv = only_file(sb.out(), "percolate-", ".csv");
    const std::string p1 = read(pcsv);
    REQUIRE(run(perc_args).code == kExitPass);
    CHECK(read(pcsv) == p1);
    std::istringstream lines(p1);
    std::string line, last;
    std::getline(lines, line);
    CHECK(line == "level,n,theta,theta_se,crossing,crossing_se,largest_density,largest_density_se,samples");
    while (std::getline(lines, line)) last = line;
    // the top level is three standard deviations: the origin is almost surely connected out
    std::vector<double> cols;
    std::stringstream ss(last);
    for (std::string cell; std::getline(ss, cell, ',');) cols.push_back(std::stod(cell));
    REQUIRE(cols.size() == 9);
    CHECK(cols[2] >= 0.9);
}

TEST_CASE("exports") {
    Sandbox sb;
    REQUIRE(run(small(sb, {"--set", "greens.radius=1", "export-greens"})).code == kExitPass);
    const std::string g = read(only_file(sb.out(), "greens-", ".csv"));
    CHECK(g.rfind("x1,x2,x3,reconstructed,reconstructed_error,quadrature,tail,oracle,oracle_error\n", 0) == 0);
    REQUIRE(run(small(sb, {"export-kernels"})).code == kExitPass);
    const std::string k = read(only_file(sb.out(), "kernels-", ".csv"));
    CHECK(k.rfind("t,channel,x1,x2,x3,value\n", 0) == 0);
    CHECK(run(small(sb, {"export-kernels", "--t", "100"})).code == kExitConfig);
}
