#pragma once

#include "frd/weights.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace frd {

constexpr const char* kVersion = "0.1.0";

// Exit codes of the command-line front end.
enum ExitCode { kExitPass = 0, kExitVerifyFail = 1, kExitConfig = 2, kExitNumerical = 3 };

struct Tolerances {
    double partition = 1e-3;
    double partition_continuum = 1e-6;
    double sos = 1e-8;
    double greens = 1e-2;
    double residual = 1e-6;
    double continuum = 2e-2;
    double leakage = 1e-6;
    double sampler_z = 3.0;
};

// Fully resolved run configuration: defaults <- config file <- flags.
struct RunConfig {
    Model model = Model::Gff;
    int d = 3;
    double h = 0.25;
    int t_max = 64;
    std::string grid = "unit";           // unit | log
    std::vector<int> grid_rule{3, 2, 1};  // unit grid Gauss points per interval band
    int grid_intervals = 128;            // log grid
    int lag_radius = 5;
    double keep_kernels_up_to = 16.0;
    bool spectral_only = false;
    std::uint64_t seed = 1;
    std::string cache_dir;
    std::string output_dir = "frd-out";
    int workers = 1;
    Tolerances tol;
    std::vector<std::string> checks;

    struct Sample {
        int box = 16;
        int count = 1;
        double t_max = 8.0;
    } sample;
    struct Percolate {
        std::vector<int> boxes{16};
        std::uint64_t samples = 200;
        double t_max = 8.0;
        std::vector<double> levels;  // absolute; empty: sigma grid below
        double sigma_lo = -3.0, sigma_hi = 3.0;
        int count = 25;
    } percolate;
    struct SamplerCheck {
        std::uint64_t samples = 50000;
        double t_max = 16.0;
    } sampler_check;
    struct PercolationCheck {
        std::uint64_t samples = 200;
        double t_max = 8.0;
    } percolation_check;
    int greens_radius = 5;
    std::vector<double> kernel_ts;  // export-kernels filter; empty: every stored kernel
    struct Continuum {
        double r_lo = 1.0, r_hi = 4.0;
        int n_r = 13;
    } continuum;

    bool discrete() const { return model == Model::Gff || model == Model::Membrane; }
    int p() const { return model == Model::Gff || model == Model::ContinuumGff ? 1 : 2; }
    double gamma() const { return 1.0 / p(); }

    nlohmann::json to_json() const;
    // Hash of everything that affects outputs (cache and output directories and workers excluded).
    std::string hash() const;
};

// Model-dependent defaults filled in, unknown keys and invalid values rejected with ConfigError.
RunConfig resolve_config(const nlohmann::json& user);

// Applies "a.b.c=value" to a JSON object; the value is parsed as JSON when possible.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Entry point of the frd executable.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace frd
