#pragma once

#include "frd/lattice.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace frd {

// Philox4x32-10 block: 128-bit counter, 64-bit key.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);
std::uint64_t splitmix64(std::uint64_t x);

// Standard normals keyed by (seed, sample, layer, channel, site). Channels 2m and 2m + 1
// share one counter through the two Box-Muller outputs. Inside the override box
// (|y|_inf <= override_radius) a second seed takes over, for coupling experiments.
class NoiseSource {
public:
    explicit NoiseSource(std::uint64_t seed) : seed_(seed) {}
    NoiseSource(std::uint64_t seed, std::uint64_t override_seed, int override_radius)
        : seed_(seed), override_seed_(override_seed), override_radius_(override_radius) {}

    std::uint64_t seed() const { return seed_; }
    // Both normals of a channel pair at a site.
    std::array<double, 2> pair(std::uint64_t sample, int layer, int channel_pair, const Site& y) const;
    double normal(std::uint64_t sample, int layer, int channel, const Site& y) const;

private:
    std::uint64_t seed_;
    std::uint64_t override_seed_ = 0;
    int override_radius_ = -1;
};

// One (layer, channel) convolution: f += sum_z coeff(z) xi(x - z).
struct SamplerStencil {
    int layer = 0;  // 0: t < 1 white-noise layer; k + 1: slice k of the bank
    int channel = 0;
    int radius = 0;  // l1 support
    std::vector<Site> offsets;
    std::vector<double> coeffs;  // sqrt(weight) q(z)
};

struct FieldSample {
    int d = 0;
    int side = 0;
    int lower = 0;  // core coordinates lower .. lower + side - 1 in every direction
    std::uint64_t seed = 0;
    std::uint64_t sample = 0;
    double t_max = 0.0;
    std::string grid;
    std::vector<double> values;  // x_0 fastest

    std::size_t index(const Site& x) const;
    Site coords(std::size_t i) const;
    double at(const Site& x) const { return values[index(x)]; }
};

class FieldSampler {
public:
    // Uses every slice of the bank with t < t_max; all of them must carry real-space kernels.
    FieldSampler(const SliceBank& bank, double t_max);

    int dim() const { return d_; }
    double t_max() const { return t_max_; }
    int layers() const { return layers_; }
    // Largest stencil support.
    int reach() const { return reach_; }
    const std::vector<SamplerStencil>& stencils() const { return stencils_; }
    // Var f(0) implied by the stencils (the truncated reconstruction at the origin).
    double variance() const;

    // Field on the core box of the given side centred at the origin.
    FieldSample sample_box(int side, std::uint64_t sample, const NoiseSource& noise) const;

private:
    int d_ = 0;
    double t_max_ = 0.0;
    int layers_ = 0;
    int reach_ = 0;
    std::string grid_;
    std::vector<SamplerStencil> stencils_;
};

// The same field evaluated at a few sites only, generating just the noise they see.
class PointSampler {
public:
    PointSampler(const FieldSampler& sampler, std::vector<Site> sites);

    const std::vector<Site>& sites() const { return sites_; }
    // Values at the sites; per_layer (optional) receives [layer][site] contributions.
    std::vector<double> evaluate(std::uint64_t sample, const NoiseSource& noise,
                                 std::vector<std::vector<double>>* per_layer = nullptr) const;

private:
    struct Group {
        int layer = 0, pair = 0;
        std::vector<Site> noise_sites;
    };
    struct Term {
        int group = 0, half = 0;  // which Box-Muller output
        int layer = 0;
        std::vector<std::vector<std::pair<std::size_t, double>>> taps;  // per site: (noise index, coeff)
    };
    const FieldSampler& sampler_;
    std::vector<Site> sites_;
    std::vector<Group> groups_;
    std::vector<Term> terms_;
};

struct CovarianceEstimate {
    Site lag;
    double value = 0.0;
    double stderr = 0.0;
};

// Cov(f(0), f(x)) over N samples with the delta-method standard error.
std::vector<CovarianceEstimate> estimate_covariance(const FieldSampler& sampler, const std::vector<Site>& lags,
                                                    std::uint64_t n_samples, std::uint64_t seed);

struct ProbeResult {
    bool origin_to_boundary = false;
    bool crossing = false;         // open cluster joining the two x_0 faces
    std::size_t largest_cluster = 0;
};

// Clusters of {f >= -level} on the core box by union-find over nearest-neighbour pairs.
ProbeResult percolation_probe(const FieldSample& sample, double level);

struct PercolationResult {
    double level = 0.0;
    int n = 0;
    std::uint64_t samples = 0;
    double theta = 0.0, theta_se = 0.0;
    double crossing = 0.0, crossing_se = 0.0;
    double largest_density = 0.0, largest_density_se = 0.0;
};

struct SweepConfig {
    std::vector<double> levels;   // increasing
    std::vector<int> box_sizes;
    std::uint64_t samples = 200;
    std::uint64_t seed = 1;
    int workers = 1;  // results do not depend on it
};

struct SweepOutput {
    std::vector<PercolationResult> results;  // box-major, levels inner
    // number of samples whose connectivity was not monotone in the level (must be 0)
    std::uint64_t monotonicity_violations = 0;
};

SweepOutput sweep_levels(const FieldSampler& sampler, const SweepConfig& cfg);

// Level window [lo, hi] around the rise of the crossing probability on one box, found with
// a cheap pilot sweep over the given coarse levels; widened by one coarse step on each side.
std::pair<double, double> transition_window(const FieldSampler& sampler, int box, const std::vector<double>& coarse,
                                            std::uint64_t samples, std::uint64_t seed, int workers = 1);

struct CrossingEstimate {
    bool found = false;
    double level = 0.0;   // where the two curves meet, linear interpolation
    double spread = 0.0;  // width of the level window where they agree within 2 SE
};

// First sign change of a(level) - b(level) across the grid.
CrossingEstimate curve_crossing(const std::vector<double>& levels, const std::vector<double>& a,
                                const std::vector<double>& sa, const std::vector<double>& b,
                                const std::vector<double>& sb);

struct MomentSummary {
    double mean = 0.0, variance = 0.0, skewness = 0.0, excess_kurtosis = 0.0;
};
MomentSummary moment_summary(const std::vector<double>& xs);

}  // namespace frd
