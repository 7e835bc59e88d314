#pragma once

#include "frd/field.hpp"
#include "frd/lattice.hpp"
#include "frd/oracle.hpp"

#include "json.hpp"

#include <memory>
#include <string>
#include <vector>

namespace frd {

struct CheckResult {
    std::string id;
    std::string title;
    bool passed = false;
    double measured = 0.0;
    double threshold = 0.0;
    std::string detail;
    nlohmann::json data = nlohmann::json::object();
};

nlohmann::json to_json(const CheckResult& r);
std::string summary_line(const CheckResult& r);

// Declared l1 radius of a slice channel: the A channels reach floor((ceil t - 1) / 2),
// the R channels one further than floor((ceil t - 2) / 2).
int stated_channel_radius(double t, int channel);

CheckResult check_partition_discrete(const WeightFamily& family, int n_lambda = 50, int t_max = 64,
                                     double tol = 1e-3);
CheckResult check_partition_continuum(std::shared_ptr<const BumpProfile> profile, const std::vector<double>& gammas,
                                      int n_lambda = 50, double tol = 1e-6);
// v_t >= 0 on [0, c] for every t of the list; reports the first offending t.
CheckResult check_nonnegativity(const WeightFamily& family, const std::vector<double>& ts);
// Certificate residual on an n_lambda grid in [0, B] plus structural degree bounds.
CheckResult check_sos(const WeightFamily& family, const std::vector<double>& ts, int n_lambda = 1000,
                      double tol = 1e-8);
// Structural radius per channel and an exhaustive scan of every stored kernel value.
CheckResult check_finite_range(const SliceBank& bank);

struct GreensCheckOptions {
    int lag_radius = 5;
    double rel_tol = 1e-2;
    int residual_radius = 2;  // defining equation checked on |x|_inf <= this
    double residual_tol = 1e-6;
};
CheckResult check_greens(const SliceBank& bank, const WeightFamily& family, const GreensCheckOptions& opt = {});

struct DecayCheckOptions {
    double window_lo = 4.0, window_hi = 32.0;
    double slope_lo = -1.3, slope_hi = -0.7;
};
CheckResult check_decay(const SliceBank& bank, const WeightFamily& family, const DecayCheckOptions& opt = {});

struct ContinuumCheckOptions {
    int d = 3;
    double gamma = 1.0;
    double r_lo = 1.0, r_hi = 4.0;
    int n_r = 13;
    double rel_tol = 2e-2;
    double leakage_tol = 1e-6;
    std::vector<double> kernel_ts{1, 2, 4, 8, 16, 32, 64};
};
CheckResult check_continuum(std::shared_ptr<const BumpProfile> profile, const ContinuumCheckOptions& opt = {});

struct SamplerCheckOptions {
    double t_max = 16.0;
    int box = 16;
    std::uint64_t samples = 50000;
    std::uint64_t seed = 20240601;
    std::vector<Site> lags{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {1, 1, 0}};
    double z_max = 3.0;
};
CheckResult check_sampler(const SliceBank& bank, const SamplerCheckOptions& opt = {});

struct PercolationCheckOptions {
    double t_max = 8.0;
    std::vector<int> boxes{16, 32};
    std::uint64_t samples = 200;
    std::uint64_t seed = 7;
    int n_levels = 17;          // fine levels across the transition window
    double level_span = 2.0;    // pilot levels from -span sigma to +span sigma
    int pilot_levels = 33;
    std::uint64_t pilot_samples = 40;
    int coupling_box = 32;
    int coupling_radius = 4;
    int workers = 1;
};
CheckResult check_percolation(const SliceBank& bank, const PercolationCheckOptions& opt = {});

// Passes when some t of the list violates v_t >= 0; the discrete family built with a wide bump.
CheckResult check_negative_control(const WeightFamily& wide_family, const std::vector<double>& ts);

// t = 1, 1.25, ..., t_max together with the nodes of the unit scale grid.
std::vector<double> verification_ts(int t_max);

}  // namespace frd
