#pragma once

#include "frd/lattice.hpp"
#include "frd/weights.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace frd {

// pi^-d int_{[0,pi]^d} prod_i cos(k_i x_i) F(k) dk for many lags at once, where F may blow up
// like amp / |k|^(2p) at the origin. The leading term is subtracted with a Gaussian cutoff and
// added back in radial closed form; the remainder is integrated on dyadically graded cells.
struct SpectralRule {
    int order = 16;       // Gauss points per cell edge
    int levels = 30;      // dyadic shells towards k = 0
    double cutoff = 0.5;  // width of the Gaussian cutoff on the subtracted term
};

std::vector<double> lattice_spectral_integral(int d, const std::vector<Site>& xs,
                                              const std::function<double(const std::vector<double>&)>& F,
                                              double amp, int p, const SpectralRule& rule = {});

struct OracleValue {
    double value = 0.0;
    double error = 0.0;
};

// sigma(k) = sum_i 2 (1 - cos k_i), the symbol of M.
double stencil_symbol(const std::vector<double>& k);

class GreensOracle {
public:
    // Default orders: 16/12 for d = 3, 8/6 beyond.
    explicit GreensOracle(const ModelSpec& spec, int order = 0);

    const ModelSpec& spec() const { return spec_; }
    OracleValue value(const Site& x);
    std::map<Site, OracleValue> values(const std::vector<Site>& xs);

private:
    ModelSpec spec_;
    int order_;
    std::mutex mu_;
    std::map<Site, OracleValue> cache_;
};

OracleValue lattice_green(const ModelSpec& spec, const Site& x);

// (M^p G)(x) - delta_0(x) from oracle values; needs G on the radius + p neighbourhood.
double defining_residual(const ModelSpec& spec, GreensOracle& oracle, const Site& x);

struct RandomWalkEstimate {
    double value = 0.0;   // expected visits to 0 divided by 2d, with the large-n correction
    double stderr = 0.0;
    std::uint64_t steps = 0;
};

// Simple random walk on Z^d; walks of `length` steps until `total_steps` are used.
RandomWalkEstimate random_walk_green0(int d, std::uint64_t total_steps, int length, std::uint64_t seed);

// Exact beyond-T contribution to the reconstruction at each lag:
// pi^-d int cos(k.x) int_T^inf t^(2p-1) wbar_t(sigma(k)^p) dt dk.
// order 0 picks 16 for d <= 3 and 8 beyond.
std::vector<double> spectral_tail(const WeightFamily& family, const ModelSpec& spec, double T,
                                  const std::vector<Site>& xs, int order = 0);

struct PartitionReport {
    double max_error = 0.0;
    double worst_lambda = 0.0;
    std::vector<double> lambdas, errors;
};

// |lambda int t^(2p-1) w_t(lambda) dt - 1| over the grid: closed form below 1, Gauss per unit
// interval on [1, T_max], exact periodized tail beyond.
PartitionReport scalar_partition_check(const WeightFamily& family, const std::vector<double>& lambdas,
                                       int t_max = 64);
// Same identity for the continuum weights sqrt(c0) phi(lambda^(gamma/2) t), squared.
PartitionReport continuum_partition_check(const BumpProfile& profile, double gamma,
                                          const std::vector<double>& lambdas);

std::vector<double> log_lambda_grid(double lo, double hi, int n);

// F(L) with L = M^p on the periodic box (Z / side)^d by full eigendecomposition.
Eigen::MatrixXd dense_functional_calculus(const ModelSpec& spec, const std::function<double(double)>& F, int side);
// Periodic stencil matrix of M.
Eigen::MatrixXd periodic_stencil_matrix(int d, int side);
// Row-major index of a site on the periodic box, coordinates taken mod side.
std::size_t periodic_index(const Site& x, int side);

// x, value, error rows.
void write_oracle_csv(const std::string& path, const std::map<Site, OracleValue>& table);

}  // namespace frd
