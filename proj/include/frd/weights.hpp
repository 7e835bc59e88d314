#pragma once

#include "frd/poly.hpp"
#include "frd/sos.hpp"

#include <memory>
#include <string>
#include <vector>

namespace frd {

// Tabulated bump kappa_hat on [-h, h] and its derived transforms.
// Fourier convention: u_hat(xi) = (1/2pi) int u(x) e^{-i xi x} dx.
class BumpProfile {
public:
    double h = 0.0;
    int n_grid = 0;          // kappa_hat samples per half-width
    double xi_step = 0.0;    // h / n_grid
    std::vector<double> kappa_hat;    // xi = -h .. h, 2 n_grid + 1 samples
    std::vector<double> phi_sq_hat;   // xi = 0 .. 4h, 4 n_grid + 1 samples
    double s_step = 0.0;
    double s_max = 0.0;
    std::vector<double> phi_table;    // s = 0 .. s_max

    double kappa_hat_at(double xi) const;
    double kappa_exact(double s) const;
    double phi_exact(double s) const;
    // Cubic interpolation in the table; 0 beyond s_max.
    double phi(double s) const;
    double phi_sq_hat_at(double xi) const;

    // 1 / int_0^inf s^(2k+1) phi(s)^2 ds
    double cprime(int k) const;
    std::vector<double> cprime_values;  // precomputed c'_0, c'_1

    // int_x^inf s^(2k+1) phi(s)^2 ds for k = 0, 1 from cumulative cell tables.
    double moment_tail(int k, double x) const;
    std::vector<std::vector<double>> moment_tails;  // value at each s grid point
};

std::shared_ptr<const BumpProfile> build_bump_profile(double h, int n_grid = 4096);
// Process-wide memoized build.
std::shared_ptr<const BumpProfile> shared_bump_profile(double h, int n_grid = 4096);

// 1 / int_0^inf s^((2-gamma)/gamma) phi(s)^2 ds
double c0_constant(const BumpProfile& profile, double gamma);

// a_0..a_{p-1} of (1 - cos x)^(-p) = sum_n sum_j a_j (x - 2 pi n)^(-(2p-2j))
std::vector<double> partial_fraction_coeffs(int p);

enum class Model { Gff, Membrane, ContinuumGff, ContinuumMembrane };

std::string model_name(Model m);
Model parse_model(const std::string& s);

struct WeightParams {
    Model model = Model::Gff;
    int d = 3;
    int p = 1;           // 1 / gamma
    double gamma = 1.0;
    double B = 12.0;     // spectral bound of L
    std::vector<double> pf_coeffs;
    double alpha = 3.0;  // heat-kernel exponent metadata (d for gff, d/2 for membrane)

    double c() const;    // (2B)^gamma
};

WeightParams gff_params(int d);
WeightParams membrane_params(int d);
WeightParams continuum_params(int d, int p);

class WeightFamily {
public:
    struct Options {
        double sos_floor_rel = 2e-10;   // added to v_t before root finding; above the accepted negativity
        double nonneg_tol = 1e-10;
        int nonneg_grid = 2001;
    };

    WeightFamily(WeightParams params, std::shared_ptr<const BumpProfile> profile);
    WeightFamily(WeightParams params, std::shared_ptr<const BumpProfile> profile, Options opt);

    const WeightParams& params() const { return params_; }
    const BumpProfile& profile() const { return *profile_; }
    std::shared_ptr<const BumpProfile> profile_ptr() const { return profile_; }
    const Options& options() const { return opt_; }
    double c() const { return params_.c(); }

    // prefactor_j = (1/2B) c'_{p-j-1} a_j
    double channel_prefactor(int j) const;

    // Chebyshev coefficients of v_t in u = 1 - mu/c, k < t, trailing terms dropped
    // until the monomial leading coefficient is resolvable. t >= 1.
    std::vector<double> chebyshev_coeffs(double t) const;
    // All k < t, no truncation; the periodized weight exactly.
    std::vector<double> raw_chebyshev(double t) const;
    // v_t as a polynomial in u = 1 - mu/c.
    Poly vt_unit(double t) const;
    // v_t as a polynomial in mu.
    Poly vt_polynomial(double t) const;

    // Smallest value of v_t on [0, c] relative to its maximum (mu grid).
    double nonneg_margin(double t) const;
    void check_nonneg(double t) const;

    // Periodized weight from the Chebyshev form, lambda in [0, B].
    double wbar(double t, double lambda) const;
    // w_t(lambda) with the t < 1 repair.
    double w(double t, double lambda) const;
    double small_t_weight(double t) const;
    double wbar1() const { return wbar1_; }
    double Gamma() const { return Gamma_; }
    double iota(double t) const;
    // int_0^1 t^(2p-1) w_t dt
    double small_t_mass() const;
    // int_T^inf t^(2p-1) wbar_t(lambda) dt via the periodized representation.
    double tail_mass(double lambda, double T) const;

    // Certificate in u: v_t + floor = A1^2 + A2^2 + u (A3^2 + A4^2).
    SosQuadruple aj_unit(double t) const;
    // Certificate in mu: v_t = b1^2 + b2^2 + (c - mu)(b3^2 + b4^2); t < 1 gives (sqrt(w_t), 0, 0, 0).
    SosQuadruple aj_family(double t) const;
    double sos_floor(double t) const;

private:
    WeightParams params_;
    std::shared_ptr<const BumpProfile> profile_;
    Options opt_;
    std::vector<double> prefactor_;
    double wbar1_ = 0.0;
    double Gamma_ = 0.0;
};

// sqrt(c0) phi(lambda^(gamma/2) t) for the continuum family.
double wtilde(double lambda, double t, double gamma, const BumpProfile& profile, double c0);

}  // namespace frd
