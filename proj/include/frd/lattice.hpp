#pragma once

#include "frd/poly.hpp"
#include "frd/weights.hpp"

#include <map>
#include <memory>
#include <optional>
#include <vector>

namespace frd {

struct ModelSpec {
    Model model = Model::Gff;
    int d = 3;
    int p = 1;
    double gamma = 1.0;
    double B = 12.0;
    double c = 24.0;   // (2B)^gamma
    double r0 = 0.0;   // sqrt(c - 4d), first R channel

    static ModelSpec make(Model model, int d);
    int channels() const { return 2 * d + 4; }
    WeightParams weight_params() const;
};

using Site = std::vector<int>;

// Dense values on the box [-R, R]^d, channel-major, x_0 fastest.
class LatticeField {
public:
    LatticeField() = default;
    LatticeField(int d, int m, int radius);
    static LatticeField delta(int d, int radius = 0);

    int dim() const { return d_; }
    int channels() const { return m_; }
    int radius() const { return R_; }
    int side() const { return 2 * R_ + 1; }
    std::size_t sites() const { return sites_; }
    int support() const { return support_; }
    void set_support(int s) { support_ = s; }

    bool contains(const Site& x) const;
    std::size_t index(const Site& x) const;
    Site coords(std::size_t idx) const;
    double value(int ch, const Site& x) const;  // 0 outside the box
    double& at(int ch, const Site& x) { return data_[ch * sites_ + index(x)]; }
    double* channel(int ch) { return data_.data() + ch * sites_; }
    const double* channel(int ch) const { return data_.data() + ch * sites_; }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    double norm2(int ch) const;
    double dot(const LatticeField& o) const;

private:
    int d_ = 0, m_ = 0, R_ = 0, support_ = -1;
    std::size_t sites_ = 0;
    std::vector<double> data_;
};

enum class StencilBasis { M, U };  // M = -Delta_d, U = I - M / c

// b(M) u (or b(U) u) by Horner in operator form on every channel. Output box radius
// defaults to u.support() + deg b; a smaller explicit radius that cannot hold the
// grown support throws.
LatticeField apply_stencil_poly(const ModelSpec& spec, const Poly& b, const LatticeField& u,
                                StencilBasis basis = StencilBasis::M, int out_radius = -1);
LatticeField apply_M(const ModelSpec& spec, const LatticeField& u);
// (R u) = (r0 u(x), u(x + e_i) + u(x)); u has one channel, result d + 1.
LatticeField apply_R(const ModelSpec& spec, const LatticeField& u);
LatticeField apply_R_adjoint(const ModelSpec& spec, const LatticeField& eta);

struct KernelSlice {
    double t = 0.0;
    LatticeField field;                 // m = 2d + 4
    std::vector<int> channel_support;   // l1 radius per channel
    int support = 0;
};

// Polynomials in U applied per channel group for a slice (t >= 1): A1, A2, A3 / sqrt(c), A4 / sqrt(c).
struct SlicePolys {
    double t = 0.0;
    double prefactor = 0.0;  // t^(p - 1/2)
    Poly g[4];
    double delta_value = 0.0;  // t < 1: channel 0 value at the origin
};

SlicePolys slice_polys(double t, const ModelSpec& spec, const WeightFamily& family);
KernelSlice kernel_slice(double t, const ModelSpec& spec, const WeightFamily& family);
KernelSlice kernel_slice(const SlicePolys& sp, const ModelSpec& spec);

// Lags with |x|_inf <= radius, one representative per {x, -x} pair.
std::vector<Site> lag_representatives(int d, int radius);
Site canonical_lag(const Site& x);
// sum_channels sum_y q(y) q(y + x)
double slice_autocorrelation(const KernelSlice& s, const Site& x);
// Per-channel squared norms from spectral moments of U (no real-space kernel).
std::vector<double> spectral_channel_norms(const SlicePolys& sp, const ModelSpec& spec);

struct ScaleNode {
    double t = 0.0;
    double weight = 0.0;
    int interval = 0;  // n with t in [n, n + 1)
};

struct ScaleGrid {
    std::vector<ScaleNode> nodes;  // t >= 1 only; t < 1 handled in closed form
    double t_max = 0.0;
    std::vector<int> nodes_per_interval;  // unit grid rule (empty for log grids)
    bool unit = true;
};

// Gauss-Legendre nodes on each [n, n+1), n = 1..T_max-1. rule = {g for n < 4, g for n < 16, g beyond}.
ScaleGrid unit_scale_grid(int t_max, std::vector<int> rule = {3, 2, 1});
// Log-uniform composite Simpson on [1, T_max], n_intervals even.
ScaleGrid log_scale_grid(double t_max, int n_intervals);

struct SliceRecord {
    double t = 0.0, weight = 0.0;
    int interval = 0;
    int support = 0;
    std::vector<int> channel_support;
    std::vector<double> channel_norm2;
    std::vector<double> lag_values;  // aligned with SliceBank::lags
    std::shared_ptr<const KernelSlice> kernel;
    std::shared_ptr<const SlicePolys> polys;
};

struct SliceBankOptions {
    int lag_radius = 5;           // autocorrelation lags |x|_inf <= lag_radius
    double keep_kernels_up_to = 0.0;  // retain real-space kernels with t <= this
    // norms from spectral moments, no lags; real-space kernels only up to keep_kernels_up_to
    bool spectral_only = false;
};

struct SliceBank {
    ModelSpec spec;
    ScaleGrid grid;
    std::vector<Site> lags;
    std::vector<SliceRecord> slices;
    double small_t_mass = 0.0;    // int_0^1 t^(2p-1) w_t dt
    double small_t_value = 0.0;   // used by the sampler's t < 1 layer (std dev)
    std::map<Site, std::size_t> lag_index;

    double max_support() const;
};

SliceBank build_slice_bank(const ModelSpec& spec, const WeightFamily& family, const ScaleGrid& grid,
                           const SliceBankOptions& opt = {});

struct GreensValue {
    double value = 0.0;
    double error = 0.0;
    double quadrature = 0.0;
    double tail = 0.0;
    double fitted_tail = 0.0;  // power-law extrapolation of the late slices, diagnostic
};

struct GreensOptions {
    bool include_tail = true;
    double tolerance = 0.0;  // > 0: throw if the error estimate exceeds it
    // Beyond-T contribution per canonical lag (e.g. from spectral_tail); when present it
    // replaces the power-law extrapolation, whose distance to it then enters the error only
    // through exact_tail_error.
    std::map<Site, double> exact_tail;
    double exact_tail_error = 0.0;
};

// L^2 decay exponent of the slice integrand at fixed lag: -(alpha + gamma - 2)/gamma.
double integrand_decay_exponent(const ModelSpec& spec);

std::map<Site, GreensValue> greens_reconstruct(const SliceBank& bank, const std::vector<Site>& xs,
                                               const GreensOptions& opt = {});

// Flattened scalar kernel: channel cycling within each unit interval, time dilation 2,
// offset t0. frak_q(x, T) = 2^(-1/2) sqrt(K) e_j . q_tau(x).
class ScalarKernel {
public:
    struct Piece {
        int interval = 0;
        int channel = 0;
        double tau = 0.0;
    };

    ScalarKernel(const ModelSpec& spec, std::shared_ptr<const WeightFamily> family, double offset);

    static constexpr double kDilation = 2.0;
    int cycle() const { return spec_.channels(); }
    double offset() const { return offset_; }
    std::optional<Piece> locate(double T) const;
    // T where piece (n, j) begins.
    double piece_start(int n, int j) const;
    double value(const Site& x, double T) const;

    // Smallest offset such that every piece of the bank fits |x| <= T/2 with lattice
    // values spread over unit cells.
    static double data_offset(const SliceBank& bank);

private:
    ModelSpec spec_;
    std::shared_ptr<const WeightFamily> family_;
    double offset_;
};

// Per-piece masses int ||frak_q(., T)||^2 dT from the bank (equal to the unit-interval
// channel integrals), ordered by piece start; entry n = 0 holds the t < 1 mass.
struct FlatMassProfile {
    std::vector<double> starts;  // piece start T
    std::vector<double> masses;  // mass of the piece
};

FlatMassProfile flat_mass_profile(const SliceBank& bank, double offset);
// T -> int_T^{T_end} ||frak_q||^2 at piece boundaries.
std::vector<std::pair<double, double>> flat_tail_curve(const FlatMassProfile& prof, double tail_beyond);

}  // namespace frd
