#include "frd/weights.hpp"

#include "frd/error.hpp"
#include "frd/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace frd {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> self_convolve(const std::vector<double>& a, double step) {
    std::vector<double> out(2 * a.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) continue;
        for (std::size_t j = 0; j < a.size(); ++j) out[i + j] += a[i] * a[j];
    }
    for (double& v : out) v *= step;
    return out;
}

}  // namespace

double BumpProfile::kappa_hat_at(double xi) const {
    return std::abs(xi) < h ? std::exp(-1.0 / (h * h - xi * xi)) : 0.0;
}

double BumpProfile::kappa_exact(double s) const {
    // kappa(s) = int kappa_hat(xi) cos(xi s) d xi, trapezoid (endpoints vanish)
    double sum = kappa_hat[n_grid];
    for (int i = 1; i < n_grid; ++i) sum += 2.0 * kappa_hat[n_grid + i] * std::cos(i * xi_step * s);
    return sum * xi_step;
}

double BumpProfile::phi_exact(double s) const {
    double k = kappa_exact(s);
    return k * k;
}

double BumpProfile::phi(double s) const {
    s = std::abs(s);
    if (s >= s_max) return 0.0;
    return std::max(0.0, interp_uniform(phi_table, s_step, s));
}

double BumpProfile::phi_sq_hat_at(double xi) const {
    xi = std::abs(xi);
    if (xi >= 4.0 * h) return 0.0;
    return std::max(0.0, interp_uniform(phi_sq_hat, xi_step, xi));
}

double BumpProfile::cprime(int k) const {
    if (k < 0) throw std::invalid_argument("cprime: k >= 0");
    if (k < static_cast<int>(cprime_values.size())) return cprime_values[k];
    double m = adaptive_simpson(
        [&](double s) {
            double v = phi_exact(s);
            return std::pow(s, 2 * k + 1) * v * v;
        },
        0.0, s_max, 1e-10);
    if (!(m > 0)) throw NumericalError("cprime: nonpositive moment");
    return 1.0 / m;
}

double BumpProfile::moment_tail(int k, double x) const {
    if (k < 0 || k >= static_cast<int>(moment_tails.size())) throw std::invalid_argument("moment_tail: k in {0, 1}");
    x = std::max(x, 0.0);
    if (x >= s_max) return 0.0;
    const auto& tab = moment_tails[k];
    std::size_t j = static_cast<std::size_t>(x / s_step);
    if (j + 1 >= tab.size()) return 0.0;
    const double b = (j + 1) * s_step;
    const GaussRule& g = gauss_legendre(4);
    double part = 0.0;
    for (int i = 0; i < 4; ++i) {
        double s = x + 0.5 * (b - x) * (g.x[i] + 1.0);
        double v = phi(s);
        part += g.w[i] * std::pow(s, 2 * k + 1) * v * v;
    }
    return tab[j + 1] + 0.5 * (b - x) * part;
}

std::shared_ptr<const BumpProfile> build_bump_profile(double h, int n_grid) {
    if (!(h > 0)) throw std::invalid_argument("build_bump_profile: h > 0");
    if (n_grid < 4096) throw std::invalid_argument("build_bump_profile: n_grid >= 4096");
    auto p = std::make_shared<BumpProfile>();
    p->h = h;
    p->n_grid = n_grid;
    p->xi_step = h / n_grid;
    p->kappa_hat.resize(2 * n_grid + 1);
    for (int i = -n_grid; i <= n_grid; ++i) p->kappa_hat[i + n_grid] = p->kappa_hat_at(i * p->xi_step);

    // Fourfold self-convolution: phi_hat = kh * kh, phi_sq_hat = phi_hat * phi_hat.
    std::vector<double> phi_hat = self_convolve(p->kappa_hat, p->xi_step);
    std::vector<double> full = self_convolve(phi_hat, p->xi_step);
    const std::size_t centre = 4 * static_cast<std::size_t>(n_grid);
    p->phi_sq_hat.assign(full.begin() + centre, full.end());
    double peak = p->phi_sq_hat[0];
    for (double v : full)
        if (v < -1e-12 * peak) throw NumericalError("build_bump_profile: phi^2 transform not nonnegative");
    p->phi_sq_hat.back() = 0.0;

    // phi = kappa^2 on a uniform s grid; cos(i dxi s) by rotation, resynced per block.
    p->s_step = 1.0 / (512.0 * h);
    const double kappa0 = p->kappa_exact(0.0);
    const double phi0 = kappa0 * kappa0;
    const double s_cap = 4000.0 / h;
    std::vector<double> table;
    double block_max = 0.0;
    for (long j = 0;; ++j) {
        double s = j * p->s_step;
        std::complex<double> rot = std::polar(1.0, p->xi_step * s);
        std::complex<double> cur = 1.0;
        double sum = p->kappa_hat[n_grid];
        for (int i = 1; i < n_grid; ++i) {
            if ((i & 255) == 0) cur = std::polar(1.0, i * p->xi_step * s);
            else cur *= rot;
            sum += 2.0 * p->kappa_hat[n_grid + i] * cur.real();
        }
        double k = sum * p->xi_step;
        table.push_back(k * k);
        block_max = std::max(block_max, k * k);
        long per_unit = static_cast<long>(std::llround(1.0 / p->s_step));
        if ((j + 1) % per_unit == 0) {
            if (s >= 4.0 / h && block_max < 1e-24 * phi0) break;
            if (s > s_cap) throw NumericalError("build_bump_profile: phi does not decay within cap");
            block_max = 0.0;
        }
    }
    p->phi_table = std::move(table);
    p->s_max = (p->phi_table.size() - 1) * p->s_step;
    for (int k = 0; k < 2; ++k) p->cprime_values.push_back(p->cprime(k));
    const GaussRule& g = gauss_legendre(4);
    const std::size_t n = p->phi_table.size();
    for (int k = 0; k < 2; ++k) {
        std::vector<double> tab(n, 0.0);
        for (std::size_t j = n - 1; j-- > 0;) {
            double cell = 0.0;
            for (int i = 0; i < 4; ++i) {
                double s = (j + 0.5 * (g.x[i] + 1.0)) * p->s_step;
                double v = p->phi(s);
                cell += g.w[i] * std::pow(s, 2 * k + 1) * v * v;
            }
            tab[j] = tab[j + 1] + 0.5 * p->s_step * cell;
        }
        p->moment_tails.push_back(std::move(tab));
    }
    return p;
}

std::shared_ptr<const BumpProfile> shared_bump_profile(double h, int n_grid) {
    static std::mutex mu;
    static std::map<std::pair<double, int>, std::shared_ptr<const BumpProfile>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(h, n_grid);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    auto p = build_bump_profile(h, n_grid);
    cache.emplace(key, p);
    return p;
}

double c0_constant(const BumpProfile& profile, double gamma) {
    double e = (2.0 - gamma) / gamma;
    double m = adaptive_simpson(
        [&](double s) {
            double v = profile.phi_exact(s);
            return std::pow(s, e) * v * v;
        },
        0.0, profile.s_max, 1e-10);
    if (!(m > 0)) throw NumericalError("c0_constant: nonpositive moment");
    return 1.0 / m;
}

std::vector<double> partial_fraction_coeffs(int p) {
    if (p < 1) throw std::invalid_argument("partial_fraction_coeffs: p >= 1");
    // 1 - cos x = (x^2/2) S(x^2), S(u) = sum_m (-1)^m 2 u^m / (2m+2)!
    std::vector<double> S(p, 0.0);
    double fact = 2.0;  // (2m+2)!
    for (int m = 0; m < p; ++m) {
        if (m > 0) fact *= (2.0 * m + 1.0) * (2.0 * m + 2.0);
        S[m] = (m % 2 == 0 ? 2.0 : -2.0) / fact;
    }
    // inverse series of S, then its p-th power
    std::vector<double> inv(p, 0.0);
    inv[0] = 1.0 / S[0];
    for (int n = 1; n < p; ++n) {
        double acc = 0.0;
        for (int k = 1; k <= n; ++k) acc += S[k] * inv[n - k];
        inv[n] = -acc / S[0];
    }
    std::vector<double> pw(p, 0.0);
    pw[0] = 1.0;
    for (int r = 0; r < p; ++r) {
        std::vector<double> next(p, 0.0);
        for (int i = 0; i < p; ++i)
            for (int j = 0; i + j < p; ++j) next[i + j] += pw[i] * inv[j];
        pw = std::move(next);
    }
    std::vector<double> a(p);
    for (int j = 0; j < p; ++j) {
        a[j] = std::ldexp(pw[j], p);
        if (a[j] < 0) throw NumericalError("partial_fraction_coeffs: negative coefficient");
    }
    return a;
}

std::string model_name(Model m) {
    switch (m) {
        case Model::Gff: return "gff";
        case Model::Membrane: return "membrane";
        case Model::ContinuumGff: return "continuum-gff";
        case Model::ContinuumMembrane: return "continuum-membrane";
    }
    return "unknown";
}

Model parse_model(const std::string& s) {
    if (s == "gff") return Model::Gff;
    if (s == "membrane") return Model::Membrane;
    if (s == "continuum-gff") return Model::ContinuumGff;
    if (s == "continuum-membrane") return Model::ContinuumMembrane;
    throw ConfigError("unknown model '" + s + "'");
}

double WeightParams::c() const { return std::pow(2.0 * B, gamma); }

WeightParams gff_params(int d) {
    WeightParams w;
    w.model = Model::Gff;
    w.d = d;
    w.p = 1;
    w.gamma = 1.0;
    w.B = 4.0 * d;
    w.pf_coeffs = partial_fraction_coeffs(1);
    w.alpha = d;
    return w;
}

WeightParams membrane_params(int d) {
    WeightParams w;
    w.model = Model::Membrane;
    w.d = d;
    w.p = 2;
    w.gamma = 0.5;
    w.B = 16.0 * d * d;
    w.pf_coeffs = partial_fraction_coeffs(2);
    w.alpha = 0.5 * d;
    return w;
}

WeightParams continuum_params(int d, int p) {
    WeightParams w;
    w.model = p == 1 ? Model::ContinuumGff : Model::ContinuumMembrane;
    w.d = d;
    w.p = p;
    w.gamma = 1.0 / p;
    w.B = 0.0;
    w.pf_coeffs = partial_fraction_coeffs(p);
    w.alpha = p == 1 ? d : 0.5 * d;
    return w;
}

WeightFamily::WeightFamily(WeightParams params, std::shared_ptr<const BumpProfile> profile)
    : WeightFamily(std::move(params), std::move(profile), Options{}) {}

WeightFamily::WeightFamily(WeightParams params, std::shared_ptr<const BumpProfile> profile, Options opt)
    : params_(std::move(params)), profile_(std::move(profile)), opt_(opt) {
    const int p = params_.p;
    if (static_cast<int>(params_.pf_coeffs.size()) != p)
        throw std::invalid_argument("WeightFamily: pf_coeffs size must equal p");
    prefactor_.resize(p);
    for (int j = 0; j < p; ++j)
        prefactor_[j] = profile_->cprime(p - j - 1) * params_.pf_coeffs[j] / (2.0 * params_.B);
    const double f0 = profile_->phi_sq_hat_at(0.0);
    wbar1_ = 0.0;
    for (int j = 0; j < p; ++j) wbar1_ += prefactor_[j] * f0;
    // Gamma = int_0^1 t^(2p-1) (wbar_t - wbar_1 / t) dt; below t = 1 only k = 0 survives.
    Gamma_ = adaptive_simpson(
        [&](double t) {
            double acc = 0.0;
            for (int j = 0; j < p; ++j) acc += prefactor_[j] * f0 * (std::pow(t, 2 * p - 2 * j - 2) - std::pow(t, 2 * p - 2));
            return acc;
        },
        0.0, 1.0, 1e-12);
    if (Gamma_ < -1e-14 * wbar1_) throw NumericalError("WeightFamily: negative Gamma");
    Gamma_ = std::max(Gamma_, 0.0);
}

double WeightFamily::channel_prefactor(int j) const { return prefactor_.at(j); }

std::vector<double> WeightFamily::raw_chebyshev(double t) const {
    if (t < 1.0) throw std::invalid_argument("chebyshev_coeffs: t >= 1");
    const int p = params_.p;
    double scale = 0.0;
    for (int j = 0; j < p; ++j) scale += prefactor_[j] * std::pow(t, -(2.0 * j + 1.0));
    int K = static_cast<int>(std::ceil(t)) - 1;
    std::vector<double> alpha(K + 1);
    for (int k = 0; k <= K; ++k) alpha[k] = scale * profile_->phi_sq_hat_at(k / t) * (k == 0 ? 1.0 : 2.0);
    return alpha;
}

std::vector<double> WeightFamily::chebyshev_coeffs(double t) const {
    std::vector<double> alpha = raw_chebyshev(t);
    while (alpha.size() > 1) {
        Poly m = chebyshev_to_monomial(alpha);
        std::size_t top = alpha.size() - 1;
        if (m.coeffs().size() == top + 1 && std::abs(m.coeffs()[top]) > Poly::kZeroTol * m.max_abs_coeff()) break;
        alpha.pop_back();
    }
    return alpha;
}

Poly WeightFamily::vt_unit(double t) const { return chebyshev_to_monomial(chebyshev_coeffs(t)); }

Poly WeightFamily::vt_polynomial(double t) const {
    check_nonneg(t);
    return poly_compose_affine(vt_unit(t), 1.0, -1.0 / c());
}

double WeightFamily::nonneg_margin(double t) const {
    std::vector<double> alpha = chebyshev_coeffs(t);
    double lo = 0.0, hi = 0.0;
    const int n = opt_.nonneg_grid;
    for (int i = 0; i < n; ++i) {
        double u = 1.0 - static_cast<double>(i) / (n - 1);  // mu from 0 to c
        // Clenshaw
        double b1 = 0.0, b2 = 0.0;
        for (std::size_t k = alpha.size(); k-- > 1;) {
            double b0 = alpha[k] + 2.0 * u * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        double v = alpha[0] + u * b1 - b2;
        if (i == 0) lo = hi = v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return lo / hi;
}

void WeightFamily::check_nonneg(double t) const {
    double m = nonneg_margin(t);
    if (m < -opt_.nonneg_tol)
        throw NumericalError("v_t nonnegativity violated at t = " + std::to_string(t) +
                             " (min/max = " + std::to_string(m) + ")");
}

double WeightFamily::wbar(double t, double lambda) const {
    if (t < 1.0) {
        double acc = 0.0;
        for (int j = 0; j < params_.p; ++j) acc += prefactor_[j] * std::pow(t, -(2.0 * j + 1.0));
        return acc * profile_->phi_sq_hat_at(0.0);
    }
    std::vector<double> alpha = raw_chebyshev(t);
    double u = 1.0 - std::pow(lambda / (2.0 * params_.B), params_.gamma);
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t k = alpha.size(); k-- > 1;) {
        double b0 = alpha[k] + 2.0 * u * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    return alpha[0] + u * b1 - b2;
}

double WeightFamily::iota(double t) const {
    const int p = params_.p;
    return 2.0 * p * (2.0 * p - 1.0) * (1.0 - t);
}

double WeightFamily::small_t_weight(double t) const {
    if (!(t > 0 && t < 1)) throw std::invalid_argument("small_t_weight: 0 < t < 1");
    return (wbar1_ + Gamma_ * iota(t)) / t;
}

double WeightFamily::w(double t, double lambda) const {
    return t < 1.0 ? small_t_weight(t) : wbar(t, lambda);
}

double WeightFamily::small_t_mass() const {
    // int_0^1 t^(2p-2) (wbar_1 + Gamma iota) dt, iota normalized against t^(2p-2)
    return wbar1_ / (2.0 * params_.p - 1.0) + Gamma_;
}

double WeightFamily::tail_mass(double lambda, double T) const {
    const int p = params_.p;
    // 1 - cos(theta) = eps; the half-angle form keeps theta accurate as eps -> 0
    const double eps = std::pow(lambda / (2.0 * params_.B), params_.gamma);
    const double theta = 2.0 * std::asin(std::sqrt(std::clamp(0.5 * eps, 0.0, 1.0)));
    const BumpProfile& prof = *profile_;
    double total = 0.0;
    for (int n = -2; n <= 2; ++n) {
        double tn = std::abs(theta - 2.0 * kPi * n);
        if (tn == 0.0) throw std::invalid_argument("tail_mass: lambda must be > 0");
        if (T * tn >= prof.s_max) continue;
        for (int j = 0; j < p; ++j) {
            int k = p - j - 1;
            total += prefactor_[j] * std::pow(tn, -(2.0 * p - 2.0 * j)) * prof.moment_tail(k, T * tn);
        }
    }
    return total;
}

double WeightFamily::sos_floor(double t) const {
    std::vector<double> alpha = chebyshev_coeffs(t);
    double top = 0.0;
    for (double a : alpha) top += a;  // v_t at mu = 0, its maximum
    return opt_.sos_floor_rel * top;
}

SosQuadruple WeightFamily::aj_unit(double t) const {
    if (t < 1.0) throw std::invalid_argument("aj_unit: t >= 1");
    check_nonneg(t);
    Poly s = vt_unit(t) + Poly::constant(sos_floor(t));
    return sos_decompose(s);
}

SosQuadruple WeightFamily::aj_family(double t) const {
    if (!(t > 0)) throw std::invalid_argument("aj_family: t > 0");
    SosQuadruple out;
    if (t < 1.0) {
        out.a1 = Poly::constant(std::sqrt(small_t_weight(t)));
        return out;
    }
    SosQuadruple u = aj_unit(t);
    const double cc = c();
    const double r = 1.0 / std::sqrt(cc);
    out.a1 = poly_compose_affine(u.a1, 1.0, -1.0 / cc);
    out.a2 = poly_compose_affine(u.a2, 1.0, -1.0 / cc);
    out.a3 = poly_compose_affine(u.a3, 1.0, -1.0 / cc) * r;
    out.a4 = poly_compose_affine(u.a4, 1.0, -1.0 / cc) * r;
    return out;
}

double wtilde(double lambda, double t, double gamma, const BumpProfile& profile, double c0) {
    return std::sqrt(c0) * profile.phi(std::pow(lambda, 0.5 * gamma) * t);
}

}  // namespace frd
