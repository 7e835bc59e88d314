#include "frd/continuum.hpp"

#include "frd/error.hpp"
#include "frd/quadrature.hpp"

#include <boost/math/special_functions/bessel.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <tuple>

namespace frd {

namespace {

constexpr double kPi = std::numbers::pi;

double sphere_area(int d) { return 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d); }

// z^(1 - d/2) J_{d/2 - 1}(z), the radial plane-wave average up to (2 pi)^(d/2)
double radial_wave(int d, double z) {
    const double nu = 0.5 * d - 1.0;
    const double at0 = 1.0 / (std::pow(2.0, nu) * std::tgamma(0.5 * d));
    if (z < 1e-6) return at0 * (1.0 - z * z / (2.0 * d));
    const double r2pi = std::sqrt(2.0 / kPi);
    if (d == 3) return r2pi * std::sin(z) / z;
    if (d == 5) {
        if (z < 0.1) {
            double z2 = z * z;
            return r2pi * (1.0 / 3.0 - z2 / 30.0 + z2 * z2 / 840.0 - z2 * z2 * z2 / 45360.0);
        }
        return r2pi * (std::sin(z) - z * std::cos(z)) / (z * z * z);
    }
    if (d % 2 == 1) {
        const unsigned n = static_cast<unsigned>((d - 3) / 2);
        return r2pi * boost::math::sph_bessel(n, z) / std::pow(z, static_cast<double>(n));
    }
    return boost::math::cyl_bessel_j(nu, z) / std::pow(z, nu);
}

double radial_wave_origin(int d) { return 1.0 / (std::pow(2.0, 0.5 * d - 1.0) * std::tgamma(0.5 * d)); }

// Gauss panels short enough to hold a quarter oscillation of the wave at rho.
struct Panels {
    std::vector<double> s, w;
};

Panels oscillation_panels(double rho, double s_max) {
    const GaussRule& g = gauss_legendre(8);
    const double width = std::min(0.5, kPi / (4.0 * std::max(rho, 1e-12)));
    const int n = static_cast<int>(std::ceil(s_max / width));
    const double h = s_max / n;
    Panels p;
    p.s.reserve(8 * n);
    p.w.reserve(8 * n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < 8; ++i) {
            p.s.push_back(h * (k + 0.5 * (g.x[i] + 1.0)));
            p.w.push_back(0.5 * h * g.w[i]);
        }
    return p;
}

}  // namespace

double radial_inverse_transform(const std::function<double(double)>& f, int d, double rho, double s_max) {
    if (d < 1) throw std::invalid_argument("radial_inverse_transform: d >= 1");
    Panels p = oscillation_panels(rho, s_max);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.s.size(); ++i)
        acc += p.w[i] * f(p.s[i]) * std::pow(p.s[i], d - 1) * radial_wave(d, p.s[i] * rho);
    return std::pow(2.0 * kPi, -0.5 * d) * acc;
}

double RadialShape::value(double rho) const {
    rho = std::abs(rho);
    if (rho > step * (values.size() - 1)) return 0.0;
    return interp_uniform(values, step, rho);
}

std::shared_ptr<const RadialShape> radial_shape(std::shared_ptr<const BumpProfile> profile, int d, int power,
                                                double rho_max, int per_unit) {
    if (!profile) throw std::invalid_argument("radial_shape: null profile");
    if (power < 1 || d < 1 || per_unit < 1 || !(rho_max > 0))
        throw std::invalid_argument("radial_shape: bad arguments");
    using Key = std::tuple<const BumpProfile*, int, int, double, int>;
    static std::mutex mu;
    static std::map<Key, std::shared_ptr<const RadialShape>> cache;
    Key key{profile.get(), d, power, rho_max, per_unit};
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    auto sh = std::make_shared<RadialShape>();
    sh->d = d;
    sh->power = power;
    sh->step = 1.0 / per_unit;
    sh->support = 2.0 * profile->h * power;
    const BumpProfile& prof = *profile;
    auto f = [&](double s) { return std::pow(prof.phi(s), power); };
    const int n = static_cast<int>(std::lround(rho_max * per_unit));
    sh->values.resize(n + 1);
    for (int i = 0; i <= n; ++i) sh->values[i] = radial_inverse_transform(f, d, i * sh->step, prof.s_max);
    // moments for the small-rho expansion
    Panels p = oscillation_panels(0.0, prof.s_max);
    double m0 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < p.s.size(); ++i) {
        double v = p.w[i] * f(p.s[i]) * std::pow(p.s[i], d - 1);
        m0 += v;
        m2 += v * p.s[i] * p.s[i];
    }
    const double norm = std::pow(2.0 * kPi, -0.5 * d) * radial_wave_origin(d);
    sh->at_origin = norm * m0;
    sh->curvature_at_origin = -norm * m2 / d;
    std::lock_guard<std::mutex> lock(mu);
    cache.emplace(key, sh);
    return sh;
}

double RadialKernel::value(double r) const {
    r = std::abs(r);
    if (r > r_max()) return 0.0;
    return interp_uniform(values, r_step, r);
}

double RadialKernel::max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

double RadialKernel::leakage() const {
    const double m = max_abs();
    if (m == 0.0) return 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (i * r_step > support * (1.0 + 1e-12)) worst = std::max(worst, std::abs(values[i]));
    return worst / m;
}

double RadialKernel::half_radius() const {
    const double half = 0.5 * max_abs();
    for (std::size_t i = 1; i < values.size(); ++i)
        if (std::abs(values[i]) < half) {
            double a = std::abs(values[i - 1]), b = std::abs(values[i]);
            return r_step * ((i - 1) + (a - half) / (a - b));
        }
    throw NumericalError("half_radius: kernel never drops below half its maximum");
}

double RadialKernel::l2_norm2() const {
    // composite Simpson on the table; an odd point count is guaranteed by the 4t / 512 grid
    std::size_t n = values.size() - 1;
    if (n % 2) --n;
    double acc = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        double r = i * r_step;
        double f = std::pow(r, d - 1) * values[i] * values[i];
        acc += f * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
    }
    return sphere_area(d) * acc * r_step / 3.0;
}

RadialKernel radial_kernel(double t, int d, double gamma, std::shared_ptr<const BumpProfile> profile) {
    if (!(t > 0)) throw std::invalid_argument("radial_kernel: t > 0");
    if (d < 3) throw std::invalid_argument("radial_kernel: d >= 3");
    if (!(gamma > 0)) throw std::invalid_argument("radial_kernel: gamma > 0");
    auto shape = radial_shape(profile, d, 1);
    const double c0 = c0_constant(*profile, gamma);
    const double amp = std::pow(t, (2.0 - gamma) / (2.0 * gamma)) * std::sqrt(c0) * std::pow(t, -d);
    RadialKernel k;
    k.t = t;
    k.d = d;
    k.gamma = gamma;
    k.r_step = t * shape->step;
    k.support = t * shape->support;
    k.values.resize(shape->values.size());
    for (std::size_t i = 0; i < k.values.size(); ++i) k.values[i] = amp * shape->values[i];
    return k;
}

Mollifier::Mollifier(int dim, double r) : d(dim), radius(r) {
    if (!(r > 0) || d < 1) throw std::invalid_argument("Mollifier: radius > 0, d >= 1");
    // int_{|x|<eps} (1 - |x|^2/eps^2)^4 = |S^{d-1}| eps^d B(d/2, 5) / 2
    norm = 1.0 / (sphere_area(d) * std::pow(r, d) * 0.5 * std::beta(0.5 * d, 5.0));
}

double Mollifier::value(double r) const {
    r = std::abs(r);
    if (r >= radius) return 0.0;
    double u = 1.0 - (r * r) / (radius * radius);
    return norm * u * u * u * u;
}

std::vector<double> radial_convolve(const std::vector<double>& f, const std::vector<double>& g, double step, int d,
                                    std::size_t out_points) {
    if (f.empty() || g.empty() || !(step > 0)) throw std::invalid_argument("radial_convolve: empty table");
    std::vector<double> out(out_points, 0.0);
    const double gmax = step * (g.size() - 1);
    auto gv = [&](double s) { return s > gmax ? 0.0 : interp_uniform(g, step, s); };
    if (d == 3) {
        // (f * g)(r) = (2 pi / r) int rho f(rho) int_{|r - rho|}^{r + rho} s g(s) ds d rho
        std::vector<double> cum(g.size() + 1, 0.0);  // int_0^{i step} s g(s) ds, Simpson per cell
        for (std::size_t i = 0; i + 1 < g.size(); ++i) {
            double a = i * step, b = a + step, m = a + 0.5 * step;
            cum[i + 1] = cum[i] + step / 6.0 * (a * g[i] + 4.0 * m * gv(m) + b * g[i + 1]);
        }
        cum[g.size()] = cum[g.size() - 1];
        auto G = [&](double s) {
            if (s >= gmax) return cum[g.size() - 1];
            std::size_t i = static_cast<std::size_t>(s / step);
            double a = i * step;
            double m = 0.5 * (a + s);
            return cum[i] + (s - a) / 6.0 * (a * g[i] + 4.0 * m * gv(m) + s * gv(s));
        };
        for (std::size_t k = 0; k < out_points; ++k) {
            const double r = k * step;
            double acc = 0.0;
            if (k == 0) {
                for (std::size_t i = 0; i < f.size(); ++i) {
                    double rho = i * step;
                    double w = (i == 0 || i + 1 == f.size()) ? 0.5 : 1.0;
                    acc += w * rho * rho * f[i] * gv(rho);
                }
                out[k] = 4.0 * kPi * acc * step;
                continue;
            }
            for (std::size_t i = 0; i < f.size(); ++i) {
                double rho = i * step;
                double w = (i == 0 || i + 1 == f.size()) ? 0.5 : 1.0;
                acc += w * rho * f[i] * (G(r + rho) - G(std::abs(r - rho)));
            }
            out[k] = 2.0 * kPi / r * acc * step;
        }
        return out;
    }
    // general d: angular average by Gauss in theta
    const GaussRule& gl = gauss_legendre(24);
    const double ang = sphere_area(d - 1);
    for (std::size_t k = 0; k < out_points; ++k) {
        const double r = k * step;
        double acc = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            double rho = i * step;
            double w = (i == 0 || i + 1 == f.size()) ? 0.5 : 1.0;
            double inner = 0.0;
            for (std::size_t j = 0; j < gl.x.size(); ++j) {
                double th = 0.5 * kPi * (gl.x[j] + 1.0);
                double s = std::sqrt(std::max(0.0, r * r + rho * rho - 2.0 * r * rho * std::cos(th)));
                inner += 0.5 * kPi * gl.w[j] * gv(s) * std::pow(std::sin(th), d - 2);
            }
            acc += w * std::pow(rho, d - 1) * f[i] * inner;
        }
        out[k] = ang * acc * step;
    }
    return out;
}

RadialKernel mollify(const RadialKernel& kernel, const Mollifier& eta) {
    if (eta.d != kernel.d) throw std::invalid_argument("mollify: dimension mismatch");
    if (eta.radius < 4.0 * kernel.r_step) throw std::invalid_argument("mollify: mollifier narrower than four grid steps");
    std::size_t n = static_cast<std::size_t>(std::ceil(eta.radius / kernel.r_step)) + 1;
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = eta.value(i * kernel.r_step);
    RadialKernel out = kernel;
    out.values = radial_convolve(kernel.values, e, kernel.r_step, kernel.d, kernel.values.size());
    out.support = kernel.support + eta.radius;
    return out;
}

double kernel_autocorrelation(double t, int d, double gamma, double c0, const RadialShape& sq_shape, double r) {
    return c0 * std::pow(t, (2.0 - gamma) / gamma - d) * sq_shape.value(r / t);
}

std::map<double, ContinuumGreensValue> continuum_reconstruct(int d, double gamma,
                                                             std::shared_ptr<const BumpProfile> profile,
                                                             const std::vector<double>& rs,
                                                             const ContinuumOptions& opt) {
    const double e = (2.0 - gamma) / gamma - d;  // t exponent of the autocorrelation at fixed r
    if (!(e < -1.0)) throw std::invalid_argument("continuum_reconstruct: needs d > 2 / gamma");
    if (opt.intervals < 2 || opt.intervals % 2) throw std::invalid_argument("continuum_reconstruct: even interval count");
    auto sq = radial_shape(profile, d, 2);
    const double c0 = c0_constant(*profile, gamma);
    const double T = opt.t_max;
    std::map<double, ContinuumGreensValue> out;
    for (double r : rs) {
        if (!(r > 0)) throw std::invalid_argument("continuum_reconstruct: r > 0");
        const double t_lo = r / sq->support;  // below this the autocorrelation vanishes
        if (!(t_lo < T)) throw std::invalid_argument("continuum_reconstruct: r beyond the reach of t_max");
        const int n = opt.intervals;
        const double du = std::log(T / t_lo) / n;
        double simpson = 0.0, trap = 0.0;
        for (int i = 0; i <= n; ++i) {
            double t = t_lo * std::exp(i * du);
            double f = t * kernel_autocorrelation(t, d, gamma, c0, *sq, r);
            bool end = i == 0 || i == n;
            simpson += f * (end ? 1.0 : (i % 2 ? 4.0 : 2.0));
            trap += f * (end ? 0.5 : 1.0);
        }
        simpson *= du / 3.0;
        trap *= du;
        ContinuumGreensValue v;
        v.quadrature = simpson;
        // K2(r/t) ~ K2(0) + K2''(0) (r/t)^2 / 2 beyond T
        const double lead = c0 * sq->at_origin * std::pow(T, e + 1.0) / (-e - 1.0);
        const double next = c0 * 0.5 * sq->curvature_at_origin * r * r * std::pow(T, e - 1.0) / (1.0 - e);
        v.tail = lead + next;
        v.value = v.quadrature + v.tail;
        v.error = std::abs(simpson - trap) + std::abs(next) * (r / T) * (r / T);
        out[r] = v;
    }
    return out;
}

double continuum_green(int d, int p, double r) {
    if (d <= 2 * p) throw std::invalid_argument("continuum_green: d > 2p");
    if (!(r > 0)) throw std::invalid_argument("continuum_green: r > 0");
    return std::tgamma(0.5 * d - p) / (std::pow(4.0, p) * std::pow(kPi, 0.5 * d) * std::tgamma(static_cast<double>(p))) *
           std::pow(r, 2.0 * p - d);
}

}  // namespace frd
