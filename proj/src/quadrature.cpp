#include "frd/quadrature.hpp"

#include "frd/error.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace frd {

GaussRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1");
    static std::mutex mu;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(n); it != cache.end()) return it->second;
    GaussRule g;
    g.x.resize(n);
    g.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) { p1 = z; p0 = 1.0; }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // recompute derivative at the converged node
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        if (n == 1) p0 = 1.0;
        dp = n * (z * p1 - p0) / (z * z - 1.0);
        g.x[i] = -z;
        g.x[n - 1 - i] = z;
        g.w[i] = g.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    if (n == 1) { g.x[0] = 0.0; g.w[0] = 2.0; }
    cache.emplace(n, g);
    return g;
}

namespace {

struct Simpson {
    const std::function<double(double)>& f;
    double tol_abs;
    int max_depth;

    double rec(double a, double b, double fa, double fm, double fb, double whole, double eps, int depth) const {
        double m = 0.5 * (a + b);
        double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
        double flm = f(lm), frm = f(rm);
        double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        double diff = left + right - whole;
        if (std::abs(diff) <= 15.0 * eps || b - a < 1e-15 * (1.0 + std::abs(a)))
            return left + right + diff / 15.0;
        if (depth >= max_depth) {
            if (std::abs(diff) <= 1e-13 * (std::abs(left) + std::abs(right)) + 1e-300)
                return left + right + diff / 15.0;
            throw NumericalError("adaptive_simpson: recursion depth exceeded");
        }
        return rec(a, m, fa, flm, fm, left, 0.5 * eps, depth + 1) +
               rec(m, b, fm, frm, fb, right, 0.5 * eps, depth + 1);
    }
};

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double rel_tol, int max_depth) {
    if (a == b) return 0.0;
    // Coarse pass sets the absolute scale for the relative tolerance.
    double coarse = composite_gauss(f, a, b, 16, 8);
    double scale = std::abs(coarse);
    if (scale == 0.0) {
        double m = 0.0;
        for (int i = 0; i <= 64; ++i) m = std::max(m, std::abs(f(a + (b - a) * i / 64.0)));
        scale = m * std::abs(b - a);
        if (scale == 0.0) return 0.0;
    }
    Simpson s{f, rel_tol * scale, max_depth};
    // Start from 8 panels so narrow features are not skipped at the root.
    double total = 0.0;
    const int panels = 8;
    for (int k = 0; k < panels; ++k) {
        double lo = a + (b - a) * k / panels, hi = a + (b - a) * (k + 1) / panels;
        double fa = f(lo), fb = f(hi), fm = f(0.5 * (lo + hi));
        double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
        total += s.rec(lo, hi, fa, fm, fb, whole, s.tol_abs / panels, 0);
    }
    return total;
}

double composite_gauss(const std::function<double(double)>& f, double a, double b, int panels, int n) {
    const GaussRule g = gauss_legendre(n);
    double h = (b - a) / panels, sum = 0.0;
    for (int k = 0; k < panels; ++k) {
        double lo = a + h * k, mid = lo + 0.5 * h, part = 0.0;
        for (int i = 0; i < n; ++i) part += g.w[i] * f(mid + 0.5 * h * g.x[i]);
        sum += 0.5 * h * part;
    }
    return sum;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 points");
    double n = static_cast<double>(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double interp_uniform(const std::vector<double>& tab, double step, double x) {
    const double pos = x / step;
    const long n = static_cast<long>(tab.size());
    long i = static_cast<long>(std::floor(pos));
    if (i < 0) i = 0;
    if (i > n - 2) i = n - 2;
    double f = pos - i;
    auto at = [&](long k) {
        if (k < 0) return tab[static_cast<std::size_t>(-k)];  // even extension
        if (k >= n) return 0.0;
        return tab[static_cast<std::size_t>(k)];
    };
    double y0 = at(i - 1), y1 = at(i), y2 = at(i + 1), y3 = at(i + 2);
    return y1 + 0.5 * f * (y2 - y0 + f * (2.0 * y0 - 5.0 * y1 + 4.0 * y2 - y3 + f * (3.0 * (y1 - y2) + y3 - y0)));
}

}  // namespace frd
