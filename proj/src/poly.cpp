#include "frd/poly.hpp"

#include "frd/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace frd {

using cplx = std::complex<double>;

Poly::Poly(std::vector<double> coeffs) : c_(std::move(coeffs)) {
    while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
}

Poly Poly::constant(double a) { return Poly({a}); }

Poly Poly::monomial(int k, double a) {
    std::vector<double> c(k + 1, 0.0);
    c[k] = a;
    return Poly(std::move(c));
}

double Poly::max_abs_coeff() const {
    double m = 0.0;
    for (double v : c_) m = std::max(m, std::abs(v));
    return m;
}

int Poly::degree() const {
    double tol = kZeroTol * max_abs_coeff();
    for (int i = static_cast<int>(c_.size()) - 1; i >= 0; --i)
        if (std::abs(c_[i]) > tol) return i;
    return -1;
}

double Poly::lead() const {
    int d = degree();
    return d < 0 ? 0.0 : c_[d];
}

double Poly::operator()(double x) const {
    double r = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) r = r * x + *it;
    return r;
}

cplx Poly::operator()(cplx z) const {
    cplx r = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) r = r * z + *it;
    return r;
}

Poly Poly::trimmed() const {
    int d = degree();
    return Poly(std::vector<double>(c_.begin(), c_.begin() + (d + 1)));
}

Poly Poly::derivative() const {
    if (c_.size() <= 1) return Poly();
    std::vector<double> d(c_.size() - 1);
    for (std::size_t i = 1; i < c_.size(); ++i) d[i - 1] = static_cast<double>(i) * c_[i];
    return Poly(std::move(d));
}

Poly& Poly::operator+=(const Poly& q) {
    if (q.c_.size() > c_.size()) c_.resize(q.c_.size(), 0.0);
    for (std::size_t i = 0; i < q.c_.size(); ++i) c_[i] += q.c_[i];
    while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
    return *this;
}

Poly& Poly::operator-=(const Poly& q) {
    if (q.c_.size() > c_.size()) c_.resize(q.c_.size(), 0.0);
    for (std::size_t i = 0; i < q.c_.size(); ++i) c_[i] -= q.c_[i];
    while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
    return *this;
}

Poly& Poly::operator*=(double a) {
    for (double& v : c_) v *= a;
    while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
    return *this;
}

Poly operator+(Poly p, const Poly& q) { return p += q; }
Poly operator-(Poly p, const Poly& q) { return p -= q; }
Poly operator*(Poly p, double a) { return p *= a; }
Poly operator*(double a, Poly p) { return p *= a; }
Poly operator*(const Poly& p, const Poly& q) { return poly_mul(p, q); }

double poly_eval(const Poly& p, double x) { return p(x); }

Poly poly_mul(const Poly& p, const Poly& q) {
    const auto& a = p.coeffs();
    const auto& b = q.coeffs();
    if (a.empty() || b.empty()) return Poly();
    std::vector<double> c(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
    return Poly(std::move(c));
}

Poly chebyshev_T(int k) {
    if (k < 0) throw std::invalid_argument("chebyshev_T: negative index");
    std::vector<double> prev{1.0};
    if (k == 0) return Poly(prev);
    std::vector<double> cur{0.0, 1.0};
    for (int n = 1; n < k; ++n) {
        std::vector<double> next(n + 2, 0.0);
        for (int i = 0; i <= n; ++i) next[i + 1] += 2.0 * cur[i];
        for (int i = 0; i < n; ++i) next[i] -= prev[i];
        prev = std::move(cur);
        cur = std::move(next);
    }
    return Poly(cur);
}

Poly chebyshev_to_monomial(const std::vector<double>& alpha) {
    // Clenshaw recurrence carried out on coefficient vectors.
    std::size_t n = alpha.size();
    if (n == 0) return Poly();
    std::vector<double> b1(n + 1, 0.0), b2(n + 1, 0.0), b0(n + 1, 0.0);
    for (std::size_t k = n; k-- > 1;) {
        std::fill(b0.begin(), b0.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) b0[i + 1] += 2.0 * b1[i];
        for (std::size_t i = 0; i <= n; ++i) b0[i] -= b2[i];
        b0[0] += alpha[k];
        std::swap(b2, b1);
        std::swap(b1, b0);
    }
    // result = alpha_0 + x b1 - b2
    std::vector<double> r(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) r[i + 1] += b1[i];
    for (std::size_t i = 0; i <= n; ++i) r[i] -= b2[i];
    r[0] += alpha[0];
    return Poly(std::move(r));
}

Poly poly_compose_affine(const Poly& p, double a, double b) {
    const auto& c = p.coeffs();
    if (c.empty()) return Poly();
    std::vector<double> r{c.back()};
    for (std::size_t k = c.size() - 1; k-- > 0;) {
        std::vector<double> next(r.size() + 1, 0.0);
        for (std::size_t i = 0; i < r.size(); ++i) {
            next[i] += a * r[i];
            next[i + 1] += b * r[i];
        }
        next[0] += c[k];
        r = std::move(next);
    }
    return Poly(std::move(r));
}

namespace {

// Newton correction p(z)/p'(z). For |z| > 1 the reversed polynomial is used
// so powers of z never overflow.
cplx newton_ratio(const std::vector<double>& c, cplx z, double& abs_err_ratio) {
    const int n = static_cast<int>(c.size()) - 1;
    if (std::abs(z) <= 1.0) {
        cplx p = c[n], dp = 0.0;
        double mag = std::abs(c[n]);
        for (int i = n - 1; i >= 0; --i) {
            dp = dp * z + p;
            p = p * z + c[i];
            mag = mag * std::abs(z) + std::abs(c[i]);
        }
        abs_err_ratio = std::abs(p) / (mag * 4.0 * (n + 1) * 2.2e-16);
        return p / dp;
    }
    // p(z) = z^n r(1/z), r(w) = sum c_{n-i} w^i
    cplx w = 1.0 / z;
    cplx r = c[0], dr = 0.0;
    double mag = std::abs(c[0]);
    for (int i = 1; i <= n; ++i) {
        dr = dr * w + r;
        r = r * w + c[i];
        mag = mag * std::abs(w) + std::abs(c[i]);
    }
    abs_err_ratio = std::abs(r) / (mag * 4.0 * (n + 1) * 2.2e-16);
    // p'/p = n/z - w^2 r'(w)/(r(w) z^0) ... expressed via w
    cplx ratio_inv = static_cast<double>(n) * w - w * w * dr / r;
    return 1.0 / ratio_inv;
}

std::vector<cplx> initial_guesses(const std::vector<double>& c) {
    const int n = static_cast<int>(c.size()) - 1;
    // Upper convex hull of (i, log|c_i|).
    std::vector<int> idx;
    std::vector<double> lg(n + 1, -1e300);
    for (int i = 0; i <= n; ++i)
        if (c[i] != 0.0) lg[i] = std::log(std::abs(c[i]));
    std::vector<int> hull;
    for (int i = 0; i <= n; ++i) {
        if (c[i] == 0.0) continue;
        while (hull.size() >= 2) {
            int a = hull[hull.size() - 2], b = hull.back();
            double cross = (lg[b] - lg[a]) * (i - a) - (lg[i] - lg[a]) * (b - a);
            if (cross <= 0) hull.pop_back();
            else break;
        }
        hull.push_back(i);
    }
    std::vector<cplx> z;
    z.reserve(n);
    const double sigma = 0.7;
    for (std::size_t e = 0; e + 1 < hull.size(); ++e) {
        int a = hull[e], b = hull[e + 1];
        int k = b - a;
        double r = std::exp((lg[a] - lg[b]) / k);
        for (int j = 0; j < k; ++j) {
            double ang = 2.0 * std::numbers::pi * j / k + 2.0 * std::numbers::pi * e / n + sigma;
            z.push_back(std::polar(r, ang));
        }
    }
    // Zero roots (c_0 = 0) are not expected: callers strip them first.
    while (static_cast<int>(z.size()) < n) z.push_back(std::polar(1.0, 0.3 * z.size() + sigma));
    return z;
}

}  // namespace

std::vector<cplx> aberth_roots(const std::vector<double>& c, int max_iter, const std::vector<cplx>& start) {
    const int n = static_cast<int>(c.size()) - 1;
    if (n < 1) return {};
    const bool polish = !start.empty();
    if (polish && static_cast<int>(start.size()) != n) throw std::invalid_argument("aberth_roots: start size");
    std::vector<cplx> z = polish ? start : initial_guesses(c);
    std::vector<char> done(n, 0), noisy(n, 0);
    for (int it = 0; it < max_iter; ++it) {
        bool all = true;
        for (int i = 0; i < n; ++i) {
            if (done[i]) continue;
            double noise_ratio = 0.0;
            cplx ratio = newton_ratio(c, z[i], noise_ratio);
            if (!std::isfinite(std::abs(ratio))) {
                done[i] = 1;
                continue;
            }
            // The rounding bound alone is not a stopping rule: with alternating
            // coefficients it is far above the true value over wide regions.
            noisy[i] = noise_ratio <= 1.0;
            if (polish && noisy[i]) {
                // already as good as the arithmetic can certify
                done[i] = 1;
                continue;
            }
            cplx s = 0.0;
            for (int j = 0; j < n; ++j)
                if (j != i) s += 1.0 / (z[i] - z[j]);
            cplx w = ratio / (1.0 - ratio * s);
            z[i] -= w;
            if (std::abs(w) < 1e-13 * (1.0 + std::abs(z[i]))) done[i] = 1;
            else all = false;
        }
        if (all) return z;
    }
    for (int i = 0; i < n; ++i)
        if (!done[i] && !noisy[i]) throw NumericalError("aberth_roots: no convergence within iteration cap");
    return z;
}

namespace {

// Parlett-Reinsch diagonal similarity with power-of-two factors; companion
// matrices of badly scaled polynomials lose most of their accuracy without it.
void balance(Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    const double radix = 2.0, sqrdx = radix * radix;
    bool done = false;
    while (!done) {
        done = true;
        for (int i = 0; i < n; ++i) {
            double r = 0.0, c = 0.0;
            for (int j = 0; j < n; ++j)
                if (j != i) {
                    c += std::abs(a(j, i));
                    r += std::abs(a(i, j));
                }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix, f = 1.0, sum = c + r;
            while (c < g) {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= sqrdx;
            }
            if ((c + r) / f < 0.95 * sum) {
                done = false;
                g = 1.0 / f;
                a.row(i) *= g;
                a.col(i) *= f;
            }
        }
    }
}

}  // namespace

std::vector<cplx> companion_roots(const std::vector<double>& c) {
    const int n = static_cast<int>(c.size()) - 1;
    if (n < 1) return {};
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) m(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) m(i, n - 1) = -c[i] / c[n];
    balance(m);
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    if (es.info() != Eigen::Success) throw NumericalError("companion_roots: eigensolver failed");
    std::vector<cplx> z(n);
    for (int i = 0; i < n; ++i) z[i] = es.eigenvalues()[i];
    return z;
}

int RootSet::count() const {
    int n = 0;
    for (const auto& r : roots) n += r.multiplicity * (r.kind == RootKind::ComplexUpper ? 2 : 1);
    return n;
}

double RootSet::max_modulus() const {
    double m = 0.0;
    for (const auto& r : roots) m = std::max(m, std::abs(r.z));
    return m;
}

Poly RootSet::reconstruct() const {
    Poly p = Poly::constant(scale);
    for (const auto& r : roots) {
        Poly f = r.kind == RootKind::ComplexUpper
                     ? Poly({std::norm(r.z), -2.0 * r.z.real(), 1.0})
                     : Poly({-r.z.real(), 1.0});
        for (int m = 0; m < r.multiplicity; ++m) p = poly_mul(p, f);
    }
    return p;
}

namespace {

// Pairs raw roots into real roots and upper-half representatives.
void classify(std::vector<cplx> raw, const RootOptions& opt, std::vector<double>& reals,
              std::vector<cplx>& uppers) {
    std::vector<cplx> lower;
    for (cplx z : raw) {
        if (std::abs(z.imag()) < opt.snap_tol * (1.0 + std::abs(z))) reals.push_back(z.real());
        else if (z.imag() > 0) uppers.push_back(z);
        else lower.push_back(z);
    }
    // Match each upper root with the nearest conjugate of a lower root.
    std::vector<cplx> paired;
    std::vector<char> used(lower.size(), 0);
    std::vector<cplx> unmatched;
    for (cplx u : uppers) {
        int best = -1;
        double bd = 0.0;
        for (std::size_t j = 0; j < lower.size(); ++j) {
            if (used[j]) continue;
            double dd = std::abs(u - std::conj(lower[j]));
            if (best < 0 || dd < bd) { best = static_cast<int>(j); bd = dd; }
        }
        if (best >= 0 && bd < 1e-6 * (1.0 + std::abs(u))) {
            used[best] = 1;
            paired.push_back(0.5 * (u + std::conj(lower[best])));
        } else {
            unmatched.push_back(u);
        }
    }
    for (std::size_t j = 0; j < lower.size(); ++j)
        if (!used[j]) unmatched.push_back(std::conj(lower[j]));
    // Leftovers are near-real roots that escaped the snap; pair them greedily.
    std::sort(unmatched.begin(), unmatched.end(),
              [](cplx a, cplx b) { return a.real() < b.real(); });
    for (std::size_t i = 0; i < unmatched.size();) {
        if (i + 1 < unmatched.size() &&
            std::abs(unmatched[i] - unmatched[i + 1]) < 1e-6 * (1.0 + std::abs(unmatched[i]))) {
            paired.push_back(0.5 * (unmatched[i] + unmatched[i + 1]));
            i += 2;
        } else {
            reals.push_back(unmatched[i].real());
            ++i;
        }
    }
    uppers = std::move(paired);
}

}  // namespace

namespace {

// Shared tail: snap, pair conjugates, cluster; `zeros` exact roots at 0 appended.
RootSet assemble_root_set(std::vector<cplx> raw, int zeros, double scale, const RootOptions& opt) {
    RootSet rs;
    rs.scale = scale;
    std::vector<double> reals;
    std::vector<cplx> uppers;
    classify(std::move(raw), opt, reals, uppers);
    for (int i = 0; i < zeros; ++i) reals.push_back(0.0);

    std::sort(reals.begin(), reals.end());
    for (std::size_t i = 0; i < reals.size();) {
        std::size_t j = i + 1;
        double sum = reals[i];
        while (j < reals.size() && opt.cluster_tol > 0 &&
               std::abs(reals[j] - reals[i]) < opt.cluster_tol * (1.0 + std::abs(reals[i]))) {
            sum += reals[j];
            ++j;
        }
        Root r;
        r.multiplicity = static_cast<int>(j - i);
        r.z = sum / r.multiplicity;
        r.kind = r.z.real() < 0 ? RootKind::RealNegative : RootKind::RealPositive;
        rs.roots.push_back(r);
        i = j;
    }
    std::vector<char> taken(uppers.size(), 0);
    for (std::size_t i = 0; i < uppers.size(); ++i) {
        if (taken[i]) continue;
        cplx sum = uppers[i];
        int m = 1;
        for (std::size_t j = i + 1; j < uppers.size(); ++j) {
            if (!taken[j] && opt.cluster_tol > 0 &&
                std::abs(uppers[j] - uppers[i]) < opt.cluster_tol * (1.0 + std::abs(uppers[i]))) {
                taken[j] = 1;
                sum += uppers[j];
                ++m;
            }
        }
        Root r;
        r.z = sum / static_cast<double>(m);
        r.multiplicity = m;
        r.kind = RootKind::ComplexUpper;
        rs.roots.push_back(r);
    }
    return rs;
}

// max_i |c_i - reconstructed_i| / |c_i|, floored at 1e-300 max|c|.
double componentwise_backward_error(const std::vector<double>& c, const std::vector<cplx>& z) {
    std::vector<cplx> p{cplx(c.back())};
    for (cplx r : z) {
        std::vector<cplx> q(p.size() + 1, 0.0);
        for (std::size_t i = 0; i < p.size(); ++i) {
            q[i + 1] += p[i];
            q[i] -= r * p[i];
        }
        p = std::move(q);
    }
    double mx = 0.0;
    for (double v : c) mx = std::max(mx, std::abs(v));
    double e = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
        e = std::max(e, std::abs(p[i] - c[i]) / std::max(std::abs(c[i]), 1e-300 * mx));
    return e;
}

cplx clenshaw(const std::vector<double>& a, cplx x, cplx* deriv) {
    // value and derivative of sum a_k T_k(x)
    cplx b1 = 0.0, b2 = 0.0, d1 = 0.0, d2 = 0.0;
    for (std::size_t k = a.size(); k-- > 1;) {
        cplx b0 = a[k] + 2.0 * x * b1 - b2;
        cplx d0 = 2.0 * b1 + 2.0 * x * d1 - d2;
        b2 = b1;
        b1 = b0;
        d2 = d1;
        d1 = d0;
    }
    if (deriv) *deriv = b1 + x * d1 - d2;
    return a[0] + x * b1 - b2;
}

}  // namespace

RootSet poly_roots(const Poly& p, const RootOptions& opt) {
    Poly q = p.trimmed();
    int n = q.degree();
    if (n < 1) throw std::invalid_argument("poly_roots: degree must be >= 1");
    std::vector<double> c = q.coeffs();
    // Exact zero roots.
    int zeros = 0;
    while (zeros < n && c[zeros] == 0.0) ++zeros;
    c.erase(c.begin(), c.begin() + zeros);
    std::vector<cplx> raw;
    if (c.size() > 1) {
        // Balanced companion eigenvalues seed the simultaneous iteration; cold-start
        // Aberth stalls on the clustered rings these weights produce.
        // Keep whichever candidate reproduces the coefficients best, componentwise.
        raw = companion_roots(c);
        double best = componentwise_backward_error(c, raw);
        for (int pass = 0; pass < 2; ++pass) {
            try {
                std::vector<cplx> z = pass == 0 ? aberth_roots(c, opt.max_iter, raw) : aberth_roots(c, opt.max_iter);
                double e = componentwise_backward_error(c, z);
                if (e < best) {
                    best = e;
                    raw = std::move(z);
                }
            } catch (const NumericalError&) {
            }
        }
    }
    return assemble_root_set(std::move(raw), zeros, q.coeffs()[n], opt);
}

std::vector<cplx> colleague_roots(const std::vector<double>& alpha) {
    const int n = static_cast<int>(alpha.size()) - 1;
    if (n < 1) return {};
    if (alpha[n] == 0.0) throw std::invalid_argument("colleague_roots: zero leading coefficient");
    if (n == 1) return {cplx(-alpha[0] / alpha[1], 0.0)};
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    m(0, 1) = 1.0;
    for (int i = 1; i < n - 1; ++i) {
        m(i, i - 1) = 0.5;
        m(i, i + 1) = 0.5;
    }
    m(n - 1, n - 2) = 0.5;
    for (int j = 0; j < n; ++j) m(n - 1, j) -= alpha[j] / (2.0 * alpha[n]);
    balance(m);
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    if (es.info() != Eigen::Success) throw NumericalError("colleague_roots: eigensolver failed");
    std::vector<cplx> z(n);
    for (int i = 0; i < n; ++i) {
        cplx x = es.eigenvalues()[i];
        // a few Newton steps on the Chebyshev series; keep the eigenvalue if they do not help
        cplx best = x;
        double fb = std::abs(clenshaw(alpha, x, nullptr));
        for (int it = 0; it < 4; ++it) {
            cplx d;
            cplx f = clenshaw(alpha, x, &d);
            if (d == 0.0) break;
            x -= f / d;
            double fx = std::abs(clenshaw(alpha, x, nullptr));
            if (fx < fb) {
                fb = fx;
                best = x;
            }
        }
        z[i] = best;
    }
    return z;
}

RootSet chebyshev_roots(const std::vector<double>& alpha, const RootOptions& opt) {
    std::size_t n = alpha.size();
    while (n > 1 && alpha[n - 1] == 0.0) --n;
    if (n < 2) throw std::invalid_argument("chebyshev_roots: degree must be >= 1");
    std::vector<double> a(alpha.begin(), alpha.begin() + n);
    const double scale = a.back() * std::ldexp(1.0, static_cast<int>(n) - 2);  // monomial leading coefficient
    return assemble_root_set(colleague_roots(a), 0, scale, opt);
}

}  // namespace frd
