#include "frd/sos.hpp"

#include <cmath>
#include <stdexcept>

namespace frd {

double SosQuadruple::eval(double x) const {
    double v1 = a1(x), v2 = a2(x), v3 = a3(x), v4 = a4(x);
    return v1 * v1 + v2 * v2 + x * (v3 * v3 + v4 * v4);
}

std::pair<Poly, Poly> halfline_compose(const std::pair<Poly, Poly>& f, const std::pair<Poly, Poly>& g) {
    static const Poly x2 = Poly::monomial(2);
    Poly first = f.first * g.first + x2 * (f.second * g.second);
    Poly second = f.first * g.second + f.second * g.first;
    return {first, second};
}

std::pair<Poly, Poly> gauss_compose(const std::pair<Poly, Poly>& f, const std::pair<Poly, Poly>& g) {
    return {f.first * g.first - f.second * g.second, f.first * g.second + f.second * g.first};
}

namespace {

RootOptions root_options(const SosOptions& opt) {
    RootOptions ro;
    ro.cluster_tol = opt.cluster_tol;
    ro.snap_tol = opt.snap_tol;
    return ro;
}

}  // namespace

HalfLinePair halfline_split(const Poly& s_in, const SosOptions& opt) {
    Poly s = s_in.trimmed();
    double s0 = s[0];
    if (!(s0 > 0.0)) throw std::invalid_argument("halfline_split: requires s(0) > 0");
    HalfLinePair out;
    out.prefactor = s0;
    std::pair<Poly, Poly> acc{Poly::constant(1.0), Poly()};
    if (s.degree() < 1) {
        out.b1 = acc.first;
        return out;
    }
    RootSet rs = poly_roots(s, root_options(opt));
    for (const Root& r : rs.roots) {
        std::pair<Poly, Poly> f;
        if (r.kind == RootKind::RealNegative) {
            // 1 - x/z = 1 + x/|z|
            f = {Poly::constant(1.0), Poly::constant(-1.0 / r.z.real())};
        } else if (r.kind == RootKind::RealPositive) {
            if (r.multiplicity % 2 != 0)
                throw std::invalid_argument("halfline_split: odd-multiplicity positive root");
            double z = r.z.real();
            // (1 - x/z)^2 as a conjugate pair with zero imaginary part
            f = {Poly({1.0, -2.0 / z, 1.0 / (z * z)}), Poly()};
            for (int m = 0; m < r.multiplicity / 2; ++m) acc = halfline_compose(acc, f);
            continue;
        } else {
            double re = r.z.real(), im = r.z.imag(), n2 = std::norm(r.z);
            double rp = std::max(re, 0.0), rm = std::min(re, 0.0);
            f = {Poly({(rp * rp + rm * rm + im * im) / n2, -2.0 * rp / n2, 1.0 / n2}),
                 Poly::constant(-2.0 * rm / n2)};
        }
        for (int m = 0; m < r.multiplicity; ++m) acc = halfline_compose(acc, f);
    }
    out.b1 = acc.first;
    out.b2 = acc.second;
    return out;
}

std::pair<Poly, Poly> two_square_split(const Poly& b_in, const SosOptions& opt) {
    Poly b = b_in.trimmed();
    if (b.is_zero()) return {Poly(), Poly()};
    if (b.degree() % 2 != 0) {
        // A polynomial nonnegative on R has even degree; an odd top coefficient
        // here sits at the zero tolerance and is rounding residue.
        std::vector<double> c = b.coeffs();
        c.pop_back();
        b = Poly(std::move(c)).trimmed();
    }
    double b0 = b[0];
    if (!(b0 > 0.0)) throw std::invalid_argument("two_square_split: requires b(0) > 0 or b = 0");
    std::pair<Poly, Poly> acc{Poly::constant(1.0), Poly()};
    if (b.degree() >= 1) {
        RootSet rs = poly_roots(b, root_options(opt));
        for (const Root& r : rs.roots) {
            std::pair<Poly, Poly> f;
            int reps = r.multiplicity;
            if (r.kind == RootKind::ComplexUpper) {
                double n = std::abs(r.z);
                f = {Poly({r.z.real() / n, -1.0 / n}), Poly::constant(r.z.imag() / n)};
            } else {
                if (r.multiplicity % 2 != 0)
                    throw std::invalid_argument("two_square_split: real root of odd multiplicity");
                f = {Poly({1.0, -1.0 / r.z.real()}), Poly()};
                reps = r.multiplicity / 2;
            }
            for (int m = 0; m < reps; ++m) acc = gauss_compose(acc, f);
        }
    }
    double sc = std::sqrt(b0);
    Poly p = acc.first * sc, q = acc.second * sc;
    if (q.lead() < 0) q *= -1.0;
    if (p.lead() < 0) p *= -1.0;
    return {p, q};
}

SosQuadruple sos_decompose(const Poly& s, const SosOptions& opt) {
    SosQuadruple out;
    Poly st = s.trimmed();
    if (st.degree() >= 1 && st[0] == 0.0) {
        // s = x s1: x (a1^2 + a2^2 + x (a3^2 + a4^2)) = (x a3)^2 + (x a4)^2 + x (a1^2 + a2^2)
        Poly s1(std::vector<double>(st.coeffs().begin() + 1, st.coeffs().end()));
        SosQuadruple inner = sos_decompose(s1, opt);
        static const Poly x = Poly::monomial(1);
        out.a1 = x * inner.a3;
        out.a2 = x * inner.a4;
        out.a3 = inner.a1;
        out.a4 = inner.a2;
        return out;
    }
    HalfLinePair hp = halfline_split(st, opt);
    auto [a1, a2] = two_square_split(hp.b1 * hp.prefactor, opt);
    out.a1 = a1;
    out.a2 = a2;
    if (!hp.b2.trimmed().is_zero()) {
        auto [a3, a4] = two_square_split(hp.b2 * hp.prefactor, opt);
        out.a3 = a3;
        out.a4 = a4;
    }
    return out;
}

}  // namespace frd
