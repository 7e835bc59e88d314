#include "frd/sos.hpp"
#include "frd/weights.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>

using namespace frd;

namespace {

double max_on(const Poly& s, double lo, double hi, int n = 1001) {
    double m = 0.0;
    for (int i = 0; i < n; ++i) m = std::max(m, std::abs(s(lo + (hi - lo) * i / (n - 1.0))));
    return m;
}

}  // namespace

TEST_CASE("half-line split of simple polynomials") {
    HalfLinePair a = halfline_split(Poly({1.0, 1.0}));
    CHECK(a.prefactor == doctest::Approx(1.0));
    CHECK(a.b1.trimmed().coeffs() == std::vector<double>{1.0});
    CHECK(a.b2.trimmed().coeffs() == std::vector<double>{1.0});

    HalfLinePair b = halfline_split(Poly({1.0, 0.0, 1.0}));
    CHECK(b.prefactor * b.b1(0.3) == doctest::Approx(1.09).epsilon(1e-12));
    CHECK(b.b2.is_zero());

    Poly s = Poly({2.0, -2.0, 1.0}) * Poly({3.0, 1.0});
    HalfLinePair c = halfline_split(s);
    for (int i = 0; i <= 100; ++i) {
        double x = 0.1 * i;
        CHECK(std::abs(c.prefactor * (c.b1(x) + x * c.b2(x)) - s(x)) <= 1e-10 * std::max(1.0, std::abs(s(x))));
    }
}

TEST_CASE("two-square split") {
    auto z = two_square_split(Poly());
    CHECK(z.first.is_zero());
    CHECK(z.second.is_zero());

    auto [p, q] = two_square_split(Poly({4.0, 0.0, 1.0}));
    for (double x : {-2.0, 0.0, 1.5}) CHECK(p(x) * p(x) + q(x) * q(x) == doctest::Approx(x * x + 4.0).epsilon(1e-12));
    // up to rotation the pair is (x, 2)
    CHECK(std::max(std::abs(p(0.0)), std::abs(q(0.0))) == doctest::Approx(2.0).epsilon(1e-12));

    Poly b = Poly({1.0, 0.0, 1.0}) * Poly({2.0, 2.0, 1.0});
    auto [f, g] = two_square_split(b);
    for (int i = 0; i <= 100; ++i) {
        double x = -5.0 + 0.1 * i;
        CHECK(std::abs(f(x) * f(x) + g(x) * g(x) - b(x)) <= 1e-10 * std::max(1.0, b(x)));
    }
}

TEST_CASE("quadruples for elementary inputs") {
    SosQuadruple a = sos_decompose(Poly({1.0, 0.0, 1.0}));
    CHECK(a.a3.is_zero());
    CHECK(a.a4.is_zero());
    for (double x : {0.0, 0.5, 3.0}) CHECK(a.eval(x) == doctest::Approx(x * x + 1.0).epsilon(1e-12));

    SosQuadruple b = sos_decompose(Poly({0.0, 1.0}));
    CHECK(b.a1.is_zero());
    CHECK(b.a2.is_zero());
    for (double x : {0.0, 0.5, 3.0}) CHECK(b.eval(x) == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("certificate of v_8 for the three-dimensional free field") {
    auto prof = shared_bump_profile(0.25);
    WeightFamily fam(gff_params(3), prof);
    const double c = fam.c();
    Poly s = poly_compose_affine(fam.vt_polynomial(8.0), c, -1.0);  // x = c - mu >= 0
    SosQuadruple q = sos_decompose(s + Poly::constant(fam.sos_floor(8.0)));
    const int D = s.degree();
    CHECK(q.a1.degree() <= D);
    CHECK(q.a2.degree() <= D);
    CHECK(q.a3.degree() <= D - 1);
    CHECK(q.a4.degree() <= D - 1);
    const double smax = max_on(s, 0.0, c);
    double res = 0.0;
    for (int i = 0; i < 1000; ++i) {
        double x = c * i / 999.0;
        res = std::max(res, std::abs(q.eval(x) - s(x)));
    }
    CHECK(res <= 1e-8 * smax);
}

TEST_CASE("composition laws multiply the represented polynomials") {
    std::pair<Poly, Poly> f{Poly({1.0, 2.0}), Poly({0.5})}, g{Poly({3.0, -1.0, 1.0}), Poly({0.0, 1.0})};
    auto h = halfline_compose(f, g);
    for (double x : {0.0, 0.7, 2.0}) {
        double lhs = h.first(x) + x * h.second(x);
        double rhs = (f.first(x) + x * f.second(x)) * (g.first(x) + x * g.second(x));
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
    }
    auto k = gauss_compose(f, g);
    for (double x : {-1.0, 0.7, 2.0}) {
        double lhs = k.first(x) * k.first(x) + k.second(x) * k.second(x);
        double fa = f.first(x), fb = f.second(x), ga = g.first(x), gb = g.second(x);
        CHECK(lhs == doctest::Approx((fa * fa + fb * fb) * (ga * ga + gb * gb)).epsilon(1e-13));
    }
}
