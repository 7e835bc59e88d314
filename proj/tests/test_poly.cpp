#include "frd/poly.hpp"
#include "frd/weights.hpp"

#include "doctest.h"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

using namespace frd;

namespace {

double naive_eval(const Poly& p, double x) {
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) s += p[k] * std::pow(x, static_cast<double>(k));
    return s;
}

Poly random_poly(std::mt19937_64& rng, int deg) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> c(deg + 1);
    for (double& v : c) v = u(rng);
    return Poly(c);
}

}  // namespace

TEST_CASE("evaluation of small polynomials") {
    CHECK(poly_eval(Poly({1.0}), 7.3) == 1.0);
    CHECK(poly_eval(Poly({-1.0, 0.0, 2.0}), 0.5) == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(poly_eval(chebyshev_T(8), std::cos(0.3)) == doctest::Approx(std::cos(2.4)).epsilon(1e-13));
}

TEST_CASE("Horner matches the power sum on [-1, 1]") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Poly p = random_poly(rng, 12);
        for (int i = 0; i <= 40; ++i) {
            double x = -1.0 + i / 20.0;
            double ref = naive_eval(p, x);
            CHECK(std::abs(p(x) - ref) <= 1e-12 * std::max(1.0, p.max_abs_coeff()));
        }
    }
}

TEST_CASE("degree ignores coefficients below the relative tolerance") {
    Poly p({1.0, 2.0, 1e-16});
    CHECK(p.degree() == 1);
    CHECK(p.trimmed().size() == 2);
    CHECK(Poly().degree() == -1);
    CHECK(Poly({0.0, 0.0}).is_zero());
    Poly q({3.0, 0.0, 5.0});
    CHECK(q.degree() == 2);
    CHECK(q.lead() == 5.0);
}

TEST_CASE("multiplication") {
    Poly a({1.0, 1.0}), b({1.0, -1.0});
    Poly c = poly_mul(a, b);
    CHECK(c.trimmed().coeffs() == std::vector<double>{1.0, 0.0, -1.0});
    Poly p({0.3, -1.2, 2.5, 0.7});
    CHECK((p * Poly({1.0})).coeffs() == p.coeffs());

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
        Poly f = random_poly(rng, 1 + trial % 8), g = random_poly(rng, 8 - trial % 8);
        Poly fg = f * g;
        for (int i = 0; i < 20; ++i) {
            double x = u(rng);
            CHECK(fg(x) == doctest::Approx(f(x) * g(x)).epsilon(1e-12));
        }
    }
}

TEST_CASE("Chebyshev polynomials") {
    CHECK(chebyshev_T(0).coeffs() == std::vector<double>{1.0});
    CHECK(chebyshev_T(2).trimmed().coeffs() == std::vector<double>{-1.0, 0.0, 2.0});
    Poly t16 = chebyshev_T(16);
    CHECK(t16.degree() == 16);
    for (int i = 0; i < 10; ++i) {
        double th = 0.1 + 0.3 * i;
        CHECK(std::abs(t16(std::cos(th)) - std::cos(16 * th)) <= 1e-10);
    }
    // series conversion agrees with summing the basis
    std::vector<double> alpha{0.5, -0.25, 0.125, 0.0625};
    Poly m = chebyshev_to_monomial(alpha);
    for (double x : {-0.9, -0.2, 0.4, 1.0}) {
        double ref = 0.0;
        for (std::size_t k = 0; k < alpha.size(); ++k) ref += alpha[k] * std::cos(k * std::acos(x));
        CHECK(m(x) == doctest::Approx(ref).epsilon(1e-14));
    }
}

TEST_CASE("affine composition") {
    Poly x = Poly::monomial(1);
    CHECK(poly_compose_affine(x, 3.0, -1.0).trimmed().coeffs() == std::vector<double>{3.0, -1.0});
    Poly p({0.2, -1.0, 4.0, 0.5});
    CHECK(poly_compose_affine(p, 0.0, 1.0).coeffs() == p.coeffs());
    CHECK(poly_compose_affine(Poly::monomial(2), 1.0, 2.0)(0.7) == doctest::Approx(5.76).epsilon(1e-14));
}

TEST_CASE("roots of small polynomials") {
    RootSet i = poly_roots(Poly({1.0, 0.0, 1.0}));
    REQUIRE(i.roots.size() == 1);
    CHECK(i.roots[0].kind == RootKind::ComplexUpper);
    CHECK(std::abs(i.roots[0].z - std::complex<double>(0.0, 1.0)) < 1e-12);
    CHECK(i.count() == 2);

    RootSet r = poly_roots(Poly({-6.0, 1.0, 1.0}));
    std::vector<double> re;
    for (const auto& root : r.roots) re.push_back(root.z.real());
    std::sort(re.begin(), re.end());
    REQUIRE(re.size() == 2);
    CHECK(re[0] == doctest::Approx(-3.0).epsilon(1e-12));
    CHECK(re[1] == doctest::Approx(2.0).epsilon(1e-12));

    // double root stays one entry with multiplicity 2
    RootSet dbl = poly_roots(Poly({1.0, 2.0, 1.0}));
    REQUIRE(dbl.roots.size() == 1);
    CHECK(dbl.roots[0].multiplicity == 2);
}

TEST_CASE("root sets reproduce their polynomial and store upper conjugates only") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        Poly p = random_poly(rng, 10);
        RootSet rs = poly_roots(p);
        CHECK(rs.count() == p.degree());
        for (const auto& r : rs.roots) {
            CHECK(r.multiplicity >= 1);
            if (r.kind == RootKind::ComplexUpper) CHECK(r.z.imag() > 0.0);
        }
        Poly back = rs.reconstruct();
        for (int k = 0; k <= p.degree(); ++k) CHECK(std::abs(back[k] - p[k]) <= 1e-8 * p.max_abs_coeff());
    }
}

TEST_CASE("roots of v_8 in the unit variable agree with the companion-matrix eigenvalues") {
    auto prof = shared_bump_profile(0.25);
    WeightFamily fam(gff_params(3), prof);
    Poly v = fam.vt_unit(8.0).trimmed();  // in u = 1 - mu / c, where the coefficients stay resolvable
    REQUIRE(v.degree() >= 4);
    RootSet rs = poly_roots(v);

    // independent oracle: Eigen's nonsymmetric solver on the monomial companion matrix
    const int n = v.degree();
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) C(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) C(i, n - 1) = -v[i] / v.lead();
    Eigen::EigenSolver<Eigen::MatrixXd> es(C);
    auto ev = es.eigenvalues();
    for (const auto& r : rs.roots) {
        double best = 1e300;
        for (int i = 0; i < n; ++i) best = std::min(best, std::abs(ev[i] - r.z));
        CHECK(best <= 1e-6 * (1.0 + std::abs(r.z)));
    }
    CHECK(rs.count() == n);
}
