#include "frd/error.hpp"
#include "frd/quadrature.hpp"
#include "frd/weights.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>

using namespace frd;
using std::numbers::pi;

TEST_CASE("bump profile tables") {
    for (double h : {0.25, 0.5}) {
        auto prof = shared_bump_profile(h);
        for (double v : prof->phi_table) CHECK(v >= 0.0);
        CHECK(prof->phi_sq_hat_at(4.0 * h) == 0.0);
        CHECK(prof->phi_sq_hat_at(4.0 * h + 0.01) == 0.0);
        CHECK(prof->phi_sq_hat_at(-4.0 * h - 0.3) == 0.0);
        CHECK(prof->phi_sq_hat_at(2.0 * h) > 0.0);
        for (int i = 0; i <= 200; ++i) CHECK(prof->phi_sq_hat_at(4.0 * h * i / 200.0) >= 0.0);
        CHECK(prof->cprime(0) > 0.0);
        CHECK(prof->cprime(1) > 0.0);
        CHECK(c0_constant(*prof, 1.0) > 0.0);
        CHECK(c0_constant(*prof, 0.5) > 0.0);
    }
}

TEST_CASE("transform of phi squared at zero is its integral") {
    auto prof = shared_bump_profile(0.25);
    // u_hat(0) = (1/2pi) int_R u, phi even
    double direct = adaptive_simpson([&](double s) { return prof->phi(s) * prof->phi(s); }, 0.0, prof->s_max, 1e-12) / pi;
    CHECK(prof->phi_sq_hat_at(0.0) == doctest::Approx(direct).epsilon(1e-6));
}

TEST_CASE("c0 normalizes the continuum identity") {
    auto prof = shared_bump_profile(0.5);
    const double c0 = c0_constant(*prof, 1.0);
    auto moment = [&](double lam) {
        return adaptive_simpson(
            [&](double t) {
                double v = prof->phi_exact(std::sqrt(lam) * t);
                return t * v * v;
            },
            0.0, prof->s_max / std::sqrt(lam), 1e-12);
    };
    for (double lam : {0.5, 1.0, 2.0}) CHECK(c0 * moment(lam) == doctest::Approx(1.0 / lam).epsilon(1e-6));
    CHECK(moment(4.0) == doctest::Approx(moment(1.0) / 4.0).epsilon(1e-9));
}

TEST_CASE("partial fractions of (1 - cos x)^-p") {
    auto a1 = partial_fraction_coeffs(1);
    REQUIRE(a1.size() == 1);
    CHECK(a1[0] == doctest::Approx(2.0).epsilon(1e-14));
    auto a2 = partial_fraction_coeffs(2);
    REQUIRE(a2.size() == 2);
    CHECK(a2[0] == doctest::Approx(4.0).epsilon(1e-14));

    auto lattice_sum = [](const std::vector<double>& a, double x, int N) {
        const int p = static_cast<int>(a.size());
        double s = 0.0;
        for (int n = N; n >= -N; --n) {
            double y = x - 2.0 * pi * n;
            for (int j = 0; j < p; ++j) s += a[j] * std::pow(y, -(2.0 * p - 2.0 * j));
        }
        // terms beyond |n| = N by the midpoint integral, so the cutoff does not dominate
        const double edge = 2.0 * pi * (N + 0.5);
        for (int j = 0; j < p; ++j) {
            const double m = 2.0 * p - 2.0 * j;
            s += a[j] / (2.0 * pi * (m - 1.0)) * (std::pow(edge - x, 1.0 - m) + std::pow(edge + x, 1.0 - m));
        }
        return s;
    };
    CHECK(std::abs(1.0 / (1.0 - std::cos(1.3)) - lattice_sum(a1, 1.3, 100000)) <= 1e-6);
    for (double x : {0.1, 1.0, 2.0}) {
        CHECK(lattice_sum(a1, x, 10000) == doctest::Approx(1.0 / (1.0 - std::cos(x))).epsilon(1e-9));
        CHECK(lattice_sum(a2, x, 10000) == doctest::Approx(std::pow(1.0 - std::cos(x), -2.0)).epsilon(1e-9));
    }
}

TEST_CASE("v_t degree and the first slice") {
    auto prof = shared_bump_profile(0.25);
    WeightFamily fam(gff_params(3), prof);
    CHECK(fam.vt_unit(10.5).degree() <= 10);
    Poly v1 = fam.vt_polynomial(1.0);
    CHECK(v1.degree() == 0);
    double expect = 0.0;
    for (int j = 0; j < fam.params().p; ++j) expect += fam.channel_prefactor(j) * prof->phi_sq_hat_at(0.0);
    CHECK(v1[0] == doctest::Approx(expect).epsilon(1e-13));
    for (double t : {1.0, 2.5, 7.25, 33.0}) CHECK(fam.nonneg_margin(t) >= -1e-10);
}

TEST_CASE("small-t weights") {
    auto prof = shared_bump_profile(0.25);
    WeightFamily fam(gff_params(3), prof);
    for (double t : {0.1, 0.5, 0.9}) {
        CHECK(fam.iota(t) == doctest::Approx(2.0 * (1.0 - t)).epsilon(1e-14));
        CHECK(fam.small_t_weight(t) == doctest::Approx((fam.wbar1() + fam.Gamma() * 2.0 * (1.0 - t)) / t).epsilon(1e-14));
    }
    CHECK(fam.iota(1.0) == 0.0);
    CHECK(fam.small_t_weight(1.0 - 1e-12) == doctest::Approx(fam.wbar1()).epsilon(1e-9));
    for (const WeightParams& wp : {gff_params(3), membrane_params(5)}) {
        WeightFamily f(wp, prof);
        const int p = wp.p;
        double q = adaptive_simpson([&](double t) { return std::pow(t, 2 * p - 1) * f.small_t_weight(t); }, 1e-12,
                                    1.0 - 1e-12, 1e-12);
        CHECK(q == doctest::Approx(f.small_t_mass()).epsilon(1e-8));
    }
}

TEST_CASE("certificates in the spectral variable") {
    auto prof = shared_bump_profile(0.25);
    WeightFamily fam(gff_params(3), prof);
    SosQuadruple half = fam.aj_family(0.5);
    CHECK(half.a1.coeffs().size() == 1);
    CHECK(half.a1[0] == doctest::Approx(std::sqrt(fam.small_t_weight(0.5))).epsilon(1e-15));
    CHECK(half.a2.is_zero());
    CHECK(half.a3.is_zero());
    CHECK(half.a4.is_zero());

    const double c = fam.c();
    for (double t : {2.0, 8.0, 13.5}) {
        SosQuadruple q = fam.aj_family(t);
        Poly v = fam.vt_polynomial(t);
        const int ft = static_cast<int>(std::floor(t));
        CHECK(q.a1.degree() <= ft);
        CHECK(q.a2.degree() <= ft);
        CHECK(q.a3.degree() <= ft - 1);
        CHECK(q.a4.degree() <= ft - 1);
        double vmax = 0.0, res = 0.0;
        for (int i = 0; i < 1000; ++i) {
            double mu = c * i / 999.0;
            double b1 = q.a1(mu), b2 = q.a2(mu), b3 = q.a3(mu), b4 = q.a4(mu);
            double rebuilt = b1 * b1 + b2 * b2 + (c - mu) * (b3 * b3 + b4 * b4);
            vmax = std::max(vmax, std::abs(v(mu)));
            res = std::max(res, std::abs(rebuilt - v(mu)));
        }
        CHECK(res <= 1e-8 * vmax);
    }
}

TEST_CASE("continuum weights") {
    auto prof = shared_bump_profile(0.5);
    for (double gamma : {1.0, 0.5}) {
        const double c0 = c0_constant(*prof, gamma);
        const double e = (2.0 - gamma) / gamma;
        for (double lam : {0.5, 1.0, 2.0}) {
            double top = prof->s_max / std::pow(lam, gamma / 2.0);
            double m = composite_gauss(
                [&](double t) {
                    double w = wtilde(lam, t, gamma, *prof, c0);
                    return std::pow(t, e) * w * w;
                },
                0.0, top, 256);
            CHECK(lam * m == doctest::Approx(1.0).epsilon(1e-6));
        }
        for (double t : {0.1, 1.0, 3.0})
            for (double lam : {0.01, 0.7, 5.0}) {
                CHECK(wtilde(lam, t, gamma, *prof, c0) >= 0.0);
                const double s = 1.7;
                CHECK(wtilde(lam, t, gamma, *prof, c0) ==
                      doctest::Approx(wtilde(lam * std::pow(s, -2.0 / gamma), t * s, gamma, *prof, c0)).epsilon(1e-12));
            }
    }
}

TEST_CASE("a wide bump breaks nonnegativity") {
    WeightFamily wide(gff_params(3), shared_bump_profile(0.5));
    bool negative = false;
    for (int i = 4; i <= 64 * 4; ++i) negative |= wide.nonneg_margin(i / 4.0) < -1e-10;
    CHECK(negative);
    CHECK_THROWS_AS(wide.vt_polynomial(10.211324865405187), NumericalError);
}
