#include "frd/continuum.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>

using namespace frd;

namespace {

constexpr double kPi = std::numbers::pi;

double sphere_area(int d) { return 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d); }

// int_{R^d} f over a radial table, trapezoid in r
double radial_integral(const std::vector<double>& f, double step, int d) {
    double s = 0.0;
    for (std::size_t i = 1; i < f.size(); ++i) {
        double r0 = (i - 1) * step, r1 = i * step;
        s += 0.5 * step * (f[i - 1] * std::pow(r0, d - 1) + f[i] * std::pow(r1, d - 1));
    }
    return sphere_area(d) * s;
}

}  // namespace

TEST_CASE("radial transforms of Gaussians") {
    for (int d : {3, 5}) {
        auto f = [](double s) { return std::exp(-0.5 * s * s); };
        for (double rho : {0.0, 0.7, 2.0}) {
            double expect = std::pow(2.0 * kPi, -0.5 * d) * std::exp(-0.5 * rho * rho);
            CHECK(radial_inverse_transform(f, d, rho, 12.0) == doctest::Approx(expect).epsilon(1e-9));
        }
    }
    const double step = 0.01;
    std::vector<double> g(1001);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::exp(-0.5 * std::pow(i * step, 2));
    auto conv = radial_convolve(g, g, step, 3, 300);
    for (std::size_t i : {0u, 100u, 250u})
        CHECK(conv[i] == doctest::Approx(std::pow(kPi, 1.5) * std::exp(-0.25 * std::pow(i * step, 2))).epsilon(1e-4));
}

TEST_CASE("continuum Green's functions") {
    CHECK(continuum_green(3, 1, 2.0) == doctest::Approx(1.0 / (8.0 * kPi)).epsilon(1e-14));
    // (-Delta)^2 in d = 5 is 1 / (16 pi^2 r)
    const double r = 1.7;
    CHECK(continuum_green(5, 2, r) == doctest::Approx(1.0 / (2.0 * (5 - 2) * (5 - 4) * sphere_area(5) * r)).epsilon(1e-12));
}

TEST_CASE("kernels have compact support and scale with t") {
    auto prof = shared_bump_profile(0.5);
    for (double gamma : {1.0, 0.5}) {
        const int d = gamma == 1.0 ? 3 : 5;
        RadialKernel q1 = radial_kernel(1.0, d, gamma, prof);
        CHECK(q1.value(0.0) > 0.0);
        for (double t : {2.0, 8.0, 32.0}) {
            RadialKernel qt = radial_kernel(t, d, gamma, prof);
            CHECK(qt.support == doctest::Approx(t));
            CHECK(qt.leakage() <= 1e-6);
            CHECK(qt.half_radius() / q1.half_radius() == doctest::Approx(t).epsilon(1e-9));
            // the autocorrelation at 0 is the squared norm
            auto sq = radial_shape(prof, d, 2);
            CHECK(kernel_autocorrelation(t, d, gamma, c0_constant(*prof, gamma), *sq, 0.0) ==
                  doctest::Approx(qt.l2_norm2()).epsilon(1e-4));
            CHECK(kernel_autocorrelation(t, d, gamma, c0_constant(*prof, gamma), *sq, 0.0) > 0.0);
        }
    }
}

TEST_CASE("mollification") {
    auto prof = shared_bump_profile(0.5);
    RadialKernel q = radial_kernel(4.0, 3, 1.0, prof);
    Mollifier eta(3, 0.1);
    CHECK(radial_integral([&] {
              std::vector<double> v(2001);
              for (std::size_t i = 0; i < v.size(); ++i) v[i] = eta.value(i * 0.1 / 2000);
              return v;
          }(), 0.1 / 2000, 3) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(eta.value(0.1) == 0.0);

    RadialKernel m = mollify(q, eta);
    CHECK(m.support == doctest::Approx(q.support + 0.1));
    CHECK(m.leakage() <= 1e-6);
    // L2 distance to the unmollified kernel
    std::vector<double> diff(q.values.size());
    std::vector<double> sq(q.values.size());
    for (std::size_t i = 0; i < diff.size(); ++i) {
        double r = i * q.r_step;
        diff[i] = std::pow(m.value(r) - q.value(r), 2);
        sq[i] = q.values[i] * q.values[i];
    }
    CHECK(std::sqrt(radial_integral(diff, q.r_step, 3) / radial_integral(sq, q.r_step, 3)) <= 0.02);
    // mass is preserved by a unit-mass mollifier
    std::vector<double> mv(q.values.size());
    for (std::size_t i = 0; i < mv.size(); ++i) mv[i] = m.value(i * q.r_step);
    CHECK(radial_integral(mv, q.r_step, 3) == doctest::Approx(radial_integral(q.values, q.r_step, 3)).epsilon(1e-3));
}

TEST_CASE("reconstruction of the continuum Green's function") {
    auto prof = shared_bump_profile(0.5);
    std::vector<double> rs;
    for (int i = 0; i <= 12; ++i) rs.push_back(1.0 + 0.25 * i);
    for (auto [d, gamma, p] : {std::tuple{3, 1.0, 1}, std::tuple{5, 0.5, 2}}) {
        auto rec = continuum_reconstruct(d, gamma, prof, rs);
        double prev = INFINITY;
        for (double r : rs) {
            const auto& v = rec.at(r);
            CHECK(v.value / continuum_green(d, p, r) == doctest::Approx(1.0).epsilon(2e-2));
            CHECK(v.value <= prev);
            CHECK(v.tail >= 0.0);
            prev = v.value;
        }
    }
}
