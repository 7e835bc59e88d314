#include "frd/lattice.hpp"
#include "frd/oracle.hpp"

#include "doctest.h"

#include <cmath>

using namespace frd;

namespace {
constexpr double kWatsonOrigin = 0.2527310098586630;  // G(0) of the nearest-neighbour Laplacian on Z^3
}

TEST_CASE("lattice Green's function of the Laplacian in d = 3") {
    ModelSpec spec = ModelSpec::make(Model::Gff, 3);
    GreensOracle oracle(spec);
    OracleValue g0 = oracle.value({0, 0, 0});
    CHECK(std::abs(g0.value - kWatsonOrigin) <= 1e-9);
    CHECK(g0.error <= 1e-8);

    // lattice symmetries
    double a = oracle.value({1, 0, 0}).value;
    CHECK(oracle.value({0, 1, 0}).value == doctest::Approx(a).epsilon(1e-12));
    CHECK(oracle.value({0, 0, -1}).value == doctest::Approx(a).epsilon(1e-12));
    // G(e1) = G(0) - 1/6 from the defining equation at the origin
    CHECK(a == doctest::Approx(kWatsonOrigin - 1.0 / 6.0).epsilon(1e-9));

    SUBCASE("defining equation on a 5^3 patch") {
        double worst = 0.0;
        for (int i = -2; i <= 2; ++i)
            for (int j = -2; j <= 2; ++j)
                for (int k = -2; k <= 2; ++k) worst = std::max(worst, std::abs(defining_residual(spec, oracle, {i, j, k})));
        CHECK(worst <= 1e-6);
    }
    SUBCASE("independent random walk estimate") {
        RandomWalkEstimate rw = random_walk_green0(3, 20'000'000, 2000, 12345);
        CHECK(rw.stderr > 0.0);
        CHECK(std::abs(rw.value - kWatsonOrigin) <= 4.0 * rw.stderr + 1e-4);
    }
}

TEST_CASE("bilaplacian Green's function in d = 5") {
    ModelSpec spec = ModelSpec::make(Model::Membrane, 5);
    GreensOracle oracle(spec);
    OracleValue g0 = oracle.value(Site(5, 0));
    CHECK(g0.value > 0.0);
    CHECK(std::abs(defining_residual(spec, oracle, Site(5, 0))) <= 1e-5);
}

TEST_CASE("spectral quadrature is converged") {
    ModelSpec spec = ModelSpec::make(Model::Gff, 3);
    std::vector<Site> xs{{0, 0, 0}, {1, 1, 0}, {3, 1, 0}};
    auto F = [](const std::vector<double>& k) { return 1.0 / stencil_symbol(k); };
    SpectralRule coarse, fine;
    coarse.order = 10;
    fine.order = 16;
    auto a = lattice_spectral_integral(3, xs, F, 1.0, 1, coarse);
    auto b = lattice_spectral_integral(3, xs, F, 1.0, 1, fine);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-9);
    CHECK(b[0] == doctest::Approx(kWatsonOrigin).epsilon(1e-10));
}

TEST_CASE("dense functional calculus") {
    for (Model m : {Model::Gff, Model::Membrane}) {
        ModelSpec spec = ModelSpec::make(m, 2);
        const int side = 6;
        Eigen::MatrixXd M = periodic_stencil_matrix(2, side);
        Eigen::MatrixXd L = spec.p == 1 ? M : Eigen::MatrixXd(M * M);
        CHECK((dense_functional_calculus(spec, [](double x) { return x; }, side) - L).cwiseAbs().maxCoeff() <= 1e-11);
        Eigen::MatrixXd I = Eigen::MatrixXd::Identity(M.rows(), M.cols());
        CHECK((dense_functional_calculus(spec, [](double) { return 1.0; }, side) - I).cwiseAbs().maxCoeff() <= 1e-12);
    }
    CHECK(periodic_index({-1, 0}, 5) == periodic_index({4, 5}, 5));
}

TEST_CASE("w_6 in d = 2 matches the slice autocorrelation") {
    ModelSpec spec = ModelSpec::make(Model::Gff, 2);
    WeightFamily fam(gff_params(2), shared_bump_profile(0.25));
    const double t = 6.0;
    KernelSlice ks = kernel_slice(t, spec, fam);
    const int side = 13;
    Eigen::MatrixXd F = dense_functional_calculus(spec, [&](double lam) { return t * fam.wbar(t, lam); }, side);
    const std::size_t o = periodic_index({0, 0}, side);
    double worst = 0.0;
    for (int i = -4; i <= 4; ++i)
        for (int j = -4; j <= 4; ++j)
            worst = std::max(worst, std::abs(slice_autocorrelation(ks, {i, j}) - F(o, periodic_index({i, j}, side))));
    CHECK(worst <= 1e-9);
}

TEST_CASE("partition of unity") {
    auto prof = shared_bump_profile(0.25);
    SUBCASE("discrete families") {
        for (auto [params, B] : {std::pair{gff_params(3), 12.0}, std::pair{membrane_params(5), 400.0}}) {
            WeightFamily fam(params, prof);
            PartitionReport r = scalar_partition_check(fam, log_lambda_grid(1e-3 * B, B, 50));
            CHECK(r.lambdas.size() == 50);
            CHECK(r.max_error <= 1e-3);
        }
    }
    SUBCASE("continuum families") {
        auto wide = shared_bump_profile(0.5);
        for (double gamma : {1.0, 0.5}) {
            PartitionReport r = continuum_partition_check(*wide, gamma, log_lambda_grid(1e-4, 1e4, 50));
            CHECK(r.max_error <= 1e-6);
        }
    }
    SUBCASE("continuum weights are homogeneous") {
        auto wide = shared_bump_profile(0.5);
        for (double gamma : {1.0, 0.5}) {
            const double c0 = c0_constant(*wide, gamma);
            for (double a : {0.3, 2.0, 7.5})
                for (double t : {0.5, 1.3, 3.0}) {
                    const double lam = 0.8;
                    CHECK(wtilde(a * lam, t, gamma, *wide, c0) ==
                          doctest::Approx(wtilde(lam, std::pow(a, gamma / 2.0) * t, gamma, *wide, c0)).epsilon(1e-12));
                }
        }
    }
}

TEST_CASE("quadrature plus exact tail recovers the Green's function") {
    ModelSpec spec = ModelSpec::make(Model::Gff, 3);
    WeightFamily fam(gff_params(3), shared_bump_profile(0.25));
    std::vector<Site> xs{{0, 0, 0}, {1, 0, 0}};
    auto t16 = spectral_tail(fam, spec, 16.0, xs);
    auto t64 = spectral_tail(fam, spec, 64.0, xs);
    CHECK(t16[0] > t64[0]);
    CHECK(t64[0] > 0.0);
    CHECK(t16[1] < t16[0]);

    SliceBankOptions opt;
    opt.lag_radius = 1;
    SliceBank bank = build_slice_bank(spec, fam, unit_scale_grid(16), opt);
    GreensOptions go;
    for (std::size_t i = 0; i < xs.size(); ++i) go.exact_tail[xs[i]] = t16[i];
    auto g = greens_reconstruct(bank, xs, go);
    GreensOracle oracle(spec);
    for (const Site& x : xs) CHECK(g.at(x).value == doctest::Approx(oracle.value(x).value).epsilon(1e-2));
}
