#include "frd/lattice.hpp"
#include "frd/oracle.hpp"
#include "frd/quadrature.hpp"

#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace frd;

namespace {

std::shared_ptr<const WeightFamily> gff_family(int d) {
    return std::make_shared<WeightFamily>(gff_params(d), shared_bump_profile(0.25));
}

// sum over a box wide enough for both fields; value() is 0 outside each box
double inner(const LatticeField& a, const LatticeField& b) {
    const int R = std::max(a.radius(), b.radius());
    LatticeField box(a.dim(), 1, R);
    double s = 0.0;
    for (std::size_t i = 0; i < box.sites(); ++i) {
        Site x = box.coords(i);
        for (int ch = 0; ch < a.channels(); ++ch) s += a.value(ch, x) * b.value(ch, x);
    }
    return s;
}

LatticeField random_field(int d, int radius, int support, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    LatticeField f(d, 1, radius);
    for (std::size_t i = 0; i < f.sites(); ++i) {
        int l1 = 0;
        for (int v : f.coords(i)) l1 += std::abs(v);
        if (l1 <= support) f.channel(0)[i] = u(rng);
    }
    f.set_support(support);
    return f;
}

int l1(const Site& x) {
    int s = 0;
    for (int v : x) s += std::abs(v);
    return s;
}

}  // namespace

TEST_CASE("stencil polynomials on a delta") {
    ModelSpec s2 = ModelSpec::make(Model::Gff, 2);
    LatticeField delta = LatticeField::delta(2);
    LatticeField same = apply_stencil_poly(s2, Poly::constant(1.0), delta);
    CHECK(same.value(0, {0, 0}) == 1.0);
    CHECK(same.value(0, {1, 0}) == 0.0);

    LatticeField lap = apply_stencil_poly(s2, Poly::monomial(1), delta);
    CHECK(lap.value(0, {0, 0}) == 4.0);
    for (Site x : {Site{1, 0}, Site{-1, 0}, Site{0, 1}, Site{0, -1}}) CHECK(lap.value(0, x) == -1.0);
    CHECK(lap.value(0, {1, 1}) == 0.0);

    // T_3(1 - m / 2B) against a dense periodic matrix polynomial on 9^3
    ModelSpec s3 = ModelSpec::make(Model::Gff, 3);
    Poly b = poly_compose_affine(chebyshev_T(3), 1.0, -1.0 / (2.0 * s3.B));
    LatticeField got = apply_stencil_poly(s3, b, LatticeField::delta(3));
    const int side = 9;
    Eigen::MatrixXd M = periodic_stencil_matrix(3, side);
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(M.rows());
    e0(periodic_index({0, 0, 0}, side)) = 1.0;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(M.rows());
    for (int k = b.degree(); k >= 0; --k) y = M * y + b[k] * e0;
    double worst = 0.0;
    for (int i = 0; i < static_cast<int>(y.size()); ++i) {
        Site x{i % side, (i / side) % side, i / (side * side)};
        for (int& v : x)
            if (v > side / 2) v -= side;
        worst = std::max(worst, std::abs(got.value(0, x) - y(i)));
    }
    CHECK(worst <= 1e-13);
}

TEST_CASE("the R operator") {
    ModelSpec g = ModelSpec::make(Model::Gff, 3);
    LatticeField r = apply_R(g, LatticeField::delta(3));
    CHECK(r.value(0, {0, 0, 0}) == doctest::Approx(2.0 * std::sqrt(3.0)).epsilon(1e-14));
    ModelSpec m = ModelSpec::make(Model::Membrane, 3);
    LatticeField rm = apply_R(m, LatticeField::delta(3));
    CHECK(rm.value(0, {0, 0, 0}) == doctest::Approx(std::sqrt(4.0 * (std::sqrt(2.0) - 1.0) * 3.0)).epsilon(1e-13));

    std::mt19937_64 rng(17);
    for (int d : {2, 3}) {
        ModelSpec spec = ModelSpec::make(Model::Gff, d);
        for (int trial = 0; trial < 25; ++trial) {
            LatticeField u = random_field(d, 3, 2, rng), v = random_field(d, 3, 2, rng);
            double lhs = inner(apply_R(spec, u), apply_R(spec, v));
            double rhs = spec.c * inner(u, v) - inner(u, apply_M(spec, v));
            double scale = spec.c * std::sqrt(inner(u, u) * inner(v, v));
            CHECK(std::abs(lhs - rhs) <= 1e-10 * scale);
            // adjoint pairing
            LatticeField eta = apply_R(spec, v);
            CHECK(inner(apply_R(spec, u), eta) ==
                  doctest::Approx(inner(u, apply_R_adjoint(spec, eta))).epsilon(1e-12));
        }
    }
}

TEST_CASE("slices below t = 1 are a delta in the first channel") {
    ModelSpec spec = ModelSpec::make(Model::Gff, 3);
    auto fam = gff_family(3);
    for (double t : {0.25, 0.5, 0.9}) {
        KernelSlice ks = kernel_slice(t, spec, *fam);
        double other = 0.0;
        for (int ch = 0; ch < ks.field.channels(); ++ch)
            for (std::size_t i = 0; i < ks.field.sites(); ++i)
                if (!(ch == 0 && l1(ks.field.coords(i)) == 0)) other = std::max(other, std::abs(ks.field.channel(ch)[i]));
        CHECK(other == 0.0);
        const double q0 = ks.field.value(0, {0, 0, 0});
        CHECK(q0 * q0 == doctest::Approx(t * fam->small_t_weight(t)).epsilon(1e-13));
    }
}

TEST_CASE("slice at t = 6: range and functional calculus") {
    ModelSpec spec = ModelSpec::make(Model::Gff, 3);
    auto fam = gff_family(3);
    const double t = 6.0;
    KernelSlice ks = kernel_slice(t, spec, *fam);
    for (int ch = 0; ch < ks.field.channels(); ++ch)
        for (std::size_t i = 0; i < ks.field.sites(); ++i)
            if (l1(ks.field.coords(i)) >= 7) CHECK(ks.field.channel(ch)[i] == 0.0);
    CHECK(ks.support <= 6);

    // sum_j q * q (x) = t^(2p-1) w_t(L) (0, x); the right side has range < 12 so an 13^3 box does not wrap
    const int side = 13;
    Eigen::MatrixXd F = dense_functional_calculus(spec, [&](double lam) { return t * fam->wbar(t, lam); }, side);
    const std::size_t o = periodic_index({0, 0, 0}, side);
    double worst = 0.0, top = 0.0;
    for (const Site& x : lag_representatives(3, 4)) {
        double a = slice_autocorrelation(ks, x);
        double b = F(o, periodic_index(x, side));
        worst = std::max(worst, std::abs(a - b));
        top = std::max(top, std::abs(b));
    }
    CHECK(worst <= 1e-8 * top);
}

TEST_CASE("stated support radii hold for every slice") {
    ModelSpec spec = ModelSpec::make(Model::Gff, 3);
    auto fam = gff_family(3);
    SliceBankOptions opt;
    opt.lag_radius = 2;
    SliceBank bank = build_slice_bank(spec, *fam, unit_scale_grid(32), opt);
    CHECK(bank.slices.size() == 49);
    for (const auto& s : bank.slices) {
        const int ct = static_cast<int>(std::ceil(s.t - 1e-12));
        CHECK(s.support <= 33);
        for (int ch = 0; ch < 2; ++ch) CHECK(s.channel_support[ch] <= ct);
        for (int ch = 2; ch < spec.channels(); ++ch) CHECK(s.channel_support[ch] <= (ct - 1) + 1);
        // the integrand at the origin is a sum of squares
        CHECK(s.lag_values[bank.lag_index.at(Site{0, 0, 0})] >= 0.0);
    }
}

TEST_CASE("scale grids integrate constants") {
    ScaleGrid u = unit_scale_grid(32);
    double w = 0.0;
    for (const auto& n : u.nodes) w += n.weight;
    CHECK(w == doctest::Approx(31.0).epsilon(1e-13));
    ScaleGrid lg = log_scale_grid(32.0, 64);
    double wl = 0.0;
    for (const auto& n : lg.nodes) wl += n.weight;
    CHECK(wl == doctest::Approx(31.0).epsilon(1e-6));
    CHECK_THROWS(log_scale_grid(32.0, 63));
}

TEST_CASE("spectral-only norms match real-space norms") {
    ModelSpec spec = ModelSpec::make(Model::Gff, 3);
    auto fam = gff_family(3);
    for (double t : {1.5, 4.0, 9.25}) {
        SlicePolys sp = slice_polys(t, spec, *fam);
        KernelSlice ks = kernel_slice(sp, spec);
        std::vector<double> n2 = spectral_channel_norms(sp, spec);
        for (int ch = 0; ch < spec.channels(); ++ch)
            CHECK(std::abs(n2[ch] - ks.field.norm2(ch)) <= 1e-10 * std::max(1e-300, ks.field.norm2(0) + ks.field.norm2(2)));
    }
}

TEST_CASE("reconstruction is even in the lag") {
    ModelSpec spec = ModelSpec::make(Model::Gff, 3);
    auto fam = gff_family(3);
    SliceBankOptions opt;
    opt.lag_radius = 2;
    SliceBank bank = build_slice_bank(spec, *fam, unit_scale_grid(8), opt);
    std::vector<Site> xs{{1, 0, 0}, {-1, 0, 0}, {1, -2, 1}, {-1, 2, -1}, {0, 2, 2}, {0, -2, -2}};
    auto g = greens_reconstruct(bank, xs);
    CHECK(g.at(xs[0]).value == g.at(xs[1]).value);
    CHECK(g.at(xs[2]).value == g.at(xs[3]).value);
    CHECK(g.at(xs[4]).value == g.at(xs[5]).value);
    CHECK_THROWS_AS(greens_reconstruct(bank, {{3, 0, 0}}), std::out_of_range);
}

TEST_CASE("flattened scalar kernel") {
    ModelSpec spec = ModelSpec::make(Model::Gff, 3);
    auto fam = gff_family(3);
    SliceBankOptions opt;
    opt.lag_radius = 1;
    SliceBank bank = build_slice_bank(spec, *fam, unit_scale_grid(8), opt);
    const double offset = ScalarKernel::data_offset(bank);
    ScalarKernel sk(spec, fam, offset);
    const int K = sk.cycle();

    SUBCASE("vanishes up to the offset, which is at least 1") {
        CHECK(offset >= 1.0);
        for (double T : {0.0, 0.5, 1.0, offset}) CHECK(sk.value({0, 0, 0}, T) == 0.0);
    }
    SUBCASE("each piece maps affinely onto its unit interval") {
        for (int n : {0, 3}) {
            for (int j : {0, 4, K - 1}) {
                const double a = sk.piece_start(n, j), b = sk.piece_start(n, j + 1);
                for (double f : {0.0, 0.25, 0.999}) {
                    auto p = sk.locate(a + f * (b - a) + 1e-12);
                    REQUIRE(p);
                    CHECK(p->interval == n);
                    CHECK(p->channel == j);
                    CHECK(p->tau == doctest::Approx(n + f).epsilon(1e-9));
                }
            }
        }
    }
    SUBCASE("pieces fit inside |x| <= T / 2") {
        const double cell = 0.5 * std::sqrt(3.0);
        for (const auto& s : bank.slices)
            for (int j = 0; j < K; ++j)
                if (s.channel_support[j] >= 0) CHECK(s.channel_support[j] + cell <= sk.piece_start(s.interval, j) / 2.0 + 1e-12);
    }
    SUBCASE("mass of a piece equals the channel integral over its interval") {
        const GaussRule& g = gauss_legendre(3);
        for (int n : {1, 2}) {
            for (int j : {0, 1, 2}) {
                const double a = sk.piece_start(n, j), b = sk.piece_start(n, j + 1);
                double flat = 0.0, direct = 0.0;
                for (int i = 0; i < 3; ++i) {
                    const double T = a + 0.5 * (b - a) * (g.x[i] + 1.0);
                    double sum = 0.0;
                    LatticeField box(3, 1, n + 2);
                    for (std::size_t k = 0; k < box.sites(); ++k) {
                        double v = sk.value(box.coords(k), T);
                        sum += v * v;
                    }
                    flat += 0.5 * (b - a) * g.w[i] * sum;
                    const double tau = n + 0.5 * (g.x[i] + 1.0);
                    direct += 0.5 * g.w[i] * kernel_slice(tau, spec, *fam).field.norm2(j);
                }
                CHECK(flat == doctest::Approx(direct).epsilon(1e-12));
            }
        }
    }
    SUBCASE("total flattened mass equals the unflattened origin value") {
        FlatMassProfile prof = flat_mass_profile(bank, offset);
        double total = 0.0;
        for (double m : prof.masses) total += m;
        auto g = greens_reconstruct(bank, {{0, 0, 0}});
        CHECK(total == doctest::Approx(g.at({0, 0, 0}).quadrature).epsilon(1e-6));
        auto curve = flat_tail_curve(prof, 0.0);
        for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].second <= curve[i - 1].second);
    }
}
