#include "frd/oracle.hpp"

#include "frd/error.hpp"
#include "frd/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace frd {

namespace {

constexpr double kPi = std::numbers::pi;

// pi^-d int over the positive orthant of exp(-|k|^2 / 2 s^2) |k|^(-2p)
double subtracted_closed_form(int d, int p, double s) {
    const double a = 0.5 * (d - 2 * p);
    const double sphere = 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d);
    const double radial = 0.5 * std::pow(2.0 * s * s, a) * std::tgamma(a);
    return std::pow(kPi, -d) * sphere / std::ldexp(1.0, d) * radial;
}

// G is even in each coordinate and symmetric under permutations
Site symmetric_key(const Site& x) {
    Site c(x.size());
    std::transform(x.begin(), x.end(), c.begin(), [](int v) { return std::abs(v); });
    std::sort(c.begin(), c.end());
    return c;
}

}  // namespace

double stencil_symbol(const std::vector<double>& k) {
    double s = 0.0;
    for (double v : k) s += 4.0 * std::sin(0.5 * v) * std::sin(0.5 * v);  // 2 (1 - cos v), no cancellation
    return s;
}

std::vector<double> lattice_spectral_integral(int d, const std::vector<Site>& xs,
                                              const std::function<double(const std::vector<double>&)>& F,
                                              double amp, int p, const SpectralRule& rule) {
    if (d < 1) throw std::invalid_argument("lattice_spectral_integral: d >= 1");
    if (amp != 0.0 && d <= 2 * p) throw std::invalid_argument("lattice_spectral_integral: singularity not integrable");
    int xmax = 0;
    for (const Site& x : xs) {
        if (static_cast<int>(x.size()) != d) throw std::invalid_argument("lattice_spectral_integral: lag dimension");
        for (int v : x) xmax = std::max(xmax, std::abs(v));
    }
    const GaussRule& g = gauss_legendre(rule.order);
    const int n = rule.order;
    const double s2 = 2.0 * rule.cutoff * rule.cutoff;
    std::vector<double> acc(xs.size(), 0.0);
    double sub_acc = 0.0;
    std::vector<double> k(d);
    std::vector<std::vector<double>> cosx(d, std::vector<double>(xmax + 1));
    std::vector<int> idx(d);

    // One cube [lo_i, lo_i + side]^d with tensor Gauss nodes.
    auto cell = [&](const std::vector<double>& lo, double side) {
        const double half = 0.5 * side;
        std::fill(idx.begin(), idx.end(), 0);
        while (true) {
            double w = 1.0;
            double r2 = 0.0;
            for (int i = 0; i < d; ++i) {
                k[i] = lo[i] + half * (g.x[idx[i]] + 1.0);
                w *= half * g.w[idx[i]];
                r2 += k[i] * k[i];
            }
            double f = F(k);
            double sub = amp != 0.0 ? amp * std::exp(-r2 / s2) / std::pow(r2, p) : 0.0;
            sub_acc += w * sub;
            for (int i = 0; i < d; ++i) {
                // cos(m k) by the Chebyshev recurrence
                double c1 = std::cos(k[i]);
                cosx[i][0] = 1.0;
                if (xmax >= 1) cosx[i][1] = c1;
                for (int m = 2; m <= xmax; ++m) cosx[i][m] = 2.0 * c1 * cosx[i][m - 1] - cosx[i][m - 2];
            }
            const double wf = w * f;
            for (std::size_t l = 0; l < xs.size(); ++l) {
                double c = 1.0;
                for (int i = 0; i < d; ++i) c *= cosx[i][std::abs(xs[l][i])];
                acc[l] += wf * c;
            }
            int j = 0;
            for (; j < d; ++j) {
                if (++idx[j] < n) break;
                idx[j] = 0;
            }
            if (j == d) break;
        }
    };

    std::vector<double> lo(d);
    double outer = kPi;
    for (int level = 0; level < rule.levels; ++level) {
        const double inner = 0.5 * outer;
        // 2^d - 1 subcubes of side `inner` making up [0, outer]^d \ [0, inner]^d
        for (int mask = 1; mask < (1 << d); ++mask) {
            for (int i = 0; i < d; ++i) lo[i] = (mask >> i) & 1 ? inner : 0.0;
            cell(lo, inner);
        }
        outer = inner;
    }
    std::fill(lo.begin(), lo.end(), 0.0);
    cell(lo, outer);

    const double norm = std::pow(kPi, -d);
    const double closed = amp != 0.0 ? amp * subtracted_closed_form(d, p, rule.cutoff) : 0.0;
    std::vector<double> out(xs.size());
    for (std::size_t l = 0; l < xs.size(); ++l) out[l] = norm * (acc[l] - sub_acc) + closed;
    return out;
}

GreensOracle::GreensOracle(const ModelSpec& spec, int order) : spec_(spec), order_(order) {
    if (spec.d <= 2 * spec.p)
        throw std::invalid_argument("GreensOracle: d > 2p required for a finite Green's function");
    if (order_ <= 0) order_ = spec.d <= 3 ? 16 : 8;
}

std::map<Site, OracleValue> GreensOracle::values(const std::vector<Site>& xs) {
    std::vector<Site> todo;
    {
        std::lock_guard<std::mutex> lock(mu_);
        for (const Site& x : xs) {
            Site c = symmetric_key(x);
            if (!cache_.count(c) && std::find(todo.begin(), todo.end(), c) == todo.end()) todo.push_back(c);
        }
    }
    if (!todo.empty()) {
        const int p = spec_.p;
        auto F = [p](const std::vector<double>& k) { return std::pow(stencil_symbol(k), -p); };
        SpectralRule hi, lo;
        hi.order = order_;
        lo.order = std::max(4, order_ * 3 / 4);
        std::vector<double> a = lattice_spectral_integral(spec_.d, todo, F, 1.0, p, hi);
        std::vector<double> b = lattice_spectral_integral(spec_.d, todo, F, 1.0, p, lo);
        std::lock_guard<std::mutex> lock(mu_);
        for (std::size_t i = 0; i < todo.size(); ++i) cache_[todo[i]] = {a[i], std::abs(a[i] - b[i]) + 1e-15 * std::abs(a[i])};
    }
    std::map<Site, OracleValue> out;
    std::lock_guard<std::mutex> lock(mu_);
    for (const Site& x : xs) {
        out[x] = cache_.at(symmetric_key(x));
    }
    return out;
}

OracleValue GreensOracle::value(const Site& x) { return values({x}).at(x); }

OracleValue lattice_green(const ModelSpec& spec, const Site& x) {
    GreensOracle o(spec);
    return o.value(x);
}

double defining_residual(const ModelSpec& spec, GreensOracle& oracle, const Site& x) {
    // (M^p G)(x) by repeated stencil application on the needed neighbourhood
    const int d = spec.d, p = spec.p;
    LatticeField g(d, 1, p);
    std::vector<Site> sites;
    for (std::size_t i = 0; i < g.sites(); ++i) {
        Site y = g.coords(i);
        int l1 = 0;
        for (int v : y) l1 += std::abs(v);
        if (l1 > p) continue;
        for (int j = 0; j < d; ++j) y[j] += x[j];
        sites.push_back(y);
    }
    auto vals = oracle.values(sites);
    std::size_t s = 0;
    for (std::size_t i = 0; i < g.sites(); ++i) {
        Site y = g.coords(i);
        int l1 = 0;
        for (int v : y) l1 += std::abs(v);
        if (l1 > p) continue;
        g.data()[i] = vals.at(sites[s++]).value;
    }
    g.set_support(p);
    // M^p applied at the centre: coefficient of each offset in the stencil power
    LatticeField delta = LatticeField::delta(d, 0);
    Poly mp = Poly::monomial(p);
    LatticeField stencil = apply_stencil_poly(spec, mp, delta, StencilBasis::M);
    double acc = 0.0;
    for (std::size_t i = 0; i < stencil.sites(); ++i) acc += stencil.data()[i] * g.value(0, stencil.coords(i));
    bool origin = std::all_of(x.begin(), x.end(), [](int v) { return v == 0; });
    return acc - (origin ? 1.0 : 0.0);
}

RandomWalkEstimate random_walk_green0(int d, std::uint64_t total_steps, int length, std::uint64_t seed) {
    if (d < 3 || length < 1) throw std::invalid_argument("random_walk_green0: d >= 3, length >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, 2 * d - 1);
    const std::uint64_t walks = std::max<std::uint64_t>(2, total_steps / length);
    double sum = 0.0, sum2 = 0.0;
    std::vector<int> pos(d);
    for (std::uint64_t w = 0; w < walks; ++w) {
        std::fill(pos.begin(), pos.end(), 0);
        int away = 0;  // l1 distance, cheap origin test
        double visits = 1.0;
        for (int s = 0; s < length; ++s) {
            int m = pick(rng);
            int axis = m >> 1;
            int step = (m & 1) ? 1 : -1;
            away += std::abs(pos[axis] + step) - std::abs(pos[axis]);
            pos[axis] += step;
            if (away == 0) visits += 1.0;
        }
        sum += visits;
        sum2 += visits * visits;
    }
    const double n = static_cast<double>(walks);
    const double mean = sum / n;
    const double var = std::max(0.0, sum2 / n - mean * mean);
    // even-time return probability ~ 2 (d / 2 pi n)^(d/2); integrate beyond the walk length
    const double tail = std::pow(d / (2.0 * kPi), 0.5 * d) * std::pow(static_cast<double>(length), 1.0 - 0.5 * d) /
                        (0.5 * d - 1.0);
    RandomWalkEstimate r;
    r.value = (mean + tail) / (2.0 * d);
    r.stderr = std::sqrt(var / n) / (2.0 * d);
    r.steps = walks * static_cast<std::uint64_t>(length);
    return r;
}

std::vector<double> spectral_tail(const WeightFamily& family, const ModelSpec& spec, double T,
                                  const std::vector<Site>& xs, int order) {
    const int p = spec.p;
    SpectralRule rule;
    rule.order = order > 0 ? order : (spec.d <= 3 ? 16 : 8);
    auto F = [&](const std::vector<double>& k) { return family.tail_mass(std::pow(stencil_symbol(k), p), T); };
    return lattice_spectral_integral(spec.d, xs, F, 1.0, p, rule);
}

std::vector<double> log_lambda_grid(double lo, double hi, int n) {
    if (!(lo > 0) || !(hi > lo) || n < 2) throw std::invalid_argument("log_lambda_grid: 0 < lo < hi, n >= 2");
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
    out.back() = hi;
    return out;
}

PartitionReport scalar_partition_check(const WeightFamily& family, const std::vector<double>& lambdas, int t_max) {
    const int p = family.params().p;
    const GaussRule& g = gauss_legendre(8);
    PartitionReport rep;
    for (double lam : lambdas) {
        if (!(lam > 0) || lam > family.params().B * (1 + 1e-12))
            throw std::invalid_argument("scalar_partition_check: lambda in (0, B]");
        double total = family.small_t_mass();
        for (int n = 1; n < t_max; ++n)
            for (int i = 0; i < 8; ++i) {
                double t = n + 0.5 * (g.x[i] + 1.0);
                total += 0.5 * g.w[i] * std::pow(t, 2 * p - 1) * family.wbar(t, lam);
            }
        total += family.tail_mass(lam, t_max);
        double err = std::abs(lam * total - 1.0);
        rep.lambdas.push_back(lam);
        rep.errors.push_back(err);
        if (err >= rep.max_error) {
            rep.max_error = err;
            rep.worst_lambda = lam;
        }
    }
    return rep;
}

PartitionReport continuum_partition_check(const BumpProfile& profile, double gamma, const std::vector<double>& lambdas) {
    const double pd = 1.0 / gamma;
    const int p = static_cast<int>(std::lround(pd));
    if (std::abs(pd - p) > 1e-12) throw std::invalid_argument("continuum_partition_check: 1/gamma integer");
    const double c0 = c0_constant(profile, gamma);
    PartitionReport rep;
    for (double lam : lambdas) {
        const double scale = std::pow(lam, 0.5 * gamma);
        const double t_end = profile.s_max / scale;
        // panels follow the profile's own scale so every lambda is resolved alike
        auto f = [&](double t) {
            double w = wtilde(lam, t, gamma, profile, c0);
            return std::pow(t, 2 * p - 1) * w * w;
        };
        int panels = std::max(64, static_cast<int>(profile.s_max * profile.h * 8.0));
        double total = composite_gauss(f, 0.0, t_end, panels, 8);
        double err = std::abs(lam * total - 1.0);
        rep.lambdas.push_back(lam);
        rep.errors.push_back(err);
        if (err >= rep.max_error) {
            rep.max_error = err;
            rep.worst_lambda = lam;
        }
    }
    return rep;
}

std::size_t periodic_index(const Site& x, int side) {
    std::size_t idx = 0, stride = 1;
    for (int v : x) {
        int m = ((v % side) + side) % side;
        idx += static_cast<std::size_t>(m) * stride;
        stride *= side;
    }
    return idx;
}

Eigen::MatrixXd periodic_stencil_matrix(int d, int side) {
    if (side < 3) throw std::invalid_argument("periodic_stencil_matrix: side >= 3");
    std::size_t n = 1;
    for (int i = 0; i < d; ++i) n *= side;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    Site x(d, 0);
    for (std::size_t a = 0; a < n; ++a) {
        std::size_t r = a;
        for (int i = 0; i < d; ++i) {
            x[i] = static_cast<int>(r % side);
            r /= side;
        }
        m(a, a) += 2.0 * d;
        for (int i = 0; i < d; ++i)
            for (int s : {-1, 1}) {
                Site y = x;
                y[i] += s;
                m(a, periodic_index(y, side)) -= 1.0;
            }
    }
    return m;
}

Eigen::MatrixXd dense_functional_calculus(const ModelSpec& spec, const std::function<double(double)>& F, int side) {
    std::size_t n = 1;
    for (int i = 0; i < spec.d; ++i) n *= side;
    if (n > 14641) throw std::invalid_argument("dense_functional_calculus: box too large");
    Eigen::MatrixXd m = periodic_stencil_matrix(spec.d, side);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw NumericalError("dense_functional_calculus: eigensolver failed");
    Eigen::VectorXd f(n);
    for (std::size_t i = 0; i < n; ++i) {
        double mu = std::max(0.0, es.eigenvalues()[i]);
        f[i] = F(std::pow(mu, spec.p));
    }
    return es.eigenvectors() * f.asDiagonal() * es.eigenvectors().transpose();
}

void write_oracle_csv(const std::string& path, const std::map<Site, OracleValue>& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_oracle_csv: cannot open " + path);
    int d = table.empty() ? 0 : static_cast<int>(table.begin()->first.size());
    for (int i = 0; i < d; ++i) out << "x" << i + 1 << ",";
    out << "value,error\n";
    out.precision(17);
    for (const auto& [x, v] : table) {
        for (int c : x) out << c << ",";
        out << v.value << "," << v.error << "\n";
    }
}

}  // namespace frd
