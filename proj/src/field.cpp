#include "frd/field.hpp"

#include "frd/error.hpp"
#include "frd/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace frd {

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
    constexpr std::uint64_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            k[0] += W0;
            k[1] += W1;
        }
        const std::uint64_t p0 = M0 * c[0];
        const std::uint64_t p1 = M1 * c[2];
        c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    }
    return c;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::array<double, 2> NoiseSource::pair(std::uint64_t sample, int layer, int channel_pair, const Site& y) const {
    if (y.size() > 6) throw std::invalid_argument("NoiseSource: at most 6 coordinates");
    bool inside = override_radius_ >= 0 &&
                  std::all_of(y.begin(), y.end(), [&](int v) { return std::abs(v) <= override_radius_; });
    std::uint64_t h = splitmix64(inside ? override_seed_ : seed_);
    h = splitmix64(h ^ sample);
    h = splitmix64(h ^ ((static_cast<std::uint64_t>(layer) << 32) | static_cast<std::uint32_t>(channel_pair)));
    std::array<std::uint32_t, 4> ctr{0, 0, 0, 0};
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < -32768 || y[i] > 32767) throw std::out_of_range("NoiseSource: coordinate out of range");
        std::uint32_t u = static_cast<std::uint16_t>(static_cast<std::int16_t>(y[i]));
        ctr[i / 2] |= u << (16 * (i % 2));
    }
    auto r = philox4x32(ctr, {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)});
    // two 53-bit uniforms in (0, 1), Box-Muller
    auto uniform = [](std::uint32_t hi, std::uint32_t lo) {
        std::uint64_t v = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
        return (static_cast<double>(v) + 0.5) * 0x1.0p-53;
    };
    const double u1 = uniform(r[0], r[1]);
    const double u2 = uniform(r[2], r[3]);
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    return {rad * std::cos(ang), rad * std::sin(ang)};
}

double NoiseSource::normal(std::uint64_t sample, int layer, int channel, const Site& y) const {
    return pair(sample, layer, channel / 2, y)[channel % 2];
}

std::size_t FieldSample::index(const Site& x) const {
    std::size_t idx = 0, stride = 1;
    for (int i = 0; i < d; ++i) {
        int c = x[i] - lower;
        if (c < 0 || c >= side) throw std::out_of_range("FieldSample: site outside the core box");
        idx += static_cast<std::size_t>(c) * stride;
        stride *= side;
    }
    return idx;
}

Site FieldSample::coords(std::size_t i) const {
    Site x(d);
    for (int k = 0; k < d; ++k) {
        x[k] = static_cast<int>(i % side) + lower;
        i /= side;
    }
    return x;
}

FieldSampler::FieldSampler(const SliceBank& bank, double t_max) : d_(bank.spec.d), t_max_(t_max) {
    if (!(t_max >= 1.0)) throw std::invalid_argument("FieldSampler: t_max >= 1");
    if (t_max > bank.grid.t_max + 1e-12) throw std::invalid_argument("FieldSampler: bank does not reach t_max");
    SamplerStencil base;
    base.layer = 0;
    base.channel = 0;
    base.offsets.push_back(Site(d_, 0));
    base.coeffs.push_back(bank.small_t_value);
    stencils_.push_back(base);
    int layer = 0;
    for (const auto& s : bank.slices) {
        if (s.t >= t_max) continue;
        ++layer;
        if (!s.kernel) throw std::invalid_argument("FieldSampler: slice without a real-space kernel");
        const LatticeField& f = s.kernel->field;
        const double sw = std::sqrt(s.weight);
        for (int ch = 0; ch < f.channels(); ++ch) {
            int r = s.channel_support[ch];
            if (r < 0) continue;
            SamplerStencil st;
            st.layer = layer;
            st.channel = ch;
            st.radius = r;
            const double* v = f.channel(ch);
            for (std::size_t i = 0; i < f.sites(); ++i) {
                if (v[i] == 0.0) continue;
                Site z = f.coords(i);
                int l1 = 0;
                for (int c : z) l1 += std::abs(c);
                if (l1 > r) continue;  // structurally zero; never read
                st.offsets.push_back(z);
                st.coeffs.push_back(sw * v[i]);
            }
            reach_ = std::max(reach_, r);
            stencils_.push_back(std::move(st));
        }
    }
    layers_ = layer + 1;
    grid_ = (bank.grid.unit ? "unit:" : "log:") + std::to_string(bank.grid.nodes.size()) + " nodes, t_max " +
            std::to_string(t_max);
}

double FieldSampler::variance() const {
    double v = 0.0;
    for (const auto& st : stencils_)
        for (double c : st.coeffs) v += c * c;
    return v;
}

FieldSample FieldSampler::sample_box(int side, std::uint64_t sample, const NoiseSource& noise) const {
    if (side < 1) throw std::invalid_argument("sample_box: side >= 1");
    FieldSample out;
    out.d = d_;
    out.side = side;
    out.lower = -side / 2;
    out.seed = noise.seed();
    out.sample = sample;
    out.t_max = t_max_;
    out.grid = grid_;
    std::size_t core = 1, rows = 1;
    for (int i = 0; i < d_; ++i) core *= side;
    rows = core / side;
    out.values.assign(core, 0.0);

    std::size_t k = 0;
    std::vector<double> xi[2];
    Site y(d_);
    while (k < stencils_.size()) {
        // stencils of one (layer, channel pair) share a noise draw
        std::size_t e = k + 1;
        while (e < stencils_.size() && stencils_[e].layer == stencils_[k].layer &&
               stencils_[e].channel / 2 == stencils_[k].channel / 2)
            ++e;
        int pad = 0;
        for (std::size_t s = k; s < e; ++s) pad = std::max(pad, stencils_[s].radius);
        const int n = side + 2 * pad;
        std::size_t total = 1;
        for (int i = 0; i < d_; ++i) total *= n;
        xi[0].resize(total);
        xi[1].resize(total);
        for (std::size_t i = 0; i < total; ++i) {
            std::size_t r = i;
            for (int c = 0; c < d_; ++c) {
                y[c] = static_cast<int>(r % n) + out.lower - pad;
                r /= n;
            }
            auto z = noise.pair(sample, stencils_[k].layer, stencils_[k].channel / 2, y);
            xi[0][i] = z[0];
            xi[1][i] = z[1];
        }
        // noise offset of each core row start, before the stencil shift
        std::vector<std::size_t> row_base(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            std::size_t rr = r, off = pad, stride = n;
            for (int c = 1; c < d_; ++c) {
                off += (rr % side + pad) * stride;
                rr /= side;
                stride *= n;
            }
            row_base[r] = off;
        }
        for (std::size_t s = k; s < e; ++s) {
            const auto& st = stencils_[s];
            const std::vector<double>& src = xi[st.channel % 2];
            for (std::size_t m = 0; m < st.offsets.size(); ++m) {
                std::ptrdiff_t shift = 0, stride = 1;
                for (int c = 0; c < d_; ++c) {
                    shift -= st.offsets[m][c] * stride;
                    stride *= n;
                }
                const double cf = st.coeffs[m];
                for (std::size_t r = 0; r < rows; ++r) {
                    double* dst = out.values.data() + r * side;
                    const double* sp = src.data() + static_cast<std::ptrdiff_t>(row_base[r]) + shift;
                    for (int i = 0; i < side; ++i) dst[i] += cf * sp[i];
                }
            }
        }
        k = e;
    }
    return out;
}

PointSampler::PointSampler(const FieldSampler& sampler, std::vector<Site> sites)
    : sampler_(sampler), sites_(std::move(sites)) {
    for (const Site& x : sites_)
        if (static_cast<int>(x.size()) != sampler.dim()) throw std::invalid_argument("PointSampler: site dimension");
    const auto& st = sampler.stencils();
    std::size_t k = 0;
    while (k < st.size()) {
        std::size_t e = k + 1;
        while (e < st.size() && st[e].layer == st[k].layer && st[e].channel / 2 == st[k].channel / 2) ++e;
        Group g;
        g.layer = st[k].layer;
        g.pair = st[k].channel / 2;
        std::map<Site, std::size_t> where;
        const int gi = static_cast<int>(groups_.size());
        for (std::size_t s = k; s < e; ++s) {
            Term t;
            t.group = gi;
            t.half = st[s].channel % 2;
            t.layer = st[s].layer;
            t.taps.resize(sites_.size());
            for (std::size_t i = 0; i < sites_.size(); ++i)
                for (std::size_t m = 0; m < st[s].offsets.size(); ++m) {
                    Site y = sites_[i];
                    for (std::size_t c = 0; c < y.size(); ++c) y[c] -= st[s].offsets[m][c];
                    auto [it, fresh] = where.emplace(y, g.noise_sites.size());
                    if (fresh) g.noise_sites.push_back(y);
                    t.taps[i].push_back({it->second, st[s].coeffs[m]});
                }
            terms_.push_back(std::move(t));
        }
        groups_.push_back(std::move(g));
        k = e;
    }
}

std::vector<double> PointSampler::evaluate(std::uint64_t sample, const NoiseSource& noise,
                                           std::vector<std::vector<double>>* per_layer) const {
    std::vector<double> out(sites_.size(), 0.0);
    if (per_layer) per_layer->assign(sampler_.layers(), std::vector<double>(sites_.size(), 0.0));
    std::vector<std::vector<double>> xi(2);
    std::size_t term = 0;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        const Group& G = groups_[g];
        xi[0].resize(G.noise_sites.size());
        xi[1].resize(G.noise_sites.size());
        for (std::size_t i = 0; i < G.noise_sites.size(); ++i) {
            auto z = noise.pair(sample, G.layer, G.pair, G.noise_sites[i]);
            xi[0][i] = z[0];
            xi[1][i] = z[1];
        }
        for (; term < terms_.size() && terms_[term].group == static_cast<int>(g); ++term) {
            const Term& t = terms_[term];
            for (std::size_t i = 0; i < sites_.size(); ++i) {
                double acc = out[i];
                double part = 0.0;
                for (const auto& [idx, cf] : t.taps[i]) {
                    acc += cf * xi[t.half][idx];  // same accumulation order as sample_box
                    part += cf * xi[t.half][idx];
                }
                out[i] = acc;
                if (per_layer) (*per_layer)[t.layer][i] += part;
            }
        }
    }
    return out;
}

std::vector<CovarianceEstimate> estimate_covariance(const FieldSampler& sampler, const std::vector<Site>& lags,
                                                    std::uint64_t n_samples, std::uint64_t seed) {
    if (n_samples < 2) throw std::invalid_argument("estimate_covariance: at least two samples");
    std::vector<Site> sites{Site(sampler.dim(), 0)};
    sites.insert(sites.end(), lags.begin(), lags.end());
    PointSampler ps(sampler, sites);
    NoiseSource noise(seed);
    std::vector<double> sum(lags.size(), 0.0), sum2(lags.size(), 0.0);
    for (std::uint64_t s = 0; s < n_samples; ++s) {
        auto v = ps.evaluate(s, noise);
        for (std::size_t l = 0; l < lags.size(); ++l) {
            double p = v[0] * v[l + 1];
            sum[l] += p;
            sum2[l] += p * p;
        }
    }
    // the field is centred by construction, so the product mean is unbiased
    std::vector<CovarianceEstimate> out(lags.size());
    const double n = static_cast<double>(n_samples);
    for (std::size_t l = 0; l < lags.size(); ++l) {
        double m = sum[l] / n;
        double var = std::max(0.0, (sum2[l] / n - m * m) * n / (n - 1.0));
        out[l] = {lags[l], m, std::sqrt(var / n)};
    }
    return out;
}

namespace {

struct UnionFind {
    std::vector<std::size_t> parent, size;
    explicit UnionFind(std::size_t n) : parent(n), size(n, 1) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (size[a] < size[b]) std::swap(a, b);
        parent[b] = a;
        size[a] += size[b];
    }
};

}  // namespace

ProbeResult percolation_probe(const FieldSample& sample, double level) {
    const int d = sample.d, n = sample.side;
    const std::size_t N = sample.values.size();
    std::vector<char> open(N);
    for (std::size_t i = 0; i < N; ++i) open[i] = sample.values[i] >= -level;
    UnionFind uf(N);
    std::size_t stride = 1;
    for (int c = 0; c < d; ++c) {
        for (std::size_t i = 0; i < N; ++i) {
            if (!open[i]) continue;
            if ((i / stride) % n == static_cast<std::size_t>(n - 1)) continue;
            if (open[i + stride]) uf.unite(i, i + stride);
        }
        stride *= n;
    }
    std::vector<char> boundary(N, 0), left(N, 0), right(N, 0);
    ProbeResult res;
    for (std::size_t i = 0; i < N; ++i) {
        if (!open[i]) continue;
        std::size_t r = uf.find(i);
        res.largest_cluster = std::max(res.largest_cluster, uf.size[r]);
        std::size_t rem = i;
        for (int c = 0; c < d; ++c) {
            int v = static_cast<int>(rem % n);
            rem /= n;
            if (v == 0 || v == n - 1) boundary[r] = 1;
            if (c == 0 && v == 0) left[r] = 1;
            if (c == 0 && v == n - 1) right[r] = 1;
        }
    }
    for (std::size_t i = 0; i < N; ++i)
        if (open[i] && uf.parent[i] == i && left[i] && right[i]) res.crossing = true;
    std::size_t o = sample.index(Site(d, 0));
    res.origin_to_boundary = open[o] && boundary[uf.find(o)];
    return res;
}

SweepOutput sweep_levels(const FieldSampler& sampler, const SweepConfig& cfg) {
    if (cfg.levels.empty() || cfg.box_sizes.empty() || cfg.samples < 2)
        throw std::invalid_argument("sweep_levels: levels, box sizes and at least two samples required");
    if (!std::is_sorted(cfg.levels.begin(), cfg.levels.end()))
        throw std::invalid_argument("sweep_levels: levels must increase");
    SweepOutput out;
    NoiseSource noise(cfg.seed);
    const std::size_t L = cfg.levels.size();
    for (int n : cfg.box_sizes) {
        std::vector<double> th(L, 0.0), cr(L, 0.0), ld(L, 0.0), ld2(L, 0.0);
        std::size_t core = 1;
        for (int i = 0; i < sampler.dim(); ++i) core *= n;
        // per-sample indicators first, reduced in sample order afterwards
        std::vector<std::vector<ProbeResult>> probes(cfg.samples);
        parallel_for(cfg.samples, cfg.workers, [&](std::uint64_t s) {
            FieldSample fs = sampler.sample_box(n, (static_cast<std::uint64_t>(n) << 32) | s, noise);
            probes[s].reserve(L);
            for (std::size_t l = 0; l < L; ++l) probes[s].push_back(percolation_probe(fs, cfg.levels[l]));
        });
        for (const auto& ps : probes) {
            bool prev_o = false, prev_c = false;
            bool bad = false;
            for (std::size_t l = 0; l < L; ++l) {
                const ProbeResult& p = ps[l];
                if ((prev_o && !p.origin_to_boundary) || (prev_c && !p.crossing)) bad = true;
                prev_o = p.origin_to_boundary;
                prev_c = p.crossing;
                th[l] += p.origin_to_boundary;
                cr[l] += p.crossing;
                double dens = static_cast<double>(p.largest_cluster) / core;
                ld[l] += dens;
                ld2[l] += dens * dens;
            }
            out.monotonicity_violations += bad;
        }
        const double N = static_cast<double>(cfg.samples);
        for (std::size_t l = 0; l < L; ++l) {
            PercolationResult r;
            r.level = cfg.levels[l];
            r.n = n;
            r.samples = cfg.samples;
            r.theta = th[l] / N;
            r.theta_se = std::sqrt(r.theta * (1.0 - r.theta) / N);
            r.crossing = cr[l] / N;
            r.crossing_se = std::sqrt(r.crossing * (1.0 - r.crossing) / N);
            r.largest_density = ld[l] / N;
            double var = std::max(0.0, ld2[l] / N - r.largest_density * r.largest_density) * N / (N - 1.0);
            r.largest_density_se = std::sqrt(var / N);
            out.results.push_back(r);
        }
    }
    return out;
}

std::pair<double, double> transition_window(const FieldSampler& sampler, int box, const std::vector<double>& coarse,
                                            std::uint64_t samples, std::uint64_t seed, int workers) {
    if (coarse.size() < 3) throw std::invalid_argument("transition_window: at least three levels");
    SweepConfig cfg;
    cfg.levels = coarse;
    cfg.box_sizes = {box};
    cfg.samples = samples;
    cfg.seed = seed;
    cfg.workers = workers;
    SweepOutput sw = sweep_levels(sampler, cfg);
    std::size_t first = coarse.size(), last = 0;
    for (std::size_t l = 0; l < coarse.size(); ++l) {
        const double c = sw.results[l].crossing;
        if (c > 0.0 && first == coarse.size()) first = l;
        if (c < 1.0) last = l;
    }
    if (first == coarse.size()) throw NumericalError("transition_window: no crossing seen in the pilot window");
    const std::size_t lo = first > 0 ? first - 1 : 0;
    const std::size_t hi = std::min(std::max(last + 1, first + 1), coarse.size() - 1);
    return {coarse[lo], coarse[hi]};
}

CrossingEstimate curve_crossing(const std::vector<double>& levels, const std::vector<double>& a,
                                const std::vector<double>& sa, const std::vector<double>& b,
                                const std::vector<double>& sb) {
    const std::size_t n = levels.size();
    if (a.size() != n || b.size() != n || sa.size() != n || sb.size() != n)
        throw std::invalid_argument("curve_crossing: length mismatch");
    CrossingEstimate c;
    // sign change between consecutive nonzero differences; exact ties (saturated curves) are skipped
    std::size_t prev = n;
    for (std::size_t i = 0; i < n; ++i) {
        double di = a[i] - b[i];
        if (di == 0.0) continue;
        if (prev < n) {
            double dp = a[prev] - b[prev];
            if ((dp < 0) != (di < 0)) {
                c.found = true;
                c.level = levels[prev] + (levels[i] - levels[prev]) * dp / (dp - di);
                break;
            }
        }
        prev = i;
    }
    if (c.found) {
        double lo = c.level, hi = c.level;
        for (std::size_t i = 0; i < n; ++i) {
            double se = std::sqrt(sa[i] * sa[i] + sb[i] * sb[i]);
            bool informative = se > 0.0;
            if (informative && std::abs(a[i] - b[i]) <= 2.0 * se) {
                lo = std::min(lo, levels[i]);
                hi = std::max(hi, levels[i]);
            }
        }
        c.spread = hi - lo;
    }
    return c;
}

MomentSummary moment_summary(const std::vector<double>& xs) {
    if (xs.size() < 4) throw std::invalid_argument("moment_summary: at least four values");
    const double n = static_cast<double>(xs.size());
    double m = 0.0;
    for (double x : xs) m += x;
    m /= n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : xs) {
        double e = x - m;
        m2 += e * e;
        m3 += e * e * e;
        m4 += e * e * e * e;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    MomentSummary s;
    s.mean = m;
    s.variance = m2 * n / (n - 1.0);
    s.skewness = m3 / std::pow(m2, 1.5);
    s.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    return s;
}

}  // namespace frd
