#include "frd/lattice.hpp"

#include "frd/error.hpp"
#include "frd/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace frd {

ModelSpec ModelSpec::make(Model model, int d) {
    ModelSpec s;
    s.model = model;
    s.d = d;
    if (model == Model::Gff) {
        s.p = 1;
        s.gamma = 1.0;
        s.B = 4.0 * d;
    } else if (model == Model::Membrane) {
        s.p = 2;
        s.gamma = 0.5;
        s.B = 16.0 * d * d;
    } else {
        throw std::invalid_argument("ModelSpec: lattice models are gff and membrane");
    }
    s.c = std::pow(2.0 * s.B, s.gamma);
    if (s.c < 4.0 * d) throw std::invalid_argument("ModelSpec: c >= 4d required");
    s.r0 = std::sqrt(s.c - 4.0 * d);
    return s;
}

WeightParams ModelSpec::weight_params() const {
    return model == Model::Gff ? gff_params(d) : membrane_params(d);
}

LatticeField::LatticeField(int d, int m, int radius) : d_(d), m_(m), R_(radius), support_(-1) {
    if (d < 1 || m < 1 || radius < 0) throw std::invalid_argument("LatticeField: bad shape");
    sites_ = 1;
    for (int i = 0; i < d; ++i) sites_ *= static_cast<std::size_t>(2 * radius + 1);
    data_.assign(sites_ * m, 0.0);
}

LatticeField LatticeField::delta(int d, int radius) {
    LatticeField f(d, 1, radius);
    f.at(0, Site(d, 0)) = 1.0;
    f.support_ = 0;
    return f;
}

bool LatticeField::contains(const Site& x) const {
    for (int v : x)
        if (v < -R_ || v > R_) return false;
    return true;
}

std::size_t LatticeField::index(const Site& x) const {
    std::size_t idx = 0, stride = 1;
    for (int i = 0; i < d_; ++i) {
        idx += static_cast<std::size_t>(x[i] + R_) * stride;
        stride *= static_cast<std::size_t>(2 * R_ + 1);
    }
    return idx;
}

Site LatticeField::coords(std::size_t idx) const {
    Site x(d_);
    const std::size_t s = 2 * R_ + 1;
    for (int i = 0; i < d_; ++i) {
        x[i] = static_cast<int>(idx % s) - R_;
        idx /= s;
    }
    return x;
}

double LatticeField::value(int ch, const Site& x) const {
    if (!contains(x)) return 0.0;
    return data_[ch * sites_ + index(x)];
}

double LatticeField::norm2(int ch) const {
    const double* p = channel(ch);
    double s = 0.0;
    for (std::size_t i = 0; i < sites_; ++i) s += p[i] * p[i];
    return s;
}

double LatticeField::dot(const LatticeField& o) const {
    if (o.d_ != d_ || o.m_ != m_ || o.R_ != R_) throw std::invalid_argument("LatticeField::dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i) s += data_[i] * o.data_[i];
    return s;
}

namespace {

// Calls f(rest, half) for every row of the l1 ball of radius rho clipped to [-box, box]^d;
// rest holds coordinates 1..d-1, the row spans x_0 in [-half, half].
template <class F>
void for_rows_l1(int d, int rho, int box, F&& f) {
    if (rho < 0) return;
    const int lim = std::min(rho, box);
    std::vector<int> rest(std::max(d - 1, 0), -lim);
    while (true) {
        int used = 0;
        for (int v : rest) used += std::abs(v);
        if (used <= rho) f(rest, std::min(box, rho - used));
        int k = 0;
        for (; k < d - 1; ++k) {
            if (++rest[k] <= lim) break;
            rest[k] = -lim;
        }
        if (k == d - 1) break;
    }
}

struct Padded {
    int d, R, P;  // box radius R, padded side P = 2R + 3
    std::vector<std::size_t> stride;
    std::size_t size;

    Padded(int d_, int R_) : d(d_), R(R_), P(2 * R_ + 3), stride(d_) {
        std::size_t s = 1;
        for (int i = 0; i < d; ++i) {
            stride[i] = s;
            s *= P;
        }
        size = s;
    }
    std::size_t row_base(const std::vector<int>& rest) const {
        std::size_t idx = static_cast<std::size_t>(R + 1);
        for (int i = 1; i < d; ++i) idx += static_cast<std::size_t>(rest[i - 1] + R + 1) * stride[i];
        return idx;
    }
};

// Field box radius R stride helpers.
std::size_t field_row_base(int d, int R, const std::vector<int>& rest) {
    std::size_t idx = static_cast<std::size_t>(R), s = 2 * R + 1, st = s;
    for (int i = 1; i < d; ++i) {
        idx += static_cast<std::size_t>(rest[i - 1] + R) * st;
        st *= s;
    }
    return idx;
}

void horner_channel(const ModelSpec& spec, const std::vector<double>& c, StencilBasis basis, const double* in,
                    int in_radius, int in_support, double* out, int out_radius) {
    const int d = spec.d;
    const int n = static_cast<int>(c.size()) - 1;
    Padded pb(d, out_radius);
    std::vector<double> u(pb.size, 0.0), v(pb.size, 0.0), w(pb.size, 0.0);
    // copy input
    for_rows_l1(d, in_support, std::min(in_radius, out_radius), [&](const std::vector<int>& rest, int half) {
        const double* src = in + field_row_base(d, in_radius, rest);
        double* dst = u.data() + pb.row_base(rest);
        for (int x = -half; x <= half; ++x) dst[x] = src[x];
    });
    const double a = basis == StencilBasis::M ? 2.0 * d : 1.0 - 2.0 * d / spec.c;
    const double b = basis == StencilBasis::M ? -1.0 : 1.0 / spec.c;
    for_rows_l1(d, in_support, out_radius, [&](const std::vector<int>& rest, int half) {
        std::size_t base = pb.row_base(rest);
        for (int x = -half; x <= half; ++x) v[base + x] = c[n] * u[base + x];
    });
    for (int k = n - 1; k >= 0; --k) {
        const int rho = in_support + (n - k);
        const double ck = c[k];
        for_rows_l1(d, rho, out_radius, [&](const std::vector<int>& rest, int half) {
            std::size_t base = pb.row_base(rest);
            for (int x = -half; x <= half; ++x) {
                std::size_t idx = base + x;
                double nb = 0.0;
                for (int i = 0; i < d; ++i) nb += v[idx + pb.stride[i]] + v[idx - pb.stride[i]];
                w[idx] = a * v[idx] + b * nb + ck * u[idx];
            }
        });
        std::swap(v, w);
    }
    for_rows_l1(d, in_support + n, out_radius, [&](const std::vector<int>& rest, int half) {
        const double* src = v.data() + pb.row_base(rest);
        double* dst = out + field_row_base(d, out_radius, rest);
        for (int x = -half; x <= half; ++x) dst[x] = src[x];
    });
}

}  // namespace

LatticeField apply_stencil_poly(const ModelSpec& spec, const Poly& b, const LatticeField& u, StencilBasis basis,
                                int out_radius) {
    if (u.dim() != spec.d) throw std::invalid_argument("apply_stencil_poly: dimension mismatch");
    Poly bt = b.trimmed();
    const int deg = bt.degree();
    const int in_sup = u.support();
    if (deg < 0 || in_sup < 0) {
        LatticeField z(u.dim(), u.channels(), std::max(out_radius, 0));
        return z;
    }
    const int grown = in_sup + deg;
    if (out_radius < 0) out_radius = grown;
    if (grown > out_radius)
        throw std::out_of_range("apply_stencil_poly: box radius " + std::to_string(out_radius) +
                                " cannot hold support " + std::to_string(grown));
    LatticeField out(u.dim(), u.channels(), out_radius);
    for (int ch = 0; ch < u.channels(); ++ch)
        horner_channel(spec, bt.coeffs(), basis, u.channel(ch), u.radius(), in_sup, out.channel(ch), out_radius);
    out.set_support(grown);
    return out;
}

LatticeField apply_M(const ModelSpec& spec, const LatticeField& u) {
    return apply_stencil_poly(spec, Poly({0.0, 1.0}), u, StencilBasis::M);
}

LatticeField apply_R(const ModelSpec& spec, const LatticeField& u) {
    if (u.channels() != 1) throw std::invalid_argument("apply_R: single-channel input");
    const int d = spec.d;
    const int R = u.radius() + 1;
    LatticeField out(d, d + 1, R);
    if (u.support() < 0) return out;
    const int sup = u.support() + 1;
    const std::size_t S = 2 * R + 1;
    std::vector<std::size_t> stride(d);
    std::size_t st = 1;
    for (int i = 0; i < d; ++i) {
        stride[i] = st;
        st *= S;
    }
    // u embedded in the output box, so x + e_i lookups stay in range when x is in the l1 ball
    LatticeField ue(d, 1, R);
    for_rows_l1(d, u.support(), u.radius(), [&](const std::vector<int>& rest, int half) {
        const double* src = u.channel(0) + field_row_base(d, u.radius(), rest);
        double* dst = ue.channel(0) + field_row_base(d, R, rest);
        for (int x = -half; x <= half; ++x) dst[x] = src[x];
    });
    const double* uv = ue.channel(0);
    for_rows_l1(d, sup, R, [&](const std::vector<int>& rest, int half) {
        std::size_t base = field_row_base(d, R, rest);
        for (int x = -half; x <= half; ++x) {
            std::size_t idx = base + x;
            double ux = uv[idx];
            out.channel(0)[idx] = spec.r0 * ux;
            for (int i = 0; i < d; ++i) {
                int xi = i == 0 ? x : rest[i - 1];
                double nb = xi + 1 <= R ? uv[idx + stride[i]] : 0.0;
                out.channel(i + 1)[idx] = nb + ux;
            }
        }
    });
    out.set_support(sup);
    return out;
}

LatticeField apply_R_adjoint(const ModelSpec& spec, const LatticeField& eta) {
    const int d = spec.d;
    if (eta.channels() != d + 1) throw std::invalid_argument("apply_R_adjoint: d + 1 channels");
    const int R = eta.radius() + 1;
    LatticeField out(d, 1, R);
    if (eta.support() < 0) return out;
    const int sup = eta.support() + 1;
    LatticeField ee(d, d + 1, R);
    for (int ch = 0; ch <= d; ++ch)
        for_rows_l1(d, eta.support(), eta.radius(), [&](const std::vector<int>& rest, int half) {
            const double* src = eta.channel(ch) + field_row_base(d, eta.radius(), rest);
            double* dst = ee.channel(ch) + field_row_base(d, R, rest);
            for (int x = -half; x <= half; ++x) dst[x] = src[x];
        });
    const std::size_t S = 2 * R + 1;
    std::vector<std::size_t> stride(d);
    std::size_t st = 1;
    for (int i = 0; i < d; ++i) {
        stride[i] = st;
        st *= S;
    }
    for_rows_l1(d, sup, R, [&](const std::vector<int>& rest, int half) {
        std::size_t base = field_row_base(d, R, rest);
        for (int x = -half; x <= half; ++x) {
            std::size_t idx = base + x;
            double acc = spec.r0 * ee.channel(0)[idx];
            for (int i = 0; i < d; ++i) {
                int xi = i == 0 ? x : rest[i - 1];
                double back = xi - 1 >= -R ? ee.channel(i + 1)[idx - stride[i]] : 0.0;
                acc += back + ee.channel(i + 1)[idx];
            }
            out.channel(0)[idx] = acc;
        }
    });
    out.set_support(sup);
    return out;
}

SlicePolys slice_polys(double t, const ModelSpec& spec, const WeightFamily& family) {
    if (!(t > 0)) throw std::invalid_argument("slice_polys: t > 0");
    SlicePolys sp;
    sp.t = t;
    sp.prefactor = std::pow(t, spec.p - 0.5);
    if (t < 1.0) {
        sp.delta_value = sp.prefactor * std::sqrt(family.small_t_weight(t));
        return sp;
    }
    SosQuadruple A = family.aj_unit(t);
    const double r = 1.0 / std::sqrt(spec.c);
    sp.g[0] = A.a1.trimmed();
    sp.g[1] = A.a2.trimmed();
    sp.g[2] = A.a3.trimmed() * r;
    sp.g[3] = A.a4.trimmed() * r;
    return sp;
}

KernelSlice kernel_slice(const SlicePolys& sp, const ModelSpec& spec) {
    const int d = spec.d;
    const int m = spec.channels();
    KernelSlice ks;
    ks.t = sp.t;
    ks.channel_support.assign(m, -1);
    if (sp.t < 1.0) {
        ks.field = LatticeField(d, m, 0);
        ks.field.at(0, Site(d, 0)) = sp.delta_value;
        ks.channel_support[0] = 0;
        ks.support = 0;
        ks.field.set_support(0);
        return ks;
    }
    int deg[4];
    for (int j = 0; j < 4; ++j) deg[j] = sp.g[j].degree();
    int R = std::max({deg[0], deg[1], deg[2] >= 0 ? deg[2] + 1 : 0, deg[3] >= 0 ? deg[3] + 1 : 0, 0});
    ks.field = LatticeField(d, m, R);
    LatticeField delta = LatticeField::delta(d, 0);
    auto put = [&](const LatticeField& src, int src_ch, int dst_ch) {
        const double* s = src.channel(src_ch);
        double* o = ks.field.channel(dst_ch);
        for (std::size_t i = 0; i < src.sites(); ++i) o[i] = sp.prefactor * s[i];
    };
    for (int j = 0; j < 2; ++j) {
        if (deg[j] < 0) continue;
        LatticeField f = apply_stencil_poly(spec, sp.g[j], delta, StencilBasis::U, R);
        put(f, 0, j);
        ks.channel_support[j] = deg[j];
    }
    for (int j = 2; j < 4; ++j) {
        if (deg[j] < 0) continue;
        LatticeField f = apply_stencil_poly(spec, sp.g[j], delta, StencilBasis::U, R - 1);
        LatticeField rf = apply_R(spec, f);
        const int first = 2 + (j - 2) * (d + 1);
        for (int i = 0; i <= d; ++i) {
            put(rf, i, first + i);
            ks.channel_support[first + i] = deg[j] + 1;
        }
    }
    ks.support = *std::max_element(ks.channel_support.begin(), ks.channel_support.end());
    ks.field.set_support(ks.support);
    return ks;
}

KernelSlice kernel_slice(double t, const ModelSpec& spec, const WeightFamily& family) {
    return kernel_slice(slice_polys(t, spec, family), spec);
}

Site canonical_lag(const Site& x) {
    for (int v : x) {
        if (v > 0) return x;
        if (v < 0) {
            Site y(x);
            for (int& w : y) w = -w;
            return y;
        }
    }
    return x;
}

std::vector<Site> lag_representatives(int d, int radius) {
    std::vector<Site> out;
    Site x(d, -radius);
    while (true) {
        if (canonical_lag(x) == x) out.push_back(x);
        int k = 0;
        for (; k < d; ++k) {
            if (++x[k] <= radius) break;
            x[k] = -radius;
        }
        if (k == d) break;
    }
    return out;
}

double slice_autocorrelation(const KernelSlice& s, const Site& x) {
    const LatticeField& f = s.field;
    const int d = f.dim();
    const int R = f.radius();
    double total = 0.0;
    for (int ch = 0; ch < f.channels(); ++ch) {
        const int sup = s.channel_support[ch];
        if (sup < 0) continue;
        const double* v = f.channel(ch);
        double acc = 0.0;
        for_rows_l1(d, sup, R, [&](const std::vector<int>& rest, int half) {
            std::vector<int> partner(rest);
            int used = 0;
            for (int i = 1; i < d; ++i) {
                partner[i - 1] += x[i];
                used += std::abs(partner[i - 1]);
            }
            if (used > sup) return;
            int half2 = sup - used;
            int lo = std::max(-half, -half2 - x[0]);
            int hi = std::min(half, half2 - x[0]);
            if (lo > hi) return;
            const double* a = v + field_row_base(d, R, rest);
            const double* b = v + field_row_base(d, R, partner) + x[0];
            for (int y = lo; y <= hi; ++y) acc += a[y] * b[y];
        });
        total += acc;
    }
    return total;
}

std::vector<double> spectral_channel_norms(const SlicePolys& sp, const ModelSpec& spec) {
    const int d = spec.d;
    const int m = spec.channels();
    std::vector<double> out(m, 0.0);
    if (sp.t < 1.0) {
        out[0] = sp.delta_value * sp.delta_value;
        return out;
    }
    int maxdeg = 0;
    for (const Poly& g : sp.g) maxdeg = std::max(maxdeg, g.degree());
    const int top = 2 * maxdeg + 2;
    // U = sum_i v_i, v_i = a + b cos k_i, all moment terms nonnegative.
    const double a = 1.0 / d - 2.0 / spec.c, b = 2.0 / spec.c;
    std::vector<std::vector<double>> binom(top + 1, std::vector<double>(top + 1, 0.0));
    for (int n = 0; n <= top; ++n) {
        binom[n][0] = binom[n][n] = 1.0;
        for (int k = 1; k < n; ++k) binom[n][k] = binom[n - 1][k - 1] + binom[n - 1][k];
    }
    std::vector<double> cosm(top + 1, 0.0);  // E cos^n k
    for (int n = 0; n <= top; n += 2) cosm[n] = binom[n][n / 2] / std::ldexp(1.0, n);
    std::vector<double> single(top + 1, 0.0);
    for (int mm = 0; mm <= top; ++mm)
        for (int n = 0; n <= mm; n += 2) single[mm] += binom[mm][n] * std::pow(a, mm - n) * std::pow(b, n) * cosm[n];
    std::vector<double> mom = single;
    for (int r = 1; r < d; ++r) {
        std::vector<double> next(top + 1, 0.0);
        for (int mm = 0; mm <= top; ++mm)
            for (int k = 0; k <= mm; ++k) next[mm] += binom[mm][k] * mom[k] * single[mm - k];
        mom = std::move(next);
    }
    auto quad = [&](const Poly& g, int shift) {
        const auto& c = g.coeffs();
        double s = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i)
            for (std::size_t j = 0; j < c.size(); ++j) s += c[i] * c[j] * mom[i + j + shift];
        return s;
    };
    const double pf2 = sp.prefactor * sp.prefactor;
    out[0] = pf2 * quad(sp.g[0], 0);
    out[1] = pf2 * quad(sp.g[1], 0);
    for (int j = 2; j < 4; ++j) {
        const int first = 2 + (j - 2) * (d + 1);
        double n2 = quad(sp.g[j], 0);
        double mb = spec.c * (n2 - quad(sp.g[j], 1));  // (b, M b)
        out[first] = pf2 * (spec.c - 4.0 * d) * n2;
        for (int i = 1; i <= d; ++i) out[first + i] = pf2 * (4.0 * n2 - mb / d);
    }
    return out;
}

ScaleGrid unit_scale_grid(int t_max, std::vector<int> rule) {
    if (t_max < 2) throw std::invalid_argument("unit_scale_grid: T_max >= 2");
    if (rule.size() != 3) throw std::invalid_argument("unit_scale_grid: rule has three entries");
    ScaleGrid g;
    g.t_max = t_max;
    g.nodes_per_interval.assign(t_max, 0);
    for (int n = 1; n < t_max; ++n) {
        int k = rule[n < 4 ? 0 : (n < 16 ? 1 : 2)];
        GaussRule gr = gauss_legendre(k);
        g.nodes_per_interval[n] = k;
        for (int i = 0; i < k; ++i) g.nodes.push_back({n + 0.5 + 0.5 * gr.x[i], 0.5 * gr.w[i], n});
    }
    return g;
}

ScaleGrid log_scale_grid(double t_max, int n_intervals) {
    if (n_intervals < 2 || n_intervals % 2 != 0) throw std::invalid_argument("log_scale_grid: even interval count");
    ScaleGrid g;
    g.unit = false;
    g.t_max = t_max;
    const double L = std::log(t_max), h = L / n_intervals;
    for (int i = 0; i <= n_intervals; ++i) {
        double s = i * h, t = std::exp(s);
        double w = (i == 0 || i == n_intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        g.nodes.push_back({t, w * h / 3.0 * t, static_cast<int>(std::floor(t))});
    }
    return g;
}

double SliceBank::max_support() const {
    int m = 0;
    for (const auto& s : slices) m = std::max(m, s.support);
    return m;
}

SliceBank build_slice_bank(const ModelSpec& spec, const WeightFamily& family, const ScaleGrid& grid,
                           const SliceBankOptions& opt) {
    SliceBank bank;
    bank.spec = spec;
    bank.grid = grid;
    if (!opt.spectral_only) bank.lags = lag_representatives(spec.d, opt.lag_radius);
    for (std::size_t i = 0; i < bank.lags.size(); ++i) bank.lag_index[bank.lags[i]] = i;
    bank.small_t_mass = family.small_t_mass();
    bank.small_t_value = std::sqrt(bank.small_t_mass);
    for (const ScaleNode& node : grid.nodes) {
        SliceRecord rec;
        rec.t = node.t;
        rec.weight = node.weight;
        rec.interval = node.interval;
        auto sp = std::make_shared<SlicePolys>(slice_polys(node.t, spec, family));
        rec.polys = sp;
        if (opt.spectral_only) {
            rec.channel_norm2 = spectral_channel_norms(*sp, spec);
            rec.channel_support.assign(spec.channels(), -1);
            for (int j = 0; j < 4; ++j) {
                int dg = sp->g[j].degree();
                if (dg < 0) continue;
                if (j < 2) rec.channel_support[j] = dg;
                else
                    for (int i = 0; i <= spec.d; ++i) rec.channel_support[2 + (j - 2) * (spec.d + 1) + i] = dg + 1;
            }
            rec.support = *std::max_element(rec.channel_support.begin(), rec.channel_support.end());
            if (node.t <= opt.keep_kernels_up_to) rec.kernel = std::make_shared<KernelSlice>(kernel_slice(*sp, spec));
        } else {
            auto ks = std::make_shared<KernelSlice>(kernel_slice(*sp, spec));
            rec.channel_support = ks->channel_support;
            rec.support = ks->support;
            rec.channel_norm2.resize(spec.channels());
            for (int ch = 0; ch < spec.channels(); ++ch) rec.channel_norm2[ch] = ks->field.norm2(ch);
            rec.lag_values.resize(bank.lags.size());
            for (std::size_t l = 0; l < bank.lags.size(); ++l) rec.lag_values[l] = slice_autocorrelation(*ks, bank.lags[l]);
            if (node.t <= opt.keep_kernels_up_to) rec.kernel = ks;
        }
        bank.slices.push_back(std::move(rec));
    }
    return bank;
}

double integrand_decay_exponent(const ModelSpec& spec) {
    WeightParams wp = spec.weight_params();
    return -(wp.alpha + spec.gamma - 2.0) / spec.gamma;
}

std::map<Site, GreensValue> greens_reconstruct(const SliceBank& bank, const std::vector<Site>& xs,
                                               const GreensOptions& opt) {
    std::map<Site, GreensValue> out;
    const double beta = integrand_decay_exponent(bank.spec);
    const double T = bank.grid.t_max;
    // nodes sorted by t for the coarse comparison rule
    std::vector<std::size_t> order(bank.slices.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return bank.slices[a].t < bank.slices[b].t; });
    for (const Site& x : xs) {
        auto it = bank.lag_index.find(canonical_lag(x));
        if (it == bank.lag_index.end()) throw std::out_of_range("greens_reconstruct: lag not in bank");
        const std::size_t l = it->second;
        bool origin = std::all_of(x.begin(), x.end(), [](int v) { return v == 0; });
        GreensValue gv;
        // order-independent accumulation: sort contributions by magnitude
        std::vector<double> parts;
        parts.reserve(bank.slices.size() + 1);
        for (const auto& s : bank.slices) parts.push_back(s.weight * s.lag_values[l]);
        if (origin) parts.push_back(bank.small_t_mass);
        std::sort(parts.begin(), parts.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
        for (double p : parts) gv.quadrature += p;
        // trapezoid on the sorted nodes as the coarse comparison
        double trap = origin ? bank.small_t_mass : 0.0;
        {
            const auto& first = bank.slices[order.front()];
            trap += (first.t - 1.0) * first.lag_values[l];
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                const auto& a = bank.slices[order[k]];
                const auto& b = bank.slices[order[k + 1]];
                trap += 0.5 * (b.t - a.t) * (a.lag_values[l] + b.lag_values[l]);
            }
            const auto& last = bank.slices[order.back()];
            trap += (T - last.t) * last.lag_values[l];
        }
        double quad_err = std::abs(gv.quadrature - trap);
        double tail_err = 0.0;
        if (opt.include_tail) {
            std::vector<double> lt, lv;
            for (const auto& s : bank.slices)
                if (s.t >= T / 10.0 && s.t >= 2.0 && s.lag_values[l] > 0) {
                    lt.push_back(s.t);
                    lv.push_back(s.lag_values[l]);
                }
            if (lt.size() >= 3) {
                double acc = 0.0;
                for (std::size_t k = 0; k < lt.size(); ++k) acc += std::log(lv[k]) - beta * std::log(lt[k]);
                double C = std::exp(acc / lt.size());
                gv.fitted_tail = C * std::pow(T, beta + 1.0) / (-beta - 1.0);
                gv.tail = gv.fitted_tail;
                double bf = loglog_slope(lt, lv);
                if (bf < -1.0) {
                    double Cf = 0.0;
                    for (std::size_t k = 0; k < lt.size(); ++k) Cf += std::log(lv[k]) - bf * std::log(lt[k]);
                    Cf = std::exp(Cf / lt.size());
                    tail_err = std::abs(Cf * std::pow(T, bf + 1.0) / (-bf - 1.0) - gv.tail);
                } else {
                    tail_err = std::abs(gv.tail);
                }
            } else {
                const auto& last = bank.slices[order.back()];
                tail_err = std::abs(last.lag_values[l]) * T;
            }
            auto ex = opt.exact_tail.find(canonical_lag(x));
            if (ex != opt.exact_tail.end()) {
                gv.tail = ex->second;
                tail_err = opt.exact_tail_error;
            } else if (!opt.exact_tail.empty()) {
                throw std::out_of_range("greens_reconstruct: lag missing from the exact tail");
            }
        }
        gv.value = gv.quadrature + gv.tail;
        gv.error = quad_err + tail_err;
        if (opt.tolerance > 0 && gv.error > opt.tolerance)
            throw NumericalError("greens_reconstruct: error estimate " + std::to_string(gv.error) + " exceeds tolerance");
        out[x] = gv;
    }
    return out;
}

ScalarKernel::ScalarKernel(const ModelSpec& spec, std::shared_ptr<const WeightFamily> family, double offset)
    : spec_(spec), family_(std::move(family)), offset_(offset) {
    if (offset_ < 1.0) throw std::invalid_argument("ScalarKernel: offset >= 1");
}

std::optional<ScalarKernel::Piece> ScalarKernel::locate(double T) const {
    if (T <= offset_) return std::nullopt;
    const int K = cycle();
    double s = (T - offset_) / kDilation;
    int n = static_cast<int>(std::floor(s));
    double f = (s - n) * K;
    int j = std::min(static_cast<int>(std::floor(f)), K - 1);
    Piece p;
    p.interval = n;
    p.channel = j;
    p.tau = n + (f - j);
    return p;
}

double ScalarKernel::piece_start(int n, int j) const {
    return offset_ + kDilation * (n + static_cast<double>(j) / cycle());
}

double ScalarKernel::value(const Site& x, double T) const {
    auto p = locate(T);
    if (!p) return 0.0;
    KernelSlice ks = kernel_slice(p->tau, spec_, *family_);
    return std::sqrt(static_cast<double>(cycle()) / kDilation) * ks.field.value(p->channel, x);
}

double ScalarKernel::data_offset(const SliceBank& bank) {
    const int K = bank.spec.channels();
    const double cell = 0.5 * std::sqrt(static_cast<double>(bank.spec.d));
    double t0 = std::max(1.0, 2.0 * cell);  // t < 1 piece: radius 0, channel 0, starts at s = 0
    for (const auto& s : bank.slices)
        for (int j = 0; j < K; ++j) {
            int r = s.channel_support[j];
            if (r < 0) continue;
            t0 = std::max(t0, 2.0 * (r + cell) - kDilation * (s.interval + static_cast<double>(j) / K));
        }
    return t0;
}

FlatMassProfile flat_mass_profile(const SliceBank& bank, double offset) {
    if (!bank.grid.unit) throw std::invalid_argument("flat_mass_profile: needs a unit scale grid");
    const int K = bank.spec.channels();
    const int N = static_cast<int>(bank.grid.t_max);
    std::vector<std::vector<double>> mass(N, std::vector<double>(K, 0.0));
    mass[0][0] = bank.small_t_mass;
    for (const auto& s : bank.slices)
        for (int j = 0; j < K; ++j) mass[s.interval][j] += s.weight * s.channel_norm2[j];
    FlatMassProfile prof;
    for (int n = 0; n < N; ++n)
        for (int j = 0; j < K; ++j) {
            prof.starts.push_back(offset + ScalarKernel::kDilation * (n + static_cast<double>(j) / K));
            prof.masses.push_back(mass[n][j]);
        }
    return prof;
}

std::vector<std::pair<double, double>> flat_tail_curve(const FlatMassProfile& prof, double tail_beyond) {
    std::vector<std::pair<double, double>> out(prof.starts.size());
    double acc = tail_beyond;
    for (std::size_t i = prof.starts.size(); i-- > 0;) {
        acc += prof.masses[i];
        out[i] = {prof.starts[i], acc};
    }
    return out;
}

}  // namespace frd
