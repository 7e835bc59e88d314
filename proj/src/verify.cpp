#include "frd/verify.hpp"

#include "frd/continuum.hpp"
#include "frd/error.hpp"
#include "frd/io.hpp"
#include "frd/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace frd {

namespace {

std::string fmt(double v, int prec = 3) {
    std::ostringstream ss;
    ss.precision(prec);
    ss << std::scientific << v;
    return ss.str();
}

std::vector<Site> cube_sites(int d, int radius) {
    std::vector<Site> out;
    Site x(d, -radius);
    while (true) {
        out.push_back(x);
        int i = 0;
        for (; i < d; ++i) {
            if (++x[i] <= radius) break;
            x[i] = -radius;
        }
        if (i == d) break;
    }
    return out;
}

bool is_origin(const Site& x) {
    return std::all_of(x.begin(), x.end(), [](int v) { return v == 0; });
}

int l1(const Site& x) {
    int s = 0;
    for (int v : x) s += std::abs(v);
    return s;
}

// Covariance of the field truncated to the slices below t_max.
double truncated_covariance(const SliceBank& bank, double t_max, const Site& x) {
    auto it = bank.lag_index.find(canonical_lag(x));
    if (it == bank.lag_index.end()) throw std::out_of_range("truncated_covariance: lag not in bank");
    double acc = is_origin(x) ? bank.small_t_mass : 0.0;
    for (const auto& s : bank.slices)
        if (s.t < t_max) acc += s.weight * s.lag_values[it->second];
    return acc;
}

}  // namespace

nlohmann::json to_json(const CheckResult& r) {
    return {{"id", r.id},           {"title", r.title},   {"passed", r.passed}, {"measured", r.measured},
            {"threshold", r.threshold}, {"detail", r.detail}, {"data", r.data}};
}

std::string summary_line(const CheckResult& r) {
    return std::string(r.passed ? "PASS" : "FAIL") + " " + r.id + " " + r.title + ": measured " + fmt(r.measured) +
           ", threshold " + fmt(r.threshold) + (r.detail.empty() ? "" : " (" + r.detail + ")");
}

int stated_channel_radius(double t, int channel) {
    if (t < 1.0) return 0;
    const int ct = static_cast<int>(std::ceil(t - 1e-12));
    auto floor_half = [](int v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); };
    if (channel < 2) return floor_half(ct - 1);
    return floor_half(ct - 2) + 1;
}

std::vector<double> verification_ts(int t_max) {
    std::set<double> ts;
    for (int i = 0; 1.0 + 0.25 * i <= t_max + 1e-12; ++i) ts.insert(1.0 + 0.25 * i);
    for (const auto& n : unit_scale_grid(t_max).nodes) ts.insert(n.t);
    return {ts.begin(), ts.end()};
}

CheckResult check_partition_discrete(const WeightFamily& family, int n_lambda, int t_max, double tol) {
    const WeightParams& wp = family.params();
    CheckResult r;
    r.id = "partition-discrete";
    r.title = model_name(wp.model) + " d=" + std::to_string(wp.d) + " scalar partition of unity";
    auto grid = log_lambda_grid(wp.B * 1e-6, wp.B, n_lambda);
    PartitionReport rep = scalar_partition_check(family, grid, t_max);
    r.measured = rep.max_error;
    r.threshold = tol;
    r.passed = rep.max_error <= tol;
    r.detail = "worst lambda " + fmt(rep.worst_lambda);
    r.data = {{"lambdas", rep.lambdas}, {"errors", rep.errors}, {"t_max", t_max}};
    return r;
}

CheckResult check_partition_continuum(std::shared_ptr<const BumpProfile> profile, const std::vector<double>& gammas,
                                      int n_lambda, double tol) {
    CheckResult r;
    r.id = "partition-continuum";
    r.title = "continuum scalar partition of unity";
    r.threshold = tol;
    auto grid = log_lambda_grid(1e-3, 1e3, n_lambda);
    double worst = 0.0;
    for (double g : gammas) {
        PartitionReport rep = continuum_partition_check(*profile, g, grid);
        r.data["gamma=" + format_number(g)] = {{"max_error", rep.max_error}, {"worst_lambda", rep.worst_lambda}};
        worst = std::max(worst, rep.max_error);
    }
    r.measured = worst;
    r.passed = worst <= tol;
    return r;
}

CheckResult check_nonnegativity(const WeightFamily& family, const std::vector<double>& ts) {
    CheckResult r;
    r.id = "nonnegativity";
    r.title = "v_t >= 0 on the spectrum";
    r.threshold = -family.options().nonneg_tol;
    double worst = 1.0, worst_t = 0.0;
    std::vector<double> bad;
    for (double t : ts) {
        double m = family.nonneg_margin(t);
        if (m < worst) {
            worst = m;
            worst_t = t;
        }
        if (m < -family.options().nonneg_tol) bad.push_back(t);
    }
    r.measured = worst;
    r.passed = bad.empty();
    r.detail = bad.empty() ? "min margin at t = " + format_number(worst_t)
                           : "violated at t = " + format_number(bad.front()) + " (" + std::to_string(bad.size()) +
                                 " of " + std::to_string(ts.size()) + " t values)";
    r.data = {{"violations", bad}, {"worst_t", worst_t}};
    return r;
}

CheckResult check_sos(const WeightFamily& family, const std::vector<double>& ts, int n_lambda, double tol) {
    const WeightParams& wp = family.params();
    CheckResult r;
    r.id = "sos";
    r.title = "sum-of-squares certificate residual";
    r.threshold = tol;
    double worst = 0.0, worst_t = 0.0;
    int degree_failures = 0;
    std::vector<double> residuals;
    for (double t : ts) {
        Poly v = family.vt_unit(t);
        SosQuadruple cert = family.aj_family(t);
        const int D = v.degree();
        const int ct = static_cast<int>(std::ceil(t - 1e-12));
        auto floor_half = [](int x) { return x >= 0 ? x / 2 : -1; };
        bool deg_ok = D <= ct - 1 && cert.a1.degree() <= floor_half(D) && cert.a2.degree() <= floor_half(D) &&
                      cert.a3.degree() <= floor_half(D - 1) && cert.a4.degree() <= floor_half(D - 1);
        degree_failures += !deg_ok;
        double vmax = 0.0, res = 0.0;
        for (int i = 0; i < n_lambda; ++i) {
            double lam = wp.B * i / (n_lambda - 1.0);
            double mu = std::pow(lam, wp.gamma);
            double u = 1.0 - std::pow(lam / (2.0 * wp.B), wp.gamma);
            double vv = v(u);
            vmax = std::max(vmax, std::abs(vv));
            const double b1 = cert.a1(mu), b2 = cert.a2(mu), b3 = cert.a3(mu), b4 = cert.a4(mu);
            const double rebuilt = b1 * b1 + b2 * b2 + (wp.c() - mu) * (b3 * b3 + b4 * b4);
            res = std::max(res, std::abs(rebuilt - vv));
        }
        double rel = vmax > 0 ? res / vmax : res;
        residuals.push_back(rel);
        if (rel > worst) {
            worst = rel;
            worst_t = t;
        }
    }
    r.measured = worst;
    r.passed = worst <= tol && degree_failures == 0;
    r.detail = "worst t = " + format_number(worst_t) + ", degree-bound failures " + std::to_string(degree_failures) +
               ", " + std::to_string(ts.size()) + " slices";
    r.data = {{"ts", ts}, {"residuals", residuals}, {"degree_failures", degree_failures}};
    return r;
}

CheckResult check_finite_range(const SliceBank& bank) {
    CheckResult r;
    r.id = "finite-range";
    r.title = model_name(bank.spec.model) + " d=" + std::to_string(bank.spec.d) + " exact finite range of every slice channel";
    r.threshold = 0.0;
    std::size_t structural = 0, scanned = 0, violations = 0, values = 0;
    for (const auto& s : bank.slices) {
        for (std::size_t ch = 0; ch < s.channel_support.size(); ++ch)
            if (s.channel_support[ch] > stated_channel_radius(s.t, static_cast<int>(ch))) ++structural;
        if (!s.kernel) continue;
        ++scanned;
        const LatticeField& f = s.kernel->field;
        for (int ch = 0; ch < f.channels(); ++ch) {
            const int rad = stated_channel_radius(s.t, ch);
            const double* v = f.channel(ch);
            for (std::size_t i = 0; i < f.sites(); ++i) {
                ++values;
                if (v[i] != 0.0 && l1(f.coords(i)) > rad) ++violations;
            }
        }
    }
    r.measured = static_cast<double>(structural + violations);
    r.passed = structural == 0 && violations == 0 && scanned > 0;  // an empty scan proves nothing
    r.detail = std::to_string(scanned) + " kernels, " + std::to_string(values) + " values scanned, " +
               std::to_string(structural) + " structural and " + std::to_string(violations) + " numerical violations";
    r.data = {{"kernels", scanned}, {"values", values}, {"structural", structural}, {"violations", violations}};
    return r;
}

CheckResult check_greens(const SliceBank& bank, const WeightFamily& family, const GreensCheckOptions& opt) {
    const ModelSpec& spec = bank.spec;
    CheckResult r;
    r.id = "greens";
    r.title = model_name(spec.model) + " d=" + std::to_string(spec.d) + " Green's function reconstruction";
    r.threshold = opt.rel_tol;
    GreensOracle oracle(spec);
    std::vector<double> tail = spectral_tail(family, spec, bank.grid.t_max, bank.lags);
    GreensOptions go;
    for (std::size_t i = 0; i < bank.lags.size(); ++i) go.exact_tail[bank.lags[i]] = tail[i];
    std::vector<Site> xs = cube_sites(spec.d, opt.lag_radius);
    auto rec = greens_reconstruct(bank, xs, go);
    auto ref = oracle.values(xs);
    const double g0 = ref.at(Site(spec.d, 0)).value;
    double worst = 0.0, fitted_worst = 0.0;
    Site worst_x;
    nlohmann::json rows = nlohmann::json::array();
    for (const Site& x : xs) {
        double e = std::abs(rec.at(x).value - ref.at(x).value);
        fitted_worst = std::max(fitted_worst,
                                std::abs(rec.at(x).quadrature + rec.at(x).fitted_tail - ref.at(x).value));
        if (e > worst) {
            worst = e;
            worst_x = x;
        }
    }
    for (const Site& x : bank.lags) {
        if (*std::max_element(x.begin(), x.end()) > opt.lag_radius) continue;
        rows.push_back({{"x", x}, {"rec", rec.count(x) ? rec.at(x).value : 0.0}, {"oracle", ref.count(x) ? ref.at(x).value : 0.0}});
    }
    double resid = 0.0;
    for (const Site& x : cube_sites(spec.d, opt.residual_radius)) resid = std::max(resid, std::abs(defining_residual(spec, oracle, x)));
    r.measured = worst / g0;
    r.passed = r.measured <= opt.rel_tol && resid <= opt.residual_tol;
    r.detail = "G(0) oracle " + format_number(g0) + ", reconstruction " + format_number(rec.at(Site(spec.d, 0)).value) +
               ", oracle residual " + fmt(resid) + ", power-law tail alone would give " + fmt(fitted_worst / g0);
    r.data = {{"g0", g0}, {"defining_residual", resid}, {"fitted_tail_error", fitted_worst / g0}, {"worst_lag", worst_x}};
    return r;
}

CheckResult check_decay(const SliceBank& bank, const WeightFamily& family, const DecayCheckOptions& opt) {
    const ModelSpec& spec = bank.spec;
    CheckResult r;
    r.id = "decay";
    r.title = model_name(spec.model) + " d=" + std::to_string(spec.d) + " flattened kernel tail exponent";
    r.threshold = 0.5 * (opt.slope_lo + opt.slope_hi);
    const double offset = ScalarKernel::data_offset(bank);
    FlatMassProfile prof = flat_mass_profile(bank, offset);
    auto curve = flat_tail_curve(prof, 0.0);
    std::vector<double> T, M;
    for (const auto& [t, m] : curve)
        if (t >= opt.window_lo && t <= opt.window_hi && m > 0) {
            T.push_back(t);
            M.push_back(m);
        }
    if (T.size() < 3) throw NumericalError("check_decay: fewer than three points in the window");
    const double slope = loglog_slope(T, M);
    // same curve with the exact beyond-T_max mass, fitted over the last half of the range
    const double beyond = spectral_tail(family, spec, bank.grid.t_max, {Site(spec.d, 0)})[0];
    auto full = flat_tail_curve(prof, beyond);
    const double t_end = full.back().first;
    std::vector<double> T2, M2;
    for (const auto& [t, m] : full)
        if (t >= 0.5 * t_end) {
            T2.push_back(t);
            M2.push_back(m);
        }
    const double late = T2.size() >= 3 ? loglog_slope(T2, M2) : 0.0;
    r.measured = slope;
    r.passed = slope >= opt.slope_lo && slope <= opt.slope_hi;
    r.detail = "window [" + format_number(opt.window_lo) + ", " + format_number(opt.window_hi) + "] slope " +
               format_number(slope) + ", accepted [" + format_number(opt.slope_lo) + ", " + format_number(opt.slope_hi) +
               "]; late-window slope with exact tail " + format_number(late) + ", offset " + format_number(offset);
    r.data = {{"slope", slope}, {"late_slope", late}, {"offset", offset}, {"T", T}, {"tail", M}};
    return r;
}

CheckResult check_continuum(std::shared_ptr<const BumpProfile> profile, const ContinuumCheckOptions& opt) {
    CheckResult r;
    r.id = "continuum";
    r.title = "continuum d=" + std::to_string(opt.d) + " Green's reconstruction and kernel support";
    r.threshold = opt.rel_tol;
    const int p = static_cast<int>(std::lround(1.0 / opt.gamma));
    std::vector<double> rs;
    for (int i = 0; i < opt.n_r; ++i) rs.push_back(opt.r_lo + (opt.r_hi - opt.r_lo) * i / (opt.n_r - 1.0));
    auto rec = continuum_reconstruct(opt.d, opt.gamma, profile, rs);
    double worst = 0.0;
    bool monotone = true;
    double prev = 0.0;
    std::vector<double> ratios;
    for (std::size_t i = 0; i < rs.size(); ++i) {
        const auto& v = rec.at(rs[i]);
        double ratio = v.value / continuum_green(opt.d, p, rs[i]);
        ratios.push_back(ratio);
        worst = std::max(worst, std::abs(ratio - 1.0));
        if (i > 0 && v.value > prev + v.error) monotone = false;
        prev = v.value;
    }
    double leak = 0.0;
    for (double t : opt.kernel_ts) leak = std::max(leak, radial_kernel(t, opt.d, opt.gamma, profile).leakage());
    r.measured = worst;
    r.passed = worst <= opt.rel_tol && leak <= opt.leakage_tol && monotone;
    r.detail = "max |G_rec / G - 1| " + fmt(worst) + ", kernel leakage " + fmt(leak) + " (limit " +
               fmt(opt.leakage_tol) + "), monotone " + (monotone ? "yes" : "no");
    r.data = {{"r", rs}, {"ratio", ratios}, {"leakage", leak}, {"monotone", monotone}};
    return r;
}

CheckResult check_sampler(const SliceBank& bank, const SamplerCheckOptions& opt) {
    CheckResult r;
    r.id = "sampler";
    r.title = "sampler covariance and reproducibility";
    r.threshold = opt.z_max;
    FieldSampler fs(bank, opt.t_max);
    std::vector<Site> sites{Site(bank.spec.d, 0)};
    for (const Site& x : opt.lags)
        if (!is_origin(x)) sites.push_back(x);
    PointSampler ps(fs, sites);
    NoiseSource noise(opt.seed);
    const double N = static_cast<double>(opt.samples);
    std::vector<double> sum(sites.size(), 0.0), sum2(sites.size(), 0.0), f0;
    f0.reserve(opt.samples);
    // per-scale independence: two layers with the largest variance at the origin
    int la = 0, lb = 0;
    {
        std::vector<double> lv(fs.layers(), 0.0);
        for (const auto& st : fs.stencils())
            for (std::size_t m = 0; m < st.offsets.size(); ++m) lv[st.layer] += st.coeffs[m] * st.coeffs[m];
        std::vector<int> idx(fs.layers());
        for (int i = 0; i < fs.layers(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return lv[a] > lv[b]; });
        la = idx[0];
        lb = fs.layers() > 1 ? idx[1] : idx[0];
    }
    double cross = 0.0, cross2 = 0.0;
    std::vector<std::vector<double>> layers;
    for (std::uint64_t s = 0; s < opt.samples; ++s) {
        auto v = ps.evaluate(s, noise, &layers);
        for (std::size_t i = 0; i < sites.size(); ++i) {
            double p = v[0] * v[i];
            sum[i] += p;
            sum2[i] += p * p;
        }
        f0.push_back(v[0]);
        double c = layers[la][0] * layers[lb][0];
        cross += c;
        cross2 += c * c;
    }
    double worst_z = 0.0;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < sites.size(); ++i) {
        double m = sum[i] / N;
        double se = std::sqrt(std::max(0.0, (sum2[i] / N - m * m) * N / (N - 1.0)) / N);
        double ref = truncated_covariance(bank, opt.t_max, sites[i]);
        double z = std::abs(m - ref) / se;
        worst_z = std::max(worst_z, z);
        rows.push_back({{"x", sites[i]}, {"cov", m}, {"se", se}, {"reference", ref}, {"z", z}});
    }
    double cm = cross / N;
    double cse = std::sqrt(std::max(0.0, cross2 / N - cm * cm) / N);
    double indep_z = la == lb ? 0.0 : std::abs(cm) / cse;
    MomentSummary ms = moment_summary(f0);
    // bit-exact reproducibility of full boxes and agreement of the point evaluator
    bool reproducible = true;
    for (std::uint64_t s = 0; s < 2; ++s) {
        FieldSample a = fs.sample_box(opt.box, s, noise);
        FieldSample b = fs.sample_box(opt.box, s, noise);
        reproducible &= a.values == b.values;
        auto pv = ps.evaluate(s, noise);
        for (std::size_t i = 0; i < sites.size(); ++i) reproducible &= pv[i] == a.at(sites[i]);
    }
    const bool gaussian = std::abs(ms.skewness) <= 0.05 && std::abs(ms.excess_kurtosis) <= 0.1;
    const double var_gap = std::abs(fs.variance() - truncated_covariance(bank, opt.t_max, Site(bank.spec.d, 0)));
    r.measured = worst_z;
    r.passed = worst_z <= opt.z_max && reproducible && gaussian && indep_z <= opt.z_max;
    r.detail = std::to_string(opt.samples) + " samples at t_max " + format_number(opt.t_max) + ", worst |z| " +
               format_number(worst_z) + ", reproducible " + (reproducible ? "yes" : "no") + ", skew " +
               fmt(ms.skewness) + ", excess kurtosis " + fmt(ms.excess_kurtosis) + ", cross-scale |z| " +
               format_number(indep_z);
    r.data = {{"rows", rows},
              {"skewness", ms.skewness},
              {"excess_kurtosis", ms.excess_kurtosis},
              {"cross_scale_z", indep_z},
              {"stencil_variance_gap", var_gap},
              {"reproducible", reproducible}};
    return r;
}

CheckResult check_percolation(const SliceBank& bank, const PercolationCheckOptions& opt) {
    CheckResult r;
    r.id = "percolation";
    r.title = "level-set percolation properties";
    r.threshold = 0.0;
    if (opt.boxes.size() < 2) throw std::invalid_argument("check_percolation: two box sizes required");
    FieldSampler fs(bank, opt.t_max);
    const double sigma = std::sqrt(fs.variance());
    std::vector<double> coarse;
    for (int i = 0; i < opt.pilot_levels; ++i)
        coarse.push_back(sigma * opt.level_span * (-1.0 + 2.0 * i / (opt.pilot_levels - 1.0)));
    // the pilot uses its own noise so the window is not tuned on the measured samples
    auto [lo, hi] = transition_window(fs, opt.boxes[0], coarse, opt.pilot_samples, opt.seed ^ 0x9e3779b97f4a7c15ull,
                                      opt.workers);
    SweepConfig cfg;
    for (int i = 0; i < opt.n_levels; ++i) cfg.levels.push_back(lo + (hi - lo) * i / (opt.n_levels - 1.0));
    cfg.box_sizes = opt.boxes;
    cfg.samples = opt.samples;
    cfg.seed = opt.seed;
    cfg.workers = opt.workers;
    SweepOutput sw = sweep_levels(fs, cfg);
    const std::size_t L = cfg.levels.size();
    auto curve = [&](std::size_t b, bool crossing, bool se) {
        std::vector<double> v(L);
        for (std::size_t l = 0; l < L; ++l) {
            const auto& pr = sw.results[b * L + l];
            v[l] = crossing ? (se ? pr.crossing_se : pr.crossing) : (se ? pr.theta_se : pr.theta);
        }
        return v;
    };
    CrossingEstimate cx = curve_crossing(cfg.levels, curve(0, true, false), curve(0, true, true), curve(1, true, false),
                                         curve(1, true, true));
    // finite-range coupling: noise replaced inside |y|_inf <= radius only
    NoiseSource a(opt.seed), b(opt.seed, opt.seed ^ 0x5bd1e995u, opt.coupling_radius);
    FieldSample fa = fs.sample_box(opt.coupling_box, 0, a);
    FieldSample fb = fs.sample_box(opt.coupling_box, 0, b);
    const int dep = opt.coupling_radius + fs.reach();
    std::size_t outside = 0, mismatched = 0, inside_changed = 0;
    for (std::size_t i = 0; i < fa.values.size(); ++i) {
        Site x = fa.coords(i);
        int linf = 0;
        for (int v : x) linf = std::max(linf, std::abs(v));
        if (linf > dep) {
            ++outside;
            mismatched += fa.values[i] != fb.values[i];
        } else if (fa.values[i] != fb.values[i]) {
            ++inside_changed;
        }
    }
    const double top = curve(0, false, false).back();
    const double top_se = curve(0, false, true).back();
    const bool coupling_ok = mismatched == 0 && outside > 0 && inside_changed > 0;
    r.measured = static_cast<double>(sw.monotonicity_violations + mismatched);
    r.passed = sw.monotonicity_violations == 0 && cx.found && coupling_ok;
    r.detail = "monotonicity violations " + std::to_string(sw.monotonicity_violations) + ", crossing-probability curves " +
               (cx.found ? "cross at level " + format_number(cx.level) + " (" + format_number(cx.level / sigma) +
                               " sigma, spread " + format_number(cx.spread) + ")"
                         : std::string("do not cross")) +
               ", coupling mismatches " + std::to_string(mismatched) + " of " + std::to_string(outside) +
               " sites beyond radius " + std::to_string(dep) + ", theta_" + std::to_string(opt.boxes[0]) +
               " at top level " + format_number(top) + " +- " + format_number(top_se);
    nlohmann::json res = nlohmann::json::array();
    for (const auto& pr : sw.results)
        res.push_back({{"level", pr.level}, {"n", pr.n}, {"theta", pr.theta}, {"theta_se", pr.theta_se},
                       {"crossing", pr.crossing}, {"crossing_se", pr.crossing_se}, {"largest_density", pr.largest_density}});
    r.data = {{"sigma", sigma}, {"window", {lo, hi}}, {"results", res},           {"crossing_level", cx.level},
              {"crossing_found", cx.found}, {"coupling_outside", outside}, {"coupling_mismatched", mismatched},
              {"coupling_inside_changed", inside_changed}};
    return r;
}

CheckResult check_negative_control(const WeightFamily& wide_family, const std::vector<double>& ts) {
    CheckResult inner = check_nonnegativity(wide_family, ts);
    CheckResult r;
    r.id = "negative-control";
    r.title = "wide bump must break v_t >= 0";
    r.threshold = inner.threshold;
    r.measured = inner.measured;
    r.passed = !inner.passed;
    r.detail = "h = " + format_number(wide_family.profile().h) + ": " + inner.detail;
    r.data = inner.data;
    return r;
}

}  // namespace frd
