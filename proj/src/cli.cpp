#include "frd/cli.hpp"

#include "frd/continuum.hpp"
#include "frd/error.hpp"
#include "frd/field.hpp"
#include "frd/io.hpp"
#include "frd/lattice.hpp"
#include "frd/oracle.hpp"
#include "frd/parallel.hpp"
#include "frd/verify.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

namespace frd {

namespace {

using nlohmann::json;

const std::vector<std::string> kDiscreteDefaultChecks{"partition", "nonnegativity", "sos",
                                                      "finite-range", "greens", "decay"};
const std::vector<std::string> kDiscreteChecks{"partition", "nonnegativity", "sos",     "finite-range", "greens",
                                               "decay",     "sampler",       "percolation", "negative-control"};
const std::vector<std::string> kContinuumChecks{"partition", "continuum"};

// Reads `key` from obj into out when present; the set records consumed keys.
class Reader {
public:
    Reader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
        if (!obj_.is_object()) throw ConfigError(where_ + ": expected an object");
    }
    template <class T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(where_ + "." + key + ": " + e.what());
        }
    }
    bool has(const std::string& key) const { return obj_.contains(key); }
    Reader sub(const std::string& key) {
        seen_.insert(key);
        static const json empty = json::object();
        auto it = obj_.find(key);
        return Reader(it == obj_.end() ? empty : *it, where_ + "." + key);
    }
    void finish() const {
        for (auto it = obj_.begin(); it != obj_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown configuration key " + where_ + "." + it.key());
    }

private:
    const json& obj_;
    std::string where_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

}  // namespace

json RunConfig::to_json() const {
    return {{"model", model_name(model)},
            {"d", d},
            {"h", h},
            {"t_max", t_max},
            {"grid", {{"kind", grid}, {"rule", grid_rule}, {"intervals", grid_intervals}}},
            {"lag_radius", lag_radius},
            {"keep_kernels_up_to", keep_kernels_up_to},
            {"spectral_only", spectral_only},
            {"seed", seed},
            {"cache_dir", cache_dir},
            {"output_dir", output_dir},
            {"workers", workers},
            {"tolerances",
             {{"partition", tol.partition},
              {"partition_continuum", tol.partition_continuum},
              {"sos", tol.sos},
              {"greens", tol.greens},
              {"residual", tol.residual},
              {"continuum", tol.continuum},
              {"leakage", tol.leakage},
              {"sampler_z", tol.sampler_z}}},
            {"checks", checks},
            {"sample", {{"box", sample.box}, {"count", sample.count}, {"t_max", sample.t_max}}},
            {"percolate",
             {{"boxes", percolate.boxes},
              {"samples", percolate.samples},
              {"t_max", percolate.t_max},
              {"levels", percolate.levels},
              {"sigma_lo", percolate.sigma_lo},
              {"sigma_hi", percolate.sigma_hi},
              {"count", percolate.count}}},
            {"sampler_check", {{"samples", sampler_check.samples}, {"t_max", sampler_check.t_max}}},
            {"percolation_check", {{"samples", percolation_check.samples}, {"t_max", percolation_check.t_max}}},
            {"greens", {{"radius", greens_radius}}},
            {"kernels", {{"ts", kernel_ts}}},
            {"continuum", {{"r_lo", continuum.r_lo}, {"r_hi", continuum.r_hi}, {"n_r", continuum.n_r}}}};
}

std::string RunConfig::hash() const {
    json j = to_json();
    j.erase("cache_dir");
    j.erase("output_dir");
    j.erase("workers");
    j["version"] = kVersion;
    return sha256_hex(j.dump());
}

RunConfig resolve_config(const json& user) {
    RunConfig c;
    Reader r(user, "config");
    std::string model = "gff";
    r.get("model", model);
    c.model = parse_model(model);
    r.get("d", c.d);
    const bool discrete = c.discrete();
    if (c.p() == 1)
        require(c.d >= 3, "d >= 3 required for " + model);
    else
        require(c.d >= 5, "d >= 5 required for " + model);
    require(c.d <= 6, "d <= 6 supported");

    // model-dependent defaults before reading the overrides
    c.h = discrete ? 0.25 : 0.5;
    c.spectral_only = discrete && c.d > 3;
    c.keep_kernels_up_to = c.d == 3 ? 16.0 : 4.0;
    c.checks = discrete ? kDiscreteDefaultChecks : kContinuumChecks;

    r.get("h", c.h);
    r.get("t_max", c.t_max);
    {
        Reader g = r.sub("grid");
        g.get("kind", c.grid);
        g.get("rule", c.grid_rule);
        g.get("intervals", c.grid_intervals);
        g.finish();
    }
    r.get("lag_radius", c.lag_radius);
    r.get("keep_kernels_up_to", c.keep_kernels_up_to);
    r.get("spectral_only", c.spectral_only);
    r.get("seed", c.seed);
    r.get("cache_dir", c.cache_dir);
    r.get("output_dir", c.output_dir);
    r.get("workers", c.workers);
    {
        Reader t = r.sub("tolerances");
        t.get("partition", c.tol.partition);
        t.get("partition_continuum", c.tol.partition_continuum);
        t.get("sos", c.tol.sos);
        t.get("greens", c.tol.greens);
        t.get("residual", c.tol.residual);
        t.get("continuum", c.tol.continuum);
        t.get("leakage", c.tol.leakage);
        t.get("sampler_z", c.tol.sampler_z);
        t.finish();
    }
    r.get("checks", c.checks);
    // a spectral-only bank has no lag autocorrelations to reconstruct from
    if (!user.contains("checks") && c.spectral_only) std::erase(c.checks, std::string("greens"));
    {
        Reader s = r.sub("sample");
        s.get("box", c.sample.box);
        s.get("count", c.sample.count);
        s.get("t_max", c.sample.t_max);
        s.finish();
    }
    {
        Reader s = r.sub("percolate");
        s.get("boxes", c.percolate.boxes);
        s.get("samples", c.percolate.samples);
        s.get("t_max", c.percolate.t_max);
        s.get("levels", c.percolate.levels);
        s.get("sigma_lo", c.percolate.sigma_lo);
        s.get("sigma_hi", c.percolate.sigma_hi);
        s.get("count", c.percolate.count);
        s.finish();
    }
    {
        Reader s = r.sub("sampler_check");
        s.get("samples", c.sampler_check.samples);
        s.get("t_max", c.sampler_check.t_max);
        s.finish();
    }
    {
        Reader s = r.sub("percolation_check");
        s.get("samples", c.percolation_check.samples);
        s.get("t_max", c.percolation_check.t_max);
        s.finish();
    }
    {
        Reader s = r.sub("greens");
        s.get("radius", c.greens_radius);
        s.finish();
    }
    {
        Reader s = r.sub("kernels");
        s.get("ts", c.kernel_ts);
        s.finish();
    }
    {
        Reader s = r.sub("continuum");
        s.get("r_lo", c.continuum.r_lo);
        s.get("r_hi", c.continuum.r_hi);
        s.get("n_r", c.continuum.n_r);
        s.finish();
    }
    r.finish();

    require(c.h > 0.0, "h must be positive");
    require(c.t_max >= 2, "t_max >= 2 required");
    require(c.grid == "unit" || c.grid == "log", "grid.kind is unit or log");
    require(c.grid_rule.size() == 3 && std::all_of(c.grid_rule.begin(), c.grid_rule.end(), [](int g) { return g >= 1; }),
            "grid.rule needs three positive entries");
    require(c.grid_intervals >= 2 && c.grid_intervals % 2 == 0, "grid.intervals must be even and >= 2");
    require(c.lag_radius >= 0, "lag_radius >= 0 required");
    require(c.keep_kernels_up_to >= 0.0, "keep_kernels_up_to >= 0 required");
    require(c.workers >= 1, "workers >= 1 required");
    const double tols[] = {c.tol.partition, c.tol.partition_continuum, c.tol.sos,     c.tol.greens,
                           c.tol.residual,  c.tol.continuum,           c.tol.leakage, c.tol.sampler_z};
    for (double t : tols) require(t > 0.0, "all tolerances must be positive");
    const auto& known = discrete ? kDiscreteChecks : kContinuumChecks;
    for (const auto& name : c.checks)
        require(std::find(known.begin(), known.end(), name) != known.end(), "unknown check '" + name + "' for " + model);
    require(c.sample.box >= 2 && c.sample.count >= 1 && c.sample.t_max >= 1.0, "sample: box >= 2, count >= 1, t_max >= 1");
    require(!c.percolate.boxes.empty() && c.percolate.samples >= 2 && c.percolate.t_max >= 1.0,
            "percolate: boxes, samples >= 2 and t_max >= 1 required");
    for (int b : c.percolate.boxes) require(b >= 2, "percolate: box sizes >= 2");
    require(std::is_sorted(c.percolate.levels.begin(), c.percolate.levels.end()), "percolate.levels must increase");
    require(c.percolate.count >= 2 && c.percolate.sigma_hi > c.percolate.sigma_lo,
            "percolate: count >= 2 and sigma_hi > sigma_lo");
    require(c.sampler_check.samples >= 2 && c.percolation_check.samples >= 2, "check sample counts >= 2");
    require(c.greens_radius >= 0, "greens.radius >= 0 required");
    require(c.continuum.r_lo > 0.0 && c.continuum.r_hi >= c.continuum.r_lo && c.continuum.n_r >= 1,
            "continuum: 0 < r_lo <= r_hi, n_r >= 1");
    return c;
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("empty key in override " + assignment);
        if (!node->is_object()) *node = json::object();
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

namespace {

std::string status_name(ArtifactCache::Status s) {
    switch (s) {
    case ArtifactCache::Status::Hit: return "hit";
    case ArtifactCache::Status::Built: return "built";
    case ArtifactCache::Status::Rebuilt: return "rebuilt";
    }
    return "?";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Shared state of one command run.
class Run {
public:
    Run(RunConfig cfg, std::string command, std::ostream& out)
        : cfg_(std::move(cfg)),
          command_(std::move(command)),
          out_(out),
          cache_(cfg_.cache_dir.empty() ? default_cache_root() : cfg_.cache_dir),
          hash_(cfg_.hash()) {}

    const RunConfig& cfg() const { return cfg_; }
    std::ostream& out() { return out_; }
    std::string tag() const { return hash_.substr(0, 16); }

    std::shared_ptr<const BumpProfile> profile() {
        if (!profile_) {
            auto res = cache_.profile(cfg_.h, 4096);
            note_cache("profile", res.path, res.status);
            profile_ = res.profile;
        }
        return profile_;
    }

    const ModelSpec& spec() {
        if (!spec_) spec_ = std::make_unique<ModelSpec>(ModelSpec::make(cfg_.model, cfg_.d));
        return *spec_;
    }

    const WeightFamily& family() {
        if (!family_) family_ = std::make_shared<WeightFamily>(spec().weight_params(), profile());
        return *family_;
    }

    ScaleGrid grid() const {
        return cfg_.grid == "unit" ? unit_scale_grid(cfg_.t_max, cfg_.grid_rule)
                                   : log_scale_grid(cfg_.t_max, cfg_.grid_intervals);
    }

    json bank_key() const {
        return {{"kind", "bank"},
                {"version", kVersion},
                {"model", model_name(cfg_.model)},
                {"d", cfg_.d},
                {"h", cfg_.h},
                {"t_max", cfg_.t_max},
                {"grid", {{"kind", cfg_.grid}, {"rule", cfg_.grid_rule}, {"intervals", cfg_.grid_intervals}}},
                {"lag_radius", cfg_.spectral_only ? -1 : cfg_.lag_radius},
                {"keep_kernels_up_to", cfg_.keep_kernels_up_to},
                {"spectral_only", cfg_.spectral_only}};
    }

    const SliceBank& bank() {
        if (!bank_) {
            const json key = bank_key();
            auto res = cache_.bank(key, [&] {
                SliceBankOptions opt;
                opt.lag_radius = cfg_.lag_radius;
                opt.keep_kernels_up_to = cfg_.keep_kernels_up_to;
                opt.spectral_only = cfg_.spectral_only;
                return build_slice_bank(spec(), family(), grid(), opt);
            });
            note_cache("bank", res.path, res.status);
            bank_ = std::make_unique<SliceBank>(std::move(res.bank));
            if (res.status != ArtifactCache::Status::Hit) {
                // the family document travels with the bank it produced
                std::vector<double> ts;
                for (const auto& s : bank_->slices) ts.push_back(s.t);
                const std::string path =
                    (std::filesystem::path(cache_.root()) / ("family-" + ArtifactCache::key(key).substr(0, 16) + ".json")).string();
                write_text(path, family_to_json(family(), ts).dump() + "\n");
            }
        }
        return *bank_;
    }

    std::vector<double> radial_ts() const {
        std::vector<double> ts;
        for (const auto& n : grid().nodes) ts.push_back(n.t);
        return ts;
    }

    const std::vector<RadialKernel>& radial() {
        if (!radial_) {
            const std::vector<double> ts = radial_ts();
            json key = {{"kind", "radial"}, {"version", kVersion}, {"model", model_name(cfg_.model)},
                        {"d", cfg_.d},      {"h", cfg_.h},         {"ts", ts}};
            auto res = cache_.radial(key, [&] {
                std::vector<RadialKernel> out(ts.size());
                auto prof = profile();
                radial_shape(prof, cfg_.d, 1);  // warm the shared shape before the workers start
                parallel_for(ts.size(), cfg_.workers,
                             [&](std::uint64_t i) { out[i] = radial_kernel(ts[i], cfg_.d, cfg_.gamma(), prof); });
                return out;
            });
            note_cache("radial", res.path, res.status);
            radial_ = std::make_unique<std::vector<RadialKernel>>(std::move(res.kernels));
        }
        return *radial_;
    }

    std::string output_path(const std::string& stem, const std::string& ext) const {
        return (std::filesystem::path(cfg_.output_dir) / (stem + "-" + tag() + ext)).string();
    }

    void add_output(const std::string& path, const std::string& sha) {
        outputs_.push_back({{"path", path}, {"sha256", sha}});
    }

    std::string write_manifest(const json& extra = json::object()) {
        json m = {{"command", command_},
                  {"version", kVersion},
                  {"config", cfg_.to_json()},
                  {"config_hash", hash_},
                  {"outputs", outputs_},
                  {"cache", cache_notes_}};
        for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = *it;
        const std::string path = output_path(command_, ".manifest.json");
        write_text(path, m.dump(2) + "\n");
        out_ << "manifest " << path << "\n";
        return path;
    }

private:
    void note_cache(const std::string& what, const std::string& path, ArtifactCache::Status s) {
        cache_notes_.push_back({{"artifact", what}, {"path", path}, {"status", status_name(s)}});
        out_ << "cache " << what << " " << status_name(s) << " " << path << "\n";
    }

    RunConfig cfg_;
    std::string command_;
    std::ostream& out_;
    ArtifactCache cache_;
    std::string hash_;
    std::shared_ptr<const BumpProfile> profile_;
    std::unique_ptr<ModelSpec> spec_;
    std::shared_ptr<WeightFamily> family_;
    std::unique_ptr<SliceBank> bank_;
    std::unique_ptr<std::vector<RadialKernel>> radial_;
    json outputs_ = json::array();
    json cache_notes_ = json::array();
};

void require_lattice(const RunConfig& c, const std::string& what) {
    if (!c.discrete()) throw ConfigError(what + " needs a lattice model (gff or membrane)");
}

void require_kernels(const RunConfig& c, double t_max, const std::string& what) {
    // the sampler uses slices with t < t_max; the unit grid has none in [t_max - 1, t_max) beyond the last node
    if (t_max > c.t_max) throw ConfigError(what + ": t_max exceeds the bank's t_max");
    if (c.keep_kernels_up_to + 1.0 < t_max)
        throw ConfigError(what + ": needs real-space kernels up to t_max; raise keep_kernels_up_to");
}

int cmd_build(Run& run) {
    const RunConfig& c = run.cfg();
    std::ostream& out = run.out();
    auto t0 = std::chrono::steady_clock::now();
    json extra;
    if (c.discrete()) {
        const SliceBank& bank = run.bank();
        out << "slices " << bank.slices.size() + 1 << " (t < 1 layer plus " << bank.slices.size() << " grid nodes)\n";
        out << "t weight support channel_supports\n";
        int widest = 0;
        for (const auto& s : bank.slices) {
            out << format_number(s.t) << " " << format_number(s.weight) << " " << s.support;
            for (int r : s.channel_support) out << " " << r;
            out << "\n";
            widest = std::max(widest, s.support);
        }
        out << "max support " << widest << "\n";
        extra = {{"slices", bank.slices.size() + 1}, {"max_support", widest}};
    } else {
        const auto& tabs = run.radial();
        out << "tables " << tabs.size() << "\n";
        out << "t support half_radius leakage\n";
        double leak = 0.0;
        for (const auto& k : tabs) {
            out << format_number(k.t) << " " << format_number(k.support) << " " << format_number(k.half_radius()) << " "
                << format_number(k.leakage()) << "\n";
            leak = std::max(leak, k.leakage());
        }
        extra = {{"tables", tabs.size()}, {"max_leakage", leak}};
    }
    out << "elapsed " << std::fixed << std::setprecision(2) << seconds_since(t0) << "s\n" << std::defaultfloat;
    run.write_manifest(extra);
    return kExitPass;
}

int cmd_verify(Run& run, const std::string& report_path) {
    const RunConfig& c = run.cfg();
    std::ostream& out = run.out();
    std::vector<CheckResult> results;
    json skipped = json::array();
    auto wants = [&](const std::string& name) {
        return std::find(c.checks.begin(), c.checks.end(), name) != c.checks.end();
    };
    auto timed = [&](const std::string& name, const std::function<CheckResult()>& fn) {
        auto t0 = std::chrono::steady_clock::now();
        CheckResult r = fn();
        r.data["seconds"] = seconds_since(t0);
        out << summary_line(r) << "\n" << std::flush;
        results.push_back(std::move(r));
        (void)name;
    };
    auto skip = [&](const std::string& name, const std::string& why) {
        skipped.push_back({{"id", name}, {"reason", why}});
        out << "SKIP " << name << ": " << why << "\n";
    };

    if (c.discrete()) {
        const WeightFamily& fam = run.family();
        const std::vector<double> ts = verification_ts(c.t_max);
        if (wants("partition")) timed("partition", [&] { return check_partition_discrete(fam, 50, c.t_max, c.tol.partition); });
        bool nonneg = true;
        if (wants("nonnegativity")) {
            timed("nonnegativity", [&] { return check_nonnegativity(fam, ts); });
            nonneg = results.back().passed;
        } else {
            nonneg = check_nonnegativity(fam, ts).passed;
        }
        if (wants("negative-control")) {
            WeightFamily wide(run.spec().weight_params(), shared_bump_profile(0.5));
            timed("negative-control", [&] { return check_negative_control(wide, ts); });
        }
        const std::vector<std::string> dependent{"sos", "finite-range", "greens", "decay", "sampler", "percolation"};
        if (!nonneg) {
            for (const auto& name : dependent)
                if (wants(name)) skip(name, "v_t is not nonnegative, no certificate or kernels exist");
        } else {
            if (wants("sos")) timed("sos", [&] { return check_sos(fam, ts, 1000, c.tol.sos); });
            const bool needs_bank = std::any_of(dependent.begin() + 1, dependent.end(), wants);
            if (needs_bank) {
                const SliceBank& bank = run.bank();
                if (wants("finite-range")) timed("finite-range", [&] { return check_finite_range(bank); });
                if (wants("greens")) {
                    if (c.spectral_only) skip("greens", "spectral-only bank carries no lag autocorrelations");
                    else
                        timed("greens", [&] {
                            GreensCheckOptions o;
                            o.lag_radius = std::min(c.greens_radius, c.lag_radius);
                            o.rel_tol = c.tol.greens;
                            o.residual_tol = c.tol.residual;
                            return check_greens(bank, fam, o);
                        });
                }
                if (wants("decay")) {
                    if (c.grid != "unit") skip("decay", "the flattened kernel needs the unit scale grid");
                    else
                        timed("decay", [&] {
                            DecayCheckOptions o;
                            o.window_hi = std::min(o.window_hi, static_cast<double>(c.t_max));
                            return check_decay(bank, fam, o);
                        });
                }
                if (wants("sampler")) {
                    if (c.spectral_only) skip("sampler", "spectral-only bank carries no lag autocorrelations");
                    else {
                        require_kernels(c, c.sampler_check.t_max, "sampler check");
                        timed("sampler", [&] {
                            SamplerCheckOptions o;
                            o.samples = c.sampler_check.samples;
                            o.t_max = c.sampler_check.t_max;
                            o.seed = c.seed;
                            o.z_max = c.tol.sampler_z;
                            o.lags.clear();
                            for (const Site& x : bank.lags) {
                                int l1sum = 0;
                                for (int v : x) l1sum += std::abs(v);
                                if (l1sum <= 2) o.lags.push_back(x);
                            }
                            return check_sampler(bank, o);
                        });
                    }
                }
                if (wants("percolation")) {
                    require_kernels(c, c.percolation_check.t_max, "percolation check");
                    timed("percolation", [&] {
                        PercolationCheckOptions o;
                        o.samples = c.percolation_check.samples;
                        o.t_max = c.percolation_check.t_max;
                        o.seed = c.seed;
                        o.workers = c.workers;
                        return check_percolation(bank, o);
                    });
                }
            }
        }
    } else {
        auto prof = run.profile();
        if (wants("partition"))
            timed("partition", [&] { return check_partition_continuum(prof, {c.gamma()}, 50, c.tol.partition_continuum); });
        if (wants("continuum"))
            timed("continuum", [&] {
                ContinuumCheckOptions o;
                o.d = c.d;
                o.gamma = c.gamma();
                o.r_lo = c.continuum.r_lo;
                o.r_hi = c.continuum.r_hi;
                o.n_r = c.continuum.n_r;
                o.rel_tol = c.tol.continuum;
                o.leakage_tol = c.tol.leakage;
                o.kernel_ts.clear();
                for (int t = 1; t <= c.t_max; t *= 2) o.kernel_ts.push_back(t);
                return check_continuum(prof, o);
            });
    }

    bool passed = true;
    json checks = json::array();
    for (const auto& r : results) {
        passed &= r.passed;
        checks.push_back(to_json(r));
    }
    if (!skipped.empty()) passed = false;  // a requested check that could not run is not a pass
    json report = {{"schema", "frd-verify/1"},
                   {"version", kVersion},
                   {"config_hash", run.cfg().hash()},
                   {"model", model_name(c.model)},
                   {"d", c.d},
                   {"h", c.h},
                   {"passed", passed},
                   {"checks", checks},
                   {"skipped", skipped}};
    const std::string path = report_path.empty() ? run.output_path("verify", ".json") : report_path;
    run.add_output(path, write_text(path, report.dump(2) + "\n"));
    out << (passed ? "PASS" : "FAIL") << " overall (" << results.size() << " checks, " << skipped.size()
        << " skipped), report " << path << "\n";
    run.write_manifest({{"passed", passed}});
    return passed ? kExitPass : kExitVerifyFail;
}

int cmd_sample(Run& run) {
    const RunConfig& c = run.cfg();
    require_lattice(c, "sample");
    require_kernels(c, c.sample.t_max, "sample");
    const SliceBank& bank = run.bank();
    FieldSampler fs(bank, c.sample.t_max);
    NoiseSource noise(c.seed);
    std::vector<std::string> chunks(c.sample.count);
    parallel_for(chunks.size(), c.workers, [&](std::uint64_t s) {
        FieldSample f = fs.sample_box(c.sample.box, s, noise);
        std::string text;
        for (std::size_t i = 0; i < f.values.size(); ++i) {
            text += std::to_string(s);
            for (int v : f.coords(i)) text += "," + std::to_string(v);
            text += "," + format_number(f.values[i]) + "\n";
        }
        chunks[s] = std::move(text);
    });
    std::string csv = "sample";
    for (int i = 0; i < c.d; ++i) csv += ",x" + std::to_string(i + 1);
    csv += ",value\n";
    for (const auto& ch : chunks) csv += ch;
    const std::string path = run.output_path("sample", ".csv");
    run.add_output(path, write_text(path, csv));
    run.out() << "wrote " << c.sample.count << " samples of side " << c.sample.box << " (variance "
              << format_number(fs.variance()) << ") to " << path << "\n";
    run.write_manifest({{"variance", fs.variance()}, {"reach", fs.reach()}});
    return kExitPass;
}

int cmd_percolate(Run& run) {
    const RunConfig& c = run.cfg();
    require_lattice(c, "percolate");
    require_kernels(c, c.percolate.t_max, "percolate");
    const SliceBank& bank = run.bank();
    FieldSampler fs(bank, c.percolate.t_max);
    const double sigma = std::sqrt(fs.variance());
    SweepConfig sc;
    sc.levels = c.percolate.levels;
    if (sc.levels.empty())
        for (int i = 0; i < c.percolate.count; ++i)
            sc.levels.push_back(sigma * (c.percolate.sigma_lo +
                                         (c.percolate.sigma_hi - c.percolate.sigma_lo) * i / (c.percolate.count - 1.0)));
    sc.box_sizes = c.percolate.boxes;
    sc.samples = c.percolate.samples;
    sc.seed = c.seed;
    sc.workers = c.workers;
    SweepOutput sw = sweep_levels(fs, sc);
    CsvWriter csv({"level", "n", "theta", "theta_se", "crossing", "crossing_se", "largest_density",
                   "largest_density_se", "samples"});
    for (const auto& r : sw.results)
        csv.row({r.level, static_cast<double>(r.n), r.theta, r.theta_se, r.crossing, r.crossing_se, r.largest_density,
                 r.largest_density_se, static_cast<double>(r.samples)});
    const std::string path = run.output_path("percolate", ".csv");
    run.add_output(path, write_text(path, csv.str()));
    run.out() << "wrote " << sw.results.size() << " rows (sigma " << format_number(sigma) << ", monotonicity violations "
              << sw.monotonicity_violations << ") to " << path << "\n";
    run.write_manifest({{"sigma", sigma}, {"monotonicity_violations", sw.monotonicity_violations}});
    return kExitPass;
}

int cmd_export_greens(Run& run) {
    const RunConfig& c = run.cfg();
    std::string csv_text;
    if (c.discrete()) {
        if (c.spectral_only) throw ConfigError("export-greens needs lag autocorrelations; set spectral_only to false");
        if (c.greens_radius > c.lag_radius) throw ConfigError("greens.radius exceeds lag_radius of the bank");
        const SliceBank& bank = run.bank();
        std::vector<Site> xs;
        for (const Site& x : bank.lags)
            if (*std::max_element(x.begin(), x.end()) <= c.greens_radius &&
                -*std::min_element(x.begin(), x.end()) <= c.greens_radius)
                xs.push_back(x);
        std::vector<double> tail = spectral_tail(run.family(), bank.spec, bank.grid.t_max, bank.lags);
        GreensOptions go;
        for (std::size_t i = 0; i < bank.lags.size(); ++i) go.exact_tail[bank.lags[i]] = tail[i];
        auto rec = greens_reconstruct(bank, xs, go);
        GreensOracle oracle(bank.spec);
        auto ref = oracle.values(xs);
        std::vector<std::string> head;
        for (int i = 0; i < c.d; ++i) head.push_back("x" + std::to_string(i + 1));
        for (const char* h : {"reconstructed", "reconstructed_error", "quadrature", "tail", "oracle", "oracle_error"})
            head.push_back(h);
        CsvWriter csv(head);
        for (const Site& x : xs) {
            std::vector<double> row(x.begin(), x.end());
            const auto& g = rec.at(x);
            const auto& o = ref.at(x);
            row.insert(row.end(), {g.value, g.error, g.quadrature, g.tail, o.value, o.error});
            csv.row(row);
        }
        csv_text = csv.str();
    } else {
        std::vector<double> rs;
        for (int i = 0; i < c.continuum.n_r; ++i)
            rs.push_back(c.continuum.n_r == 1 ? c.continuum.r_lo
                                              : c.continuum.r_lo + (c.continuum.r_hi - c.continuum.r_lo) * i / (c.continuum.n_r - 1.0));
        ContinuumOptions co;
        co.t_max = c.t_max;
        auto rec = continuum_reconstruct(c.d, c.gamma(), run.profile(), rs, co);
        CsvWriter csv({"r", "reconstructed", "error", "quadrature", "tail", "target"});
        for (double r : rs) {
            const auto& g = rec.at(r);
            csv.row({r, g.value, g.error, g.quadrature, g.tail, continuum_green(c.d, c.p(), r)});
        }
        csv_text = csv.str();
    }
    const std::string path = run.output_path("greens", ".csv");
    run.add_output(path, write_text(path, csv_text));
    run.out() << "wrote " << path << "\n";
    run.write_manifest();
    return kExitPass;
}

int cmd_export_kernels(Run& run) {
    const RunConfig& c = run.cfg();
    auto wanted = [&](double t) {
        if (c.kernel_ts.empty()) return true;
        return std::any_of(c.kernel_ts.begin(), c.kernel_ts.end(), [t](double w) { return std::abs(w - t) <= 1e-9 * t; });
    };
    std::string text;
    std::size_t exported = 0;
    if (c.discrete()) {
        const SliceBank& bank = run.bank();
        std::vector<std::string> head{"t", "channel"};
        for (int i = 0; i < c.d; ++i) head.push_back("x" + std::to_string(i + 1));
        head.push_back("value");
        CsvWriter csv(head);
        for (const auto& s : bank.slices) {
            if (!s.kernel || !wanted(s.t)) continue;
            ++exported;
            const LatticeField& f = s.kernel->field;
            for (int ch = 0; ch < f.channels(); ++ch) {
                const double* v = f.channel(ch);
                for (std::size_t i = 0; i < f.sites(); ++i) {
                    if (v[i] == 0.0) continue;
                    std::vector<double> row{s.t, static_cast<double>(ch)};
                    for (int x : f.coords(i)) row.push_back(x);
                    row.push_back(v[i]);
                    csv.row(row);
                }
            }
        }
        text = csv.str();
    } else {
        CsvWriter csv({"t", "r", "value"});
        for (const auto& k : run.radial()) {
            if (!wanted(k.t)) continue;
            ++exported;
            for (std::size_t i = 0; i < k.values.size(); ++i) csv.row({k.t, k.r_step * i, k.values[i]});
        }
        text = csv.str();
    }
    if (exported == 0) throw ConfigError("export-kernels: no stored kernel matches the requested t values");
    const std::string path = run.output_path("kernels", ".csv");
    run.add_output(path, write_text(path, text));
    run.out() << "wrote " << exported << " kernels to " << path << "\n";
    run.write_manifest({{"kernels", exported}});
    return kExitPass;
}

json read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Finite-range decompositions of Gaussian fields: build, verify, sample, percolate, export"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, model, cache_dir, output_dir;
    int d = 0, t_max = 0, workers = 0;
    double h = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::string> overrides;
    app.add_option("-c,--config", config_path, "JSON config file");
    app.add_option("--model", model, "gff | membrane | continuum-gff | continuum-membrane");
    app.add_option("-d,--dim", d, "dimension");
    app.add_option("--half-width", h, "bump half-width h");
    app.add_option("--t-max", t_max, "largest scale");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--cache-dir", cache_dir, "artifact cache (default: FRD_CACHE or ./.frd-cache)");
    app.add_option("--output-dir", output_dir, "output directory");
    app.add_option("--workers", workers, "worker threads");
    app.add_option("--set", overrides, "config override key.path=value (repeatable)");
    app.set_version_flag("--version", kVersion);

    auto* build = app.add_subcommand("build", "build and cache the slice bank or radial tables");
    auto* verify = app.add_subcommand("verify", "run the verification checks");
    std::string checks, report;
    verify->add_option("--checks", checks, "comma-separated check names, or 'all'");
    verify->add_option("--report", report, "report path (default: output dir)");
    auto* sample = app.add_subcommand("sample", "sample the field on a box");
    int box = 0, count = 0;
    sample->add_option("--box", box, "box side");
    sample->add_option("--count", count, "number of samples");
    auto* percolate = app.add_subcommand("percolate", "level-set percolation sweep");
    std::vector<int> boxes;
    std::uint64_t samples = 0;
    percolate->add_option("--boxes", boxes, "box sides");
    percolate->add_option("--samples", samples, "samples per box");
    auto* greens = app.add_subcommand("export-greens", "reconstructed Green's function next to the oracle");
    int radius = -1;
    greens->add_option("--radius", radius, "largest |x|_inf");
    auto* kernels = app.add_subcommand("export-kernels", "stored kernels as CSV");
    std::vector<double> ts;
    kernels->add_option("--t", ts, "scales to export");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitPass : kExitConfig;
    }

    try {
        json user = config_path.empty() ? json::object() : read_config_file(config_path);
        if (!model.empty()) user["model"] = model;
        if (d) user["d"] = d;
        if (h > 0) user["h"] = h;
        if (t_max) user["t_max"] = t_max;
        if (seed) user["seed"] = seed;
        if (!cache_dir.empty()) user["cache_dir"] = cache_dir;
        if (!output_dir.empty()) user["output_dir"] = output_dir;
        if (workers) user["workers"] = workers;
        if (!checks.empty()) {
            if (checks == "all") {
                user["checks"] = parse_model(user.value("model", std::string("gff"))) == Model::Gff ||
                                         parse_model(user.value("model", std::string("gff"))) == Model::Membrane
                                     ? kDiscreteChecks
                                     : kContinuumChecks;
            } else {
                std::vector<std::string> list;
                std::stringstream ss(checks);
                for (std::string item; std::getline(ss, item, ',');)
                    if (!item.empty()) list.push_back(item);
                user["checks"] = list;
            }
        }
        if (box) user["sample"]["box"] = box;
        if (count) user["sample"]["count"] = count;
        if (!boxes.empty()) user["percolate"]["boxes"] = boxes;
        if (samples) user["percolate"]["samples"] = samples;
        if (radius >= 0) user["greens"]["radius"] = radius;
        if (!ts.empty()) user["kernels"]["ts"] = ts;
        for (const auto& o : overrides) apply_override(user, o);

        RunConfig cfg = resolve_config(user);
        std::string command = app.get_subcommands().front()->get_name();
        Run run(cfg, command, out);
        out << "frd " << kVersion << " " << command << " " << model_name(cfg.model) << " d=" << cfg.d << " config "
            << run.tag() << "\n";
        if (build->parsed()) return cmd_build(run);
        if (verify->parsed()) return cmd_verify(run, report);
        if (sample->parsed()) return cmd_sample(run);
        if (percolate->parsed()) return cmd_percolate(run);
        if (greens->parsed()) return cmd_export_greens(run);
        if (kernels->parsed()) return cmd_export_kernels(run);
        return kExitConfig;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        err << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
}

}  // namespace frd
