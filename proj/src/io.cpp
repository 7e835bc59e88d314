#include "frd/io.hpp"

#include <openssl/evp.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace frd {

namespace {

constexpr char kMagic[8] = {'F', 'R', 'D', 'S', 'L', 'I', 'C', 'E'};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    // write then rename so a crash never leaves a half-written artifact under the final name
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

class Writer {
public:
    template <class T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const char* p = reinterpret_cast<const char*>(&v);
        buf_.append(p, sizeof(T));
    }
    template <class T>
    void put_vec(const std::vector<T>& v) {
        put<std::uint64_t>(v.size());
        if (!v.empty()) buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(T));
    }
    void put_raw(const std::string& s) { buf_.append(s); }
    const std::string& bytes() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(const std::string& b) : b_(b) {}
    template <class T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, b_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    template <class T>
    std::vector<T> get_vec() {
        auto n = get<std::uint64_t>();
        if (n > (b_.size() - pos_) / sizeof(T)) throw std::runtime_error("container truncated");
        std::vector<T> v(n);
        if (n) std::memcpy(v.data(), b_.data() + pos_, n * sizeof(T));
        pos_ += n * sizeof(T);
        return v;
    }
    std::string get_raw(std::size_t n) {
        need(n);
        std::string s = b_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == b_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > b_.size()) throw std::runtime_error("container truncated");
    }
    const std::string& b_;
    std::size_t pos_ = 0;
};

std::string container(std::uint32_t flags, const nlohmann::json& header, const std::string& payload) {
    Writer w;
    w.put_raw(std::string(kMagic, 8));
    w.put<std::uint32_t>(kContainerVersion);
    w.put<std::uint32_t>(flags);
    std::string h = header.dump();
    w.put<std::uint64_t>(h.size());
    w.put_raw(h);
    w.put_raw(payload);
    return w.bytes();
}

void write_with_sidecar(const std::string& path, const std::string& bytes, const nlohmann::json& header) {
    write_file(path, bytes);
    nlohmann::json side = header;
    side["sha256"] = sha256_hex(bytes);
    side["bytes"] = bytes.size();
    write_file(path + ".json", side.dump(2) + "\n");
}

// Verified container bytes split into (flags, header, reader positioned at the payload).
std::optional<std::pair<std::string, nlohmann::json>> open_container(const std::string& path, std::uint32_t flags,
                                                                     std::string& bytes) {
    namespace fs = std::filesystem;
    if (!fs::exists(path) || !fs::exists(path + ".json")) return std::nullopt;
    bytes = read_file(path);
    auto side = nlohmann::json::parse(read_file(path + ".json"));
    if (side.value("sha256", std::string()) != sha256_hex(bytes)) return std::nullopt;
    if (bytes.size() < 24 || std::memcmp(bytes.data(), kMagic, 8) != 0) return std::nullopt;
    std::uint32_t version, fl;
    std::uint64_t hlen;
    std::memcpy(&version, bytes.data() + 8, 4);
    std::memcpy(&fl, bytes.data() + 12, 4);
    std::memcpy(&hlen, bytes.data() + 16, 8);
    if (version != kContainerVersion || fl != flags || 24 + hlen > bytes.size()) return std::nullopt;
    auto header = nlohmann::json::parse(bytes.substr(24, hlen));
    return std::make_pair(bytes.substr(24 + hlen), header);
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest failed");
    std::ostringstream ss;
    for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return ss.str();
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

void write_slice_bank(const SliceBank& bank, const std::string& path, const nlohmann::json& meta) {
    nlohmann::json h;
    h["meta"] = meta;
    h["model"] = model_name(bank.spec.model);
    h["d"] = bank.spec.d;
    h["t_max"] = bank.grid.t_max;
    h["unit_grid"] = bank.grid.unit;
    h["nodes_per_interval"] = bank.grid.nodes_per_interval;
    h["lags"] = bank.lags;
    h["small_t_mass"] = bank.small_t_mass;
    h["small_t_value"] = bank.small_t_value;
    h["slices"] = bank.slices.size();
    Writer w;
    for (const auto& n : bank.grid.nodes) {
        w.put<double>(n.t);
        w.put<double>(n.weight);
        w.put<std::int32_t>(n.interval);
    }
    for (const auto& s : bank.slices) {
        w.put<double>(s.t);
        w.put<double>(s.weight);
        w.put<std::int32_t>(s.interval);
        w.put<std::int32_t>(s.support);
        w.put_vec(s.channel_support);
        w.put_vec(s.channel_norm2);
        w.put_vec(s.lag_values);
        w.put<std::uint8_t>(s.kernel ? 1 : 0);
        if (s.kernel) {
            const LatticeField& f = s.kernel->field;
            w.put<double>(s.kernel->t);
            w.put<std::int32_t>(f.dim());
            w.put<std::int32_t>(f.channels());
            w.put<std::int32_t>(f.radius());
            w.put<std::int32_t>(f.support());
            w.put<std::int32_t>(s.kernel->support);
            w.put_vec(s.kernel->channel_support);
            w.put_vec(f.data());
        }
    }
    h["nodes"] = bank.grid.nodes.size();
    write_with_sidecar(path, container(0, h, w.bytes()), h);
}

std::optional<SliceBank> read_slice_bank(const std::string& path) {
    try {
        std::string bytes;
        auto c = open_container(path, 0, bytes);
        if (!c) return std::nullopt;
        const auto& [payload, h] = *c;
        SliceBank bank;
        bank.spec = ModelSpec::make(parse_model(h.at("model").get<std::string>()), h.at("d").get<int>());
        bank.grid.t_max = h.at("t_max").get<double>();
        bank.grid.unit = h.at("unit_grid").get<bool>();
        bank.grid.nodes_per_interval = h.at("nodes_per_interval").get<std::vector<int>>();
        bank.lags = h.at("lags").get<std::vector<Site>>();
        for (std::size_t i = 0; i < bank.lags.size(); ++i) bank.lag_index[bank.lags[i]] = i;
        bank.small_t_mass = h.at("small_t_mass").get<double>();
        bank.small_t_value = h.at("small_t_value").get<double>();
        Reader r(payload);
        const auto n_nodes = h.at("nodes").get<std::size_t>();
        for (std::size_t i = 0; i < n_nodes; ++i) {
            ScaleNode n;
            n.t = r.get<double>();
            n.weight = r.get<double>();
            n.interval = r.get<std::int32_t>();
            bank.grid.nodes.push_back(n);
        }
        const auto n_slices = h.at("slices").get<std::size_t>();
        for (std::size_t i = 0; i < n_slices; ++i) {
            SliceRecord s;
            s.t = r.get<double>();
            s.weight = r.get<double>();
            s.interval = r.get<std::int32_t>();
            s.support = r.get<std::int32_t>();
            s.channel_support = r.get_vec<int>();
            s.channel_norm2 = r.get_vec<double>();
            s.lag_values = r.get_vec<double>();
            if (s.lag_values.size() != bank.lags.size()) return std::nullopt;
            if (r.get<std::uint8_t>()) {
                auto ks = std::make_shared<KernelSlice>();
                ks->t = r.get<double>();
                int d = r.get<std::int32_t>(), m = r.get<std::int32_t>(), R = r.get<std::int32_t>();
                int fsupp = r.get<std::int32_t>();
                ks->support = r.get<std::int32_t>();
                ks->channel_support = r.get_vec<int>();
                LatticeField f(d, m, R);
                auto data = r.get_vec<double>();
                if (data.size() != f.data().size()) return std::nullopt;
                f.data() = std::move(data);
                f.set_support(fsupp);
                ks->field = std::move(f);
                s.kernel = ks;
            }
            bank.slices.push_back(std::move(s));
        }
        if (!r.done()) return std::nullopt;
        return bank;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void write_radial_tables(const std::vector<RadialKernel>& kernels, const std::string& path,
                         const nlohmann::json& meta) {
    nlohmann::json h;
    h["meta"] = meta;
    h["radial"] = true;
    h["kernels"] = nlohmann::json::array();
    Writer w;
    for (const auto& k : kernels) {
        h["kernels"].push_back({{"t", k.t}, {"d", k.d}, {"gamma", k.gamma}, {"r_step", k.r_step}, {"support", k.support}});
        w.put_vec(k.values);
    }
    write_with_sidecar(path, container(kFlagRadial, h, w.bytes()), h);
}

std::optional<std::vector<RadialKernel>> read_radial_tables(const std::string& path) {
    try {
        std::string bytes;
        auto c = open_container(path, kFlagRadial, bytes);
        if (!c) return std::nullopt;
        const auto& [payload, h] = *c;
        Reader r(payload);
        std::vector<RadialKernel> out;
        for (const auto& e : h.at("kernels")) {
            RadialKernel k;
            k.t = e.at("t").get<double>();
            k.d = e.at("d").get<int>();
            k.gamma = e.at("gamma").get<double>();
            k.r_step = e.at("r_step").get<double>();
            k.support = e.at("support").get<double>();
            k.values = r.get_vec<double>();
            out.push_back(std::move(k));
        }
        if (!r.done()) return std::nullopt;
        return out;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::string write_text(const std::string& path, const std::string& text) {
    write_file(path, text);
    return sha256_hex(text);
}

std::string format_number(double v) {
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

CsvWriter::CsvWriter(std::vector<std::string> header) : cols_(header.size()) {
    row_text(header);
}

void CsvWriter::row(const std::vector<double>& values) {
    std::vector<std::string> s;
    s.reserve(values.size());
    for (double v : values) s.push_back(format_number(v));
    row_text(s);
}

void CsvWriter::row_text(const std::vector<std::string>& values) {
    if (values.size() != cols_) throw std::invalid_argument("CsvWriter: column count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out_ += ',';
        out_ += values[i];
    }
    out_ += '\n';
}

ArtifactCache::ArtifactCache(std::string root) : root_(std::move(root)) {}

std::string ArtifactCache::key(const nlohmann::json& config) { return sha256_hex(config.dump()); }

std::string ArtifactCache::bank_path(const std::string& key) const {
    return (std::filesystem::path(root_) / ("bank-" + key.substr(0, 16) + ".bin")).string();
}

ArtifactCache::BankResult ArtifactCache::bank(const nlohmann::json& config,
                                              const std::function<SliceBank()>& build) const {
    BankResult res;
    const std::string k = key(config);
    res.path = bank_path(k);
    const bool present = std::filesystem::exists(res.path);
    if (present) {
        if (auto b = read_slice_bank(res.path)) {
            res.bank = std::move(*b);
            res.status = Status::Hit;
            return res;
        }
    }
    res.bank = build();
    nlohmann::json meta = config;
    meta["cache_key"] = k;
    write_slice_bank(res.bank, res.path, meta);
    res.status = present ? Status::Rebuilt : Status::Built;
    return res;
}

ArtifactCache::RadialResult ArtifactCache::radial(const nlohmann::json& config,
                                                  const std::function<std::vector<RadialKernel>()>& build) const {
    RadialResult res;
    const std::string k = key(config);
    res.path = (std::filesystem::path(root_) / ("radial-" + k.substr(0, 16) + ".bin")).string();
    const bool present = std::filesystem::exists(res.path);
    if (present) {
        if (auto r = read_radial_tables(res.path)) {
            res.kernels = std::move(*r);
            res.status = Status::Hit;
            return res;
        }
    }
    res.kernels = build();
    nlohmann::json meta = config;
    meta["cache_key"] = k;
    write_radial_tables(res.kernels, res.path, meta);
    res.status = present ? Status::Rebuilt : Status::Built;
    return res;
}

ArtifactCache::ProfileResult ArtifactCache::profile(double h, int n_grid) const {
    ProfileResult res;
    const nlohmann::json config = {{"kind", "profile"}, {"h", h}, {"n_grid", n_grid}};
    const std::string k = key(config);
    res.path = (std::filesystem::path(root_) / ("profile-" + k.substr(0, 16) + ".json")).string();
    const bool present = std::filesystem::exists(res.path);
    if (present) {
        try {
            auto doc = nlohmann::json::parse(read_file(res.path));
            const auto& body = doc.at("profile");
            if (doc.at("sha256").get<std::string>() == sha256_hex(body.dump())) {
                res.profile = profile_from_json(body);
                res.status = Status::Hit;
                return res;
            }
        } catch (const std::exception&) {
        }
    }
    res.profile = build_bump_profile(h, n_grid);
    nlohmann::json body = profile_to_json(*res.profile);
    nlohmann::json doc = {{"config", config}, {"sha256", sha256_hex(body.dump())}, {"profile", body}};
    write_file(res.path, doc.dump() + "\n");
    res.status = present ? Status::Rebuilt : Status::Built;
    return res;
}

nlohmann::json profile_to_json(const BumpProfile& p) {
    return {{"h", p.h},
            {"n_grid", p.n_grid},
            {"xi_step", p.xi_step},
            {"kappa_hat", p.kappa_hat},
            {"phi_sq_hat", p.phi_sq_hat},
            {"s_step", p.s_step},
            {"s_max", p.s_max},
            {"phi_table", p.phi_table},
            {"cprime", p.cprime_values},
            {"moment_tails", p.moment_tails}};
}

std::shared_ptr<const BumpProfile> profile_from_json(const nlohmann::json& j) {
    auto p = std::make_shared<BumpProfile>();
    p->h = j.at("h").get<double>();
    p->n_grid = j.at("n_grid").get<int>();
    p->xi_step = j.at("xi_step").get<double>();
    p->kappa_hat = j.at("kappa_hat").get<std::vector<double>>();
    p->phi_sq_hat = j.at("phi_sq_hat").get<std::vector<double>>();
    p->s_step = j.at("s_step").get<double>();
    p->s_max = j.at("s_max").get<double>();
    p->phi_table = j.at("phi_table").get<std::vector<double>>();
    p->cprime_values = j.at("cprime").get<std::vector<double>>();
    p->moment_tails = j.at("moment_tails").get<std::vector<std::vector<double>>>();
    if (p->kappa_hat.size() != static_cast<std::size_t>(2 * p->n_grid + 1) || p->phi_table.empty())
        throw std::runtime_error("profile_from_json: inconsistent tables");
    return p;
}

nlohmann::json family_to_json(const WeightFamily& f, const std::vector<double>& ts) {
    const WeightParams& wp = f.params();
    nlohmann::json slices = nlohmann::json::array();
    for (double t : ts) slices.push_back({{"t", t}, {"chebyshev", f.chebyshev_coeffs(t)}});
    return {{"model", model_name(wp.model)},
            {"d", wp.d},
            {"p", wp.p},
            {"gamma", wp.gamma},
            {"B", wp.B},
            {"c", wp.c()},
            {"alpha", wp.alpha},
            {"partial_fractions", wp.pf_coeffs},
            {"h", f.profile().h},
            {"wbar1", f.wbar1()},
            {"Gamma", f.Gamma()},
            {"small_t_mass", f.small_t_mass()},
            {"sos_floor_rel", f.options().sos_floor_rel},
            {"slices", slices}};
}

std::string default_cache_root() {
    const char* env = std::getenv("FRD_CACHE");
    return env && *env ? std::string(env) : std::string(".frd-cache");
}

}  // namespace frd
