#pragma once

#include "frd/continuum.hpp"
#include "frd/lattice.hpp"

#include "json.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace frd {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

// Binary slice container: magic, version, flags, JSON header, then raw little-endian
// records. A sidecar <path>.json carries the header and the SHA-256 of the binary.
constexpr std::uint32_t kContainerVersion = 1;
constexpr std::uint32_t kFlagRadial = 1u;

void write_slice_bank(const SliceBank& bank, const std::string& path, const nlohmann::json& meta);
// nullopt when the file is missing, the hash disagrees with the sidecar, or the layout is damaged.
std::optional<SliceBank> read_slice_bank(const std::string& path);

void write_radial_tables(const std::vector<RadialKernel>& kernels, const std::string& path,
                         const nlohmann::json& meta);
std::optional<std::vector<RadialKernel>> read_radial_tables(const std::string& path);

// Every table and constant of the profile; from_json restores it exactly (doubles at 17 digits).
nlohmann::json profile_to_json(const BumpProfile& profile);
std::shared_ptr<const BumpProfile> profile_from_json(const nlohmann::json& j);
// Parameters, derived constants and Chebyshev coefficients of v_t at the given t.
nlohmann::json family_to_json(const WeightFamily& family, const std::vector<double>& ts);

// Writes the text and returns its SHA-256.
std::string write_text(const std::string& path, const std::string& text);

// Plain CSV with a header row; numbers at full precision.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    void row(const std::vector<double>& values);
    void row_text(const std::vector<std::string>& values);
    std::string str() const { return out_; }

private:
    std::size_t cols_;
    std::string out_;
};

std::string format_number(double v);

// Content-addressed cache of built artifacts under a root directory.
class ArtifactCache {
public:
    explicit ArtifactCache(std::string root);
    const std::string& root() const { return root_; }

    // key = SHA-256 of the canonical JSON dump
    static std::string key(const nlohmann::json& config);
    std::string bank_path(const std::string& key) const;

    enum class Status { Hit, Built, Rebuilt };
    struct BankResult {
        SliceBank bank;
        Status status = Status::Built;
        std::string path;
    };
    BankResult bank(const nlohmann::json& config, const std::function<SliceBank()>& build) const;

    struct RadialResult {
        std::vector<RadialKernel> kernels;
        Status status = Status::Built;
        std::string path;
    };
    RadialResult radial(const nlohmann::json& config, const std::function<std::vector<RadialKernel>()>& build) const;

    struct ProfileResult {
        std::shared_ptr<const BumpProfile> profile;
        Status status = Status::Built;
        std::string path;
    };
    // JSON document guarded by the hash of its own payload.
    ProfileResult profile(double h, int n_grid) const;

private:
    std::string root_;
};

// Cache root: FRD_CACHE if set, otherwise ./.frd-cache.
std::string default_cache_root();

}  // namespace frd
