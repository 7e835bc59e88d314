#include "frd/io.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>

using namespace frd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("frd-io-" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

SliceBank make_bank() {
    ModelSpec spec = ModelSpec::make(Model::Gff, 3);
    WeightFamily fam(gff_params(3), shared_bump_profile(0.25));
    SliceBankOptions opt;
    opt.lag_radius = 2;
    opt.keep_kernels_up_to = 4.0;
    return build_slice_bank(spec, fam, unit_scale_grid(6), opt);
}

void flip_byte(const fs::path& p, std::streamoff at) {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(at);
    char c = 0;
    f.read(&c, 1);
    c = static_cast<char>(c ^ 0x5a);
    f.seekp(at);
    f.write(&c, 1);
}

void check_same(const SliceBank& a, const SliceBank& b) {
    CHECK(a.spec.model == b.spec.model);
    CHECK(a.spec.d == b.spec.d);
    CHECK(a.lags == b.lags);
    CHECK(a.small_t_mass == b.small_t_mass);
    REQUIRE(a.slices.size() == b.slices.size());
    for (std::size_t i = 0; i < a.slices.size(); ++i) {
        const auto &x = a.slices[i], &y = b.slices[i];
        CHECK(x.t == y.t);
        CHECK(x.weight == y.weight);
        CHECK(x.interval == y.interval);
        CHECK(x.support == y.support);
        CHECK(x.channel_support == y.channel_support);
        CHECK(x.channel_norm2 == y.channel_norm2);
        CHECK(x.lag_values == y.lag_values);
        REQUIRE(static_cast<bool>(x.kernel) == static_cast<bool>(y.kernel));
        if (x.kernel)
            for (int ch = 0; ch < x.kernel->field.channels(); ++ch) {
                REQUIRE(x.kernel->field.sites() == y.kernel->field.sites());
                bool same = true;
                for (std::size_t k = 0; k < x.kernel->field.sites(); ++k)
                    same = same && x.kernel->field.channel(ch)[k] == y.kernel->field.channel(ch)[k];
                CHECK(same);
            }
    }
}

}  // namespace

TEST_CASE("hashing and number formatting") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0})
        CHECK(std::stod(format_number(v)) == v);
    CsvWriter w({"a", "b"});
    w.row({1.0, 0.5});
    CHECK(w.str() == "a,b\n1,0.5\n");
    CHECK_THROWS_AS(w.row({1.0}), std::invalid_argument);
}

TEST_CASE("slice bank round trip and damage detection") {
    TempDir tmp;
    SliceBank bank = make_bank();
    const fs::path p = tmp.path / "bank.bin";
    write_slice_bank(bank, p.string(), {{"note", "test"}});
    CHECK(fs::exists(p.string() + ".json"));
    auto back = read_slice_bank(p.string());
    REQUIRE(back);
    check_same(bank, *back);

    CHECK_FALSE(read_slice_bank((tmp.path / "missing.bin").string()));
    flip_byte(p, static_cast<std::streamoff>(fs::file_size(p) / 2));
    CHECK_FALSE(read_slice_bank(p.string()));
}

TEST_CASE("artifact cache hits, then rebuilds after damage") {
    TempDir tmp;
    ArtifactCache cache(tmp.path.string());
    const nlohmann::json cfg = {{"kind", "bank"}, {"t_max", 6}};
    int builds = 0;
    auto build = [&] {
        ++builds;
        return make_bank();
    };
    auto r1 = cache.bank(cfg, build);
    CHECK(r1.status == ArtifactCache::Status::Built);
    auto r2 = cache.bank(cfg, build);
    CHECK(r2.status == ArtifactCache::Status::Hit);
    CHECK(builds == 1);
    check_same(r1.bank, r2.bank);
    CHECK(ArtifactCache::key(cfg) != ArtifactCache::key({{"kind", "bank"}, {"t_max", 7}}));

    flip_byte(r1.path, 40);
    auto r3 = cache.bank(cfg, build);
    CHECK(r3.status == ArtifactCache::Status::Rebuilt);
    CHECK(builds == 2);
    CHECK(cache.bank(cfg, build).status == ArtifactCache::Status::Hit);
}

TEST_CASE("radial tables and profiles") {
    TempDir tmp;
    ArtifactCache cache(tmp.path.string());
    auto prof = shared_bump_profile(0.5);
    auto build = [&] {
        return std::vector<RadialKernel>{radial_kernel(1.0, 3, 1.0, prof), radial_kernel(2.5, 5, 0.5, prof)};
    };
    auto a = cache.radial({{"kind", "radial"}}, build);
    auto b = cache.radial({{"kind", "radial"}}, build);
    CHECK(a.status == ArtifactCache::Status::Built);
    CHECK(b.status == ArtifactCache::Status::Hit);
    REQUIRE(b.kernels.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(a.kernels[i].t == b.kernels[i].t);
        CHECK(a.kernels[i].d == b.kernels[i].d);
        CHECK(a.kernels[i].gamma == b.kernels[i].gamma);
        CHECK(a.kernels[i].support == b.kernels[i].support);
        CHECK(a.kernels[i].values == b.kernels[i].values);
    }

    auto p1 = cache.profile(0.5, 4096);
    auto p2 = cache.profile(0.5, 4096);
    CHECK(p1.status == ArtifactCache::Status::Built);
    CHECK(p2.status == ArtifactCache::Status::Hit);
    CHECK(profile_to_json(*p1.profile).dump() == profile_to_json(*p2.profile).dump());
    CHECK(profile_to_json(*profile_from_json(profile_to_json(*prof))).dump() == profile_to_json(*prof).dump());

    {
        std::ofstream(p1.path, std::ios::app) << " ";  // whitespace keeps the payload intact
    }
    CHECK(cache.profile(0.5, 4096).status == ArtifactCache::Status::Hit);
    {
        std::ofstream(p1.path, std::ios::trunc) << "{\"profile\": {}, \"sha256\": \"00\"}";
    }
    CHECK(cache.profile(0.5, 4096).status == ArtifactCache::Status::Rebuilt);
}
