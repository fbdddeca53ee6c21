#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "spcgan/manifest.hpp"
#include "spcgan/phantom.hpp"

using namespace spcgan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("spcgan_test_" + std::to_string(uint64_t(::getpid())) + "_" +
                std::to_string(rand()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<PairedSample> phantoms(int n, uint64_t base_seed = 500) {
    PhantomSpec spec;
    std::vector<PairedSample> out;
    for (int i = 0; i < n; ++i) {
        auto s = generate_phantom(spec, base_seed + uint64_t(i));
        s.id = "s" + std::to_string(i);
        out.push_back(s);
    }
    return out;
}

}  // namespace

TEST_CASE("dataset save/load round-trips structurally") {
    TempDir tmp;
    auto samples = phantoms(5);
    auto manifest = write_dataset(samples, tmp.path, Split::val, 42);
    auto loaded = load_manifest((tmp.path / "manifest.json").string());
    REQUIRE(loaded.version == kManifestVersion);
    REQUIRE(loaded.split == Split::val);
    REQUIRE(loaded.seed == 42);
    REQUIRE(loaded.samples.size() == 5);
    for (size_t i = 0; i < 5; ++i) {
        REQUIRE(loaded.samples[i].id == manifest.samples[i].id);
        REQUIRE(loaded.samples[i].lesion_class == manifest.samples[i].lesion_class);
        REQUIRE(loaded.samples[i].crc_image == manifest.samples[i].crc_image);
    }
    auto round = load_samples(loaded, tmp.path / "manifest.json");
    for (size_t i = 0; i < 5; ++i) {
        REQUIRE(round[i].id == samples[i].id);
        REQUIRE(round[i].mask.pix == samples[i].mask.pix);  // masks are exact
        double max_err = 0;
        for (size_t k = 0; k < round[i].image.pix.size(); ++k)
            max_err = std::max(max_err,
                               std::fabs(double(round[i].image.pix[k]) - double(samples[i].image.pix[k])));
        REQUIRE(max_err < 1.0 / 65535.0);  // 16-bit quantization bound
    }
}

TEST_CASE("40-sample set produces 40 unique manifest entries") {
    TempDir tmp;
    auto manifest = write_dataset(phantoms(40), tmp.path, Split::train, 7);
    REQUIRE(manifest.samples.size() == 40);
    std::set<std::string> ids;
    for (const auto& e : manifest.samples) ids.insert(e.id);
    REQUIRE(ids.size() == 40);
}

TEST_CASE("manifest referencing an absent file names the sample id") {
    TempDir tmp;
    write_dataset(phantoms(3), tmp.path, Split::train, 7);
    fs::remove(tmp.path / "images" / "s1.png");
    REQUIRE_THROWS_MATCHES(
        load_manifest((tmp.path / "manifest.json").string()), IoError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("s1")));
}

TEST_CASE("checksum mismatch is detected and names the sample") {
    TempDir tmp;
    write_dataset(phantoms(3), tmp.path, Split::train, 7);
    {
        // valid PNG with different content
        auto other = phantoms(1, 999);
        write_png16((tmp.path / "images" / "s2.png").string(), other[0].image.height,
                    other[0].image.width, quantize_image(other[0].image));
    }
    REQUIRE_THROWS_MATCHES(load_manifest((tmp.path / "manifest.json").string()), IoError,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("checksum mismatch")));
}

TEST_CASE("manifest version mismatch is rejected") {
    TempDir tmp;
    write_dataset(phantoms(1), tmp.path, Split::train, 7);
    auto mpath = tmp.path / "manifest.json";
    std::ifstream in(mpath);
    json j;
    in >> j;
    in.close();
    j["version"] = 99;
    std::ofstream out(mpath);
    out << j.dump(2);
    out.close();
    REQUIRE_THROWS_MATCHES(
        load_manifest(mpath.string()), IoError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("version")));
}

TEST_CASE("duplicate ids are rejected") {
    DatasetManifest m;
    m.samples.push_back({"dup", "a.png", "b.png", LesionClass::benign, 0.1f, 0, 0});
    m.samples.push_back({"dup", "c.png", "d.png", LesionClass::benign, 0.1f, 0, 0});
    REQUIRE_THROWS_AS(m.validate(), ValidationError);
}

TEST_CASE("png16 round-trips pixel-exact") {
    TempDir tmp;
    std::vector<uint16_t> data(31 * 17);
    Rng rng(4);
    for (auto& v : data) v = uint16_t(rng.below(65536));
    auto p = (tmp.path / "t.png").string();
    write_png16(p, 31, 17, data);
    int h = 0, w = 0;
    std::vector<uint16_t> back;
    read_png16(p, h, w, back);
    REQUIRE(h == 31);
    REQUIRE(w == 17);
    REQUIRE(back == data);
}
