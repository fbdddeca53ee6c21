#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spcgan/image.hpp"
#include "spcgan/png16.hpp"

namespace spcgan {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum class Split { train, val, test };

inline const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}
inline Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ValidationError("unknown split: " + s);
}

constexpr int kManifestVersion = 1;

struct ManifestEntry {
    std::string id;
    std::string image_path;  // relative to the manifest file
    std::string mask_path;
    LesionClass lesion_class = LesionClass::benign;
    float spacing = 0.1f;
    uint32_t crc_image = 0;
    uint32_t crc_mask = 0;
};

struct DatasetManifest {
    int version = kManifestVersion;
    Split split = Split::train;
    uint64_t seed = 0;
    std::vector<ManifestEntry> samples;

    void validate() const {
        std::set<std::string> ids;
        for (const auto& e : samples)
            if (!ids.insert(e.id).second)
                throw ValidationError("DatasetManifest: duplicate id " + e.id);
    }
};

// quantization helpers: [-1,1] <-> uint16 for images, {0,1} <-> {0,65535}
inline std::vector<uint16_t> quantize_image(const GrayImage& img) {
    std::vector<uint16_t> q(img.pix.size());
    for (size_t i = 0; i < q.size(); ++i) {
        float v = std::clamp(img.pix[i], -1.f, 1.f);
        q[i] = uint16_t(std::lround((double(v) + 1.0) * 0.5 * 65535.0));
    }
    return q;
}
inline std::vector<uint16_t> quantize_mask(const SegMask& m) {
    std::vector<uint16_t> q(m.pix.size());
    for (size_t i = 0; i < q.size(); ++i) q[i] = m.pix[i] > 0.5f ? 65535 : 0;
    return q;
}

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
    m.validate();
    json j;
    j["version"] = m.version;
    j["split"] = to_string(m.split);
    j["seed"] = m.seed;
    j["samples"] = json::array();
    for (const auto& e : m.samples) {
        json je;
        je["id"] = e.id;
        je["image"] = e.image_path;
        je["mask"] = e.mask_path;
        je["lesion_class"] = to_string(e.lesion_class);
        je["spacing"] = e.spacing;
        char buf[16];
        std::snprintf(buf, sizeof buf, "%08x", e.crc_image);
        je["crc32_image"] = buf;
        std::snprintf(buf, sizeof buf, "%08x", e.crc_mask);
        je["crc32_mask"] = buf;
        j["samples"].push_back(je);
    }
    std::ofstream out(path);
    if (!out) throw IoError("save_manifest: cannot write " + path);
    out << j.dump(2) << "\n";
}

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_manifest: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("load_manifest: invalid JSON in " + path + ": " + e.what());
    }
    DatasetManifest m;
    m.version = j.at("version").get<int>();
    if (m.version != kManifestVersion)
        throw IoError("load_manifest: version mismatch in " + path + " (found " +
                      std::to_string(m.version) + ", expected " +
                      std::to_string(kManifestVersion) + ")");
    m.split = split_from_string(j.at("split").get<std::string>());
    m.seed = j.at("seed").get<uint64_t>();
    fs::path base = fs::path(path).parent_path();
    for (const auto& je : j.at("samples")) {
        ManifestEntry e;
        e.id = je.at("id").get<std::string>();
        e.image_path = je.at("image").get<std::string>();
        e.mask_path = je.at("mask").get<std::string>();
        e.lesion_class = lesion_class_from_string(je.at("lesion_class").get<std::string>());
        e.spacing = je.at("spacing").get<float>();
        e.crc_image = uint32_t(std::stoul(je.at("crc32_image").get<std::string>(), nullptr, 16));
        e.crc_mask = uint32_t(std::stoul(je.at("crc32_mask").get<std::string>(), nullptr, 16));
        for (const std::string& rel : {e.image_path, e.mask_path}) {
            fs::path p = base / rel;
            if (!fs::exists(p))
                throw IoError("load_manifest: sample " + e.id + " references missing file " +
                              p.string());
        }
        if (file_crc32((base / e.image_path).string()) != e.crc_image)
            throw IoError("load_manifest: checksum mismatch for image of sample " + e.id);
        if (file_crc32((base / e.mask_path).string()) != e.crc_mask)
            throw IoError("load_manifest: checksum mismatch for mask of sample " + e.id);
        m.samples.push_back(e);
    }
    m.validate();
    return m;
}

// Writes rasters plus manifest.json under dir and returns the manifest.
inline DatasetManifest write_dataset(const std::vector<PairedSample>& samples, const fs::path& dir,
                                     Split split, uint64_t seed) {
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    DatasetManifest m;
    m.split = split;
    m.seed = seed;
    for (const auto& s : samples) {
        s.validate();
        ManifestEntry e;
        e.id = s.id;
        e.image_path = "images/" + s.id + ".png";
        e.mask_path = "masks/" + s.id + ".png";
        e.lesion_class = s.lesion_class;
        e.spacing = s.image.spacing;
        write_png16((dir / e.image_path).string(), s.image.height, s.image.width,
                    quantize_image(s.image));
        write_png16((dir / e.mask_path).string(), s.mask.height, s.mask.width,
                    quantize_mask(s.mask));
        e.crc_image = file_crc32((dir / e.image_path).string());
        e.crc_mask = file_crc32((dir / e.mask_path).string());
        m.samples.push_back(e);
    }
    save_manifest(m, (dir / "manifest.json").string());
    return m;
}

inline PairedSample load_sample(const ManifestEntry& e, const fs::path& base) {
    PairedSample s;
    s.id = e.id;
    s.lesion_class = e.lesion_class;
    s.provenance = Provenance::synthetic;
    int h = 0, w = 0;
    std::vector<uint16_t> q;
    read_png16((base / e.image_path).string(), h, w, q);
    s.image = GrayImage(h, w, e.spacing);
    for (size_t i = 0; i < q.size(); ++i)
        s.image.pix[i] = float(double(q[i]) / 65535.0 * 2.0 - 1.0);
    read_png16((base / e.mask_path).string(), h, w, q);
    if (h != s.image.height || w != s.image.width)
        throw IoError("load_sample: image/mask dimensions differ for " + e.id);
    s.mask = SegMask(h, w);
    for (size_t i = 0; i < q.size(); ++i) s.mask.pix[i] = q[i] > 32767 ? 1.f : 0.f;
    s.validate();
    return s;
}

inline std::vector<PairedSample> load_samples(const DatasetManifest& m,
                                              const fs::path& manifest_path) {
    fs::path base = fs::path(manifest_path).parent_path();
    std::vector<PairedSample> out;
    out.reserve(m.samples.size());
    for (const auto& e : m.samples) out.push_back(load_sample(e, base));
    return out;
}

}  // namespace spcgan
