#pragma once

#include <vector>

#include "spcgan/manifest.hpp"
#include "spcgan/phantom.hpp"
#include "spcgan/runconfig.hpp"
#include "spcgan/trainer.hpp"

namespace spcgan {

// Nearest-neighbour mask resampling (masks must stay binary).
inline SegMask resample_mask(const SegMask& m, float spacing, float target_spacing, int dim_cap = 8192) {
    double ratio = double(spacing) / double(target_spacing);
    int oh = std::max(1, int(std::lround(double(m.height) * ratio)));
    int ow = std::max(1, int(std::lround(double(m.width) * ratio)));
    if (oh > dim_cap || ow > dim_cap) throw ResourceError("resample_mask: output exceeds dimension cap");
    SegMask out(oh, ow);
    double inv = 1.0 / ratio;
    for (int r = 0; r < oh; ++r)
        for (int c = 0; c < ow; ++c) {
            double sr = std::clamp((double(r) + 0.5) * inv - 0.5, 0.0, double(m.height - 1));
            double sc = std::clamp((double(c) + 0.5) * inv - 0.5, 0.0, double(m.width - 1));
            out.at(r, c) = nearest_sample(m.pix, m.height, m.width, sr, sc, 0.f) >= 0.5f ? 1.f : 0.f;
        }
    return out;
}

inline void mask_centroid(const SegMask& m, int& row, int& col) {
    double sr = 0, sc = 0, n = 0;
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c)
            if (m.at(r, c) > 0.5f) {
                sr += r;
                sc += c;
                n += 1;
            }
    if (n == 0) throw ValidationError("mask_centroid: empty mask");
    row = int(std::lround(sr / n));
    col = int(std::lround(sc / n));
}

// The preprocessing contract: resample to the target spacing, then crop a
// square ROI centered on the lesion.
inline PairedSample preprocess(PairedSample s, const DataSpec& data) {
    if (data.target_spacing > 0.f && data.target_spacing != s.image.spacing) {
        float native = s.image.spacing;
        s.image = resample(s.image, data.target_spacing);
        s.mask = resample_mask(s.mask, native, data.target_spacing);
    }
    if (data.roi > 0 && (s.image.height != data.roi || s.image.width != data.roi)) {
        int cr = 0, cc = 0;
        mask_centroid(s.mask, cr, cc);
        s.image = crop_roi(s.image, cr, cc, data.roi);
        s.mask = crop_roi(s.mask, cr, cc, data.roi);
    }
    s.validate();
    return s;
}

// Deterministic split generation; ids and draws depend only on (seed, split).
inline std::vector<PairedSample> make_split(const RunConfig& cfg, Split split, int count) {
    uint64_t offset = split == Split::train ? 0x100000 : (split == Split::val ? 0x200000 : 0x300000);
    std::vector<PairedSample> out;
    out.reserve(size_t(count));
    for (int i = 0; i < count; ++i) {
        auto s = generate_phantom(cfg.phantom, derive_seed(cfg.seed, offset + uint64_t(i)));
        s.id = std::string(to_string(split)) + "_" + std::to_string(i);
        out.push_back(preprocess(std::move(s), cfg.data));
    }
    return out;
}

// Segment an image whose dimensions may not satisfy the backbone divisor:
// pad to the next multiple (image-minimum fill, centered), then crop back.
inline SegMask segment_padded(const GrayImage& img, const Checkpoint& ckpt, float threshold = 0.f) {
    auto it = ckpt.net_cfgs.find("gab");
    if (it == ckpt.net_cfgs.end()) throw IoError("checkpoint has no forward generator");
    auto gcfg = GeneratorConfig::from_json(it->second.at("cfg"));
    int divisor = gcfg.backbone == Backbone::resnet9 ? 4 : (1 << gcfg.unet_depth);
    if (img.height % divisor == 0 && img.width % divisor == 0) return segment(img, ckpt, threshold);

    int ph = (img.height + divisor - 1) / divisor * divisor;
    int pw = (img.width + divisor - 1) / divisor * divisor;
    int size = std::max(ph, pw);
    GrayImage padded = crop_roi(img, img.height / 2, img.width / 2, size);
    SegMask full = segment(padded, ckpt, threshold);
    // crop_roi window starts at center - size/2
    int r0 = img.height / 2 - size / 2, c0 = img.width / 2 - size / 2;
    SegMask out(img.height, img.width);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) out.at(r, c) = full.at(r - r0, c - c0);
    return out;
}

}  // namespace spcgan
