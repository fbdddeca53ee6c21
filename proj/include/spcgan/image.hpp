#pragma once

#include <string>
#include <vector>

#include "spcgan/common.hpp"
#include "spcgan/tensor.hpp"

namespace spcgan {

// Single-channel 2D image with isotropic physical spacing. Values live in
// [-1, 1]; masks use {0, 1}.
struct GrayImage {
    int height = 0;
    int width = 0;
    float spacing = 1.0f;  // mm per pixel
    std::vector<float> pix;

    GrayImage() = default;
    GrayImage(int h, int w, float sp, float fill = 0.f)
        : height(h), width(w), spacing(sp), pix(size_t(h) * size_t(w), fill) {
        validate();
    }

    float& at(int r, int c) { return pix[size_t(r) * size_t(width) + size_t(c)]; }
    float at(int r, int c) const { return pix[size_t(r) * size_t(width) + size_t(c)]; }
    size_t numel() const { return pix.size(); }

    void validate() const {
        if (height < 1 || width < 1) throw ValidationError("GrayImage: dimensions must be >= 1");
        if (!(spacing > 0.f)) throw ValidationError("GrayImage: spacing must be > 0");
        if (pix.size() != size_t(height) * size_t(width))
            throw ValidationError("GrayImage: buffer size mismatch");
        for (float v : pix)
            if (!std::isfinite(v) || v < -1.f || v > 1.f)
                throw ValidationError("GrayImage: values must be finite and within [-1, 1]");
    }

    float min_value() const {
        float m = pix.empty() ? 0.f : pix[0];
        for (float v : pix) m = std::min(m, v);
        return m;
    }

    Tensor to_tensor() const {
        Tensor t({1, height, width});
        t.data.assign(pix.begin(), pix.end());
        return t;
    }
};

struct SegMask {
    int height = 0;
    int width = 0;
    std::vector<float> pix;  // in [0, 1]
    bool binarized = true;

    SegMask() = default;
    SegMask(int h, int w, bool bin = true)
        : height(h), width(w), pix(size_t(h) * size_t(w), 0.f), binarized(bin) {}

    float& at(int r, int c) { return pix[size_t(r) * size_t(width) + size_t(c)]; }
    float at(int r, int c) const { return pix[size_t(r) * size_t(width) + size_t(c)]; }

    void validate() const {
        if (height < 1 || width < 1) throw ValidationError("SegMask: dimensions must be >= 1");
        if (pix.size() != size_t(height) * size_t(width))
            throw ValidationError("SegMask: buffer size mismatch");
        for (float v : pix) {
            if (!std::isfinite(v) || v < 0.f || v > 1.f)
                throw ValidationError("SegMask: values must lie in [0, 1]");
            if (binarized && v != 0.f && v != 1.f)
                throw ValidationError("SegMask: binarized mask must contain only {0, 1}");
        }
    }

    int64_t foreground_count() const {
        int64_t n = 0;
        for (float v : pix) n += (v > 0.5f);
        return n;
    }
};

enum class LesionClass { benign, malignant };
enum class Provenance { synthetic, external };

inline const char* to_string(LesionClass c) {
    return c == LesionClass::benign ? "benign" : "malignant";
}
inline LesionClass lesion_class_from_string(const std::string& s) {
    if (s == "benign") return LesionClass::benign;
    if (s == "malignant") return LesionClass::malignant;
    throw ValidationError("unknown lesion class: " + s);
}

// One image/mask pair; the unit of every dataset in this project.
struct PairedSample {
    std::string id;
    GrayImage image;
    SegMask mask;
    LesionClass lesion_class = LesionClass::benign;
    Provenance provenance = Provenance::synthetic;

    void validate() const {
        image.validate();
        mask.validate();
        if (mask.height != image.height || mask.width != image.width)
            throw ValidationError("PairedSample " + id + ": mask and image dimensions differ");
        if (!mask.binarized) throw ValidationError("PairedSample " + id + ": mask not binarized");
        if (mask.foreground_count() < 1)
            throw ValidationError("PairedSample " + id + ": mask has no foreground pixels");
    }
};

}  // namespace spcgan
