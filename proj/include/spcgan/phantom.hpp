#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "spcgan/common.hpp"
#include "spcgan/filters.hpp"
#include "spcgan/image.hpp"

namespace spcgan {

// Parameters of the synthetic ultrasound phantom. One phantom is a single
// hypoechoic lesion on a speckled background with optional posterior
// shadowing and monotone depth attenuation.
struct PhantomSpec {
    int canvas_height = 64;
    int canvas_width = 64;
    float spacing = 0.1f;              // mm per pixel
    float lesion_radius_min = 8.f;     // pixels
    float lesion_radius_max = 16.f;    // pixels
    float boundary_blur_sigma = 1.5f;  // pixels
    float shadow_probability = 0.35f;
    float shadow_attenuation = 0.45f;  // intensity multiplier deep in the shadow
    float speckle_grain = 1.2f;        // pixels
    float lesion_contrast = 0.55f;     // relative echogenicity drop inside the lesion
    float depth_attenuation = 0.998f;  // per-row multiplicative factor
    float malignant_fraction = 0.3f;

    void validate() const {
        if (canvas_height < 8 || canvas_width < 8)
            throw ValidationError("PhantomSpec.canvas: must be at least 8x8");
        if (!(spacing > 0.f)) throw ValidationError("PhantomSpec.spacing: must be > 0");
        if (!(lesion_radius_min > 1.f) || !(lesion_radius_max >= lesion_radius_min))
            throw ValidationError("PhantomSpec.lesion_radius_range: non-degenerate range > 1 required");
        if (lesion_radius_max >= 0.5f * float(std::min(canvas_height, canvas_width)))
            throw ValidationError("PhantomSpec.lesion_radius_range: radius_max must be < min(canvas)/2");
        if (!(boundary_blur_sigma > 0.f))
            throw ValidationError("PhantomSpec.boundary_blur_sigma: must be > 0");
        if (shadow_probability < 0.f || shadow_probability > 1.f)
            throw ValidationError("PhantomSpec.shadow_probability: must lie in [0, 1]");
        if (shadow_attenuation < 0.f || shadow_attenuation > 1.f)
            throw ValidationError("PhantomSpec.shadow_attenuation: must lie in [0, 1]");
        if (!(speckle_grain > 0.f)) throw ValidationError("PhantomSpec.speckle_grain: must be > 0");
        if (lesion_contrast <= 0.f || lesion_contrast > 1.f)
            throw ValidationError("PhantomSpec.lesion_contrast: must lie in (0, 1]");
        if (!(depth_attenuation > 0.f) || depth_attenuation > 1.f)
            throw ValidationError("PhantomSpec.depth_attenuation: must lie in (0, 1]");
        if (malignant_fraction < 0.f || malignant_fraction > 1.f)
            throw ValidationError("PhantomSpec.malignant_fraction: must lie in [0, 1]");
    }
};

// Geometric augmentation ranges (applied identically to image and mask).
struct AugConfig {
    float shear_range = 0.2f;         // radians
    float rotation_range_deg = 10.f;  // degrees
    float width_shift = 0.1f;         // fraction of width
    float height_shift = 0.1f;        // fraction of height
    float zoom_range = 0.1f;          // scale in [1-z, 1+z]
    bool horizontal_flip = true;

    void validate() const {
        if (shear_range < 0.f || rotation_range_deg < 0.f || width_shift < 0.f ||
            height_shift < 0.f || zoom_range < 0.f)
            throw ValidationError("AugConfig: all ranges must be >= 0");
        if (zoom_range >= 1.f) throw ValidationError("AugConfig.zoom_range: must be < 1");
    }
};

namespace detail {

struct LesionShape {
    double center_r, center_c;
    double r_along, r_across;  // semi-axes, area-preserving: r_along*r_across = r0^2
    double theta;
    double fourier_amp[4];
    double fourier_phase[4];

    bool inside(double r, double c) const {
        double dr = r - center_r, dc = c - center_c;
        double u = std::cos(theta) * dc + std::sin(theta) * dr;
        double v = -std::sin(theta) * dc + std::cos(theta) * dr;
        double s = std::hypot(u / r_along, v / r_across);
        double phi = std::atan2(v, u);
        double rho = 1.0;
        for (int m = 0; m < 4; ++m) rho += fourier_amp[m] * std::cos(double(m + 2) * phi + fourier_phase[m]);
        return s <= rho;
    }
};

inline LesionShape draw_lesion_shape(const PhantomSpec& spec, Rng& rng, bool malignant) {
    LesionShape sh{};
    double h = spec.canvas_height, w = spec.canvas_width;
    sh.center_r = 0.5 * (h - 1) + rng.uniform(-h / 12.0, h / 12.0);
    sh.center_c = 0.5 * (w - 1) + rng.uniform(-w / 12.0, w / 12.0);
    double r0 = rng.uniform(spec.lesion_radius_min, spec.lesion_radius_max);
    double aspect = rng.uniform(0.85, 1.0);
    sh.r_along = r0 / std::sqrt(aspect);
    sh.r_across = r0 * std::sqrt(aspect);
    sh.theta = rng.uniform(0.0, M_PI);
    double irregularity = malignant ? 0.20 : 0.07;
    for (int m = 0; m < 4; ++m) {
        sh.fourier_amp[m] = rng.uniform(0.0, irregularity / double(m + 2));
        sh.fourier_phase[m] = rng.uniform(0.0, 2.0 * M_PI);
    }
    return sh;
}

}  // namespace detail

// Deterministic phantom generation: pure function of (spec, seed).
inline PairedSample generate_phantom(const PhantomSpec& spec, uint64_t seed) {
    spec.validate();
    const int h = spec.canvas_height, w = spec.canvas_width;

    Rng class_rng(derive_seed(seed, 0xC1A55));
    Rng shape_rng(derive_seed(seed, 0x5AAFE));
    Rng speckle_rng(derive_seed(seed, 0x5BECC1E));
    Rng shadow_rng(derive_seed(seed, 0x5AAD0));

    bool malignant = class_rng.bernoulli(spec.malignant_fraction);
    auto shape = detail::draw_lesion_shape(spec, shape_rng, malignant);

    // Exact lesion support; this is the ground-truth mask (pre-blur).
    SegMask mask(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (shape.inside(double(r), double(c))) mask.at(r, c) = 1.f;
    // center pixel is always inside
    mask.at(int(std::lround(shape.center_r)), int(std::lround(shape.center_c))) = 1.f;

    // Echogenicity map: darker lesion on a brighter background, fuzzy edge.
    const float bg = 0.75f;
    std::vector<float> refl(size_t(h) * size_t(w), bg);
    for (size_t i = 0; i < refl.size(); ++i)
        if (mask.pix[i] > 0.5f) refl[i] = bg * (1.f - spec.lesion_contrast);
    gaussian_blur(refl, h, w, spec.boundary_blur_sigma);

    // Speckle: squared low-pass-filtered Gaussian quadrature pair, sample
    // mean normalized to 1 so it acts as a pure multiplicative texture.
    std::vector<float> u(refl.size()), v(refl.size());
    for (size_t i = 0; i < u.size(); ++i) u[i] = float(speckle_rng.normal());
    for (size_t i = 0; i < v.size(); ++i) v[i] = float(speckle_rng.normal());
    gaussian_blur(u, h, w, spec.speckle_grain);
    gaussian_blur(v, h, w, spec.speckle_grain);
    std::vector<float> speckle(refl.size());
    double mean = 0.0;
    for (size_t i = 0; i < speckle.size(); ++i) {
        speckle[i] = u[i] * u[i] + v[i] * v[i];
        mean += speckle[i];
    }
    mean /= double(speckle.size());
    const float blend = 0.6f;  // full-strength speckle is too destructive at 64x64
    for (float& s : speckle) s = (1.f - blend) + blend * float(double(s) / mean);

    // Posterior shadow: columns under the lesion, linear onset below the
    // per-column lower lesion edge.
    std::vector<float> shadow(refl.size(), 1.f);
    if (shadow_rng.bernoulli(spec.shadow_probability)) {
        const float onset_px = 6.f;
        for (int c = 0; c < w; ++c) {
            int bottom = -1;
            for (int r = h - 1; r >= 0; --r)
                if (mask.at(r, c) > 0.5f) {
                    bottom = r;
                    break;
                }
            if (bottom < 0) continue;
            for (int r = bottom + 1; r < h; ++r) {
                float t = std::min(1.f, float(r - bottom) / onset_px);
                shadow[size_t(r) * size_t(w) + size_t(c)] = 1.f - t * (1.f - spec.shadow_attenuation);
            }
        }
    }

    GrayImage img(h, w, spec.spacing);
    for (int r = 0; r < h; ++r) {
        float depth = std::pow(spec.depth_attenuation, float(r));
        for (int c = 0; c < w; ++c) {
            size_t i = size_t(r) * size_t(w) + size_t(c);
            float intensity = refl[i] * speckle[i] * shadow[i] * depth;
            img.pix[i] = std::clamp(2.f * intensity - 1.f, -1.f, 1.f);
        }
    }

    PairedSample s;
    s.id = "phantom_" + std::to_string(seed);
    s.image = std::move(img);
    s.mask = std::move(mask);
    s.lesion_class = malignant ? LesionClass::malignant : LesionClass::benign;
    s.provenance = Provenance::synthetic;
    s.validate();
    return s;
}

inline float bilinear_sample(const std::vector<float>& g, int h, int w, double r, double c,
                             float fill) {
    if (r < -0.5 || c < -0.5 || r > double(h) - 0.5 || c > double(w) - 0.5) return fill;
    double rc = std::clamp(r, 0.0, double(h - 1));
    double cc = std::clamp(c, 0.0, double(w - 1));
    int r0 = int(std::floor(rc)), c0 = int(std::floor(cc));
    int r1 = std::min(r0 + 1, h - 1), c1 = std::min(c0 + 1, w - 1);
    double fr = rc - r0, fc = cc - c0;
    double v00 = g[size_t(r0) * size_t(w) + size_t(c0)], v01 = g[size_t(r0) * size_t(w) + size_t(c1)];
    double v10 = g[size_t(r1) * size_t(w) + size_t(c0)], v11 = g[size_t(r1) * size_t(w) + size_t(c1)];
    return float((1 - fr) * ((1 - fc) * v00 + fc * v01) + fr * ((1 - fc) * v10 + fc * v11));
}

inline float nearest_sample(const std::vector<float>& g, int h, int w, double r, double c,
                            float fill) {
    long ri = std::lround(r), ci = std::lround(c);
    if (ri < 0 || ci < 0 || ri >= h || ci >= w) return fill;
    return g[size_t(ri) * size_t(w) + size_t(ci)];
}

// Resample to a new isotropic spacing with bilinear interpolation.
inline GrayImage resample(const GrayImage& img, float target_spacing, int dim_cap = 8192) {
    img.validate();
    if (!(target_spacing > 0.f)) throw ValidationError("resample: target_spacing must be > 0");
    double ratio = double(img.spacing) / double(target_spacing);
    int oh = std::max(1, int(std::lround(double(img.height) * ratio)));
    int ow = std::max(1, int(std::lround(double(img.width) * ratio)));
    if (oh > dim_cap || ow > dim_cap)
        throw ResourceError("resample: output " + std::to_string(oh) + "x" + std::to_string(ow) +
                            " exceeds dimension cap " + std::to_string(dim_cap));
    GrayImage out(oh, ow, target_spacing);
    double inv = double(target_spacing) / double(img.spacing);
    for (int r = 0; r < oh; ++r) {
        double sr = (double(r) + 0.5) * inv - 0.5;
        for (int c = 0; c < ow; ++c) {
            double sc = (double(c) + 0.5) * inv - 0.5;
            double rr = std::clamp(sr, 0.0, double(img.height - 1));
            double cc = std::clamp(sc, 0.0, double(img.width - 1));
            out.at(r, c) = bilinear_sample(img.pix, img.height, img.width, rr, cc, 0.f);
        }
    }
    return out;
}

// Square window centered at (row, col); out-of-bounds area is filled with
// the image minimum (anechoic border).
inline GrayImage crop_roi(const GrayImage& img, int center_row, int center_col, int size) {
    img.validate();
    if (size < 1) throw ValidationError("crop_roi: size must be >= 1");
    if (center_row < 0 || center_col < 0 || center_row >= img.height || center_col >= img.width)
        throw DomainError("crop_roi: center outside image");
    float fill = img.min_value();
    int r0 = center_row - size / 2;
    int c0 = center_col - size / 2;
    GrayImage out(size, size, img.spacing, fill);
    for (int r = 0; r < size; ++r) {
        int sr = r0 + r;
        if (sr < 0 || sr >= img.height) continue;
        for (int c = 0; c < size; ++c) {
            int sc = c0 + c;
            if (sc < 0 || sc >= img.width) continue;
            out.at(r, c) = img.at(sr, sc);
        }
    }
    return out;
}

inline SegMask crop_roi(const SegMask& mask, int center_row, int center_col, int size) {
    if (size < 1) throw ValidationError("crop_roi: size must be >= 1");
    if (center_row < 0 || center_col < 0 || center_row >= mask.height || center_col >= mask.width)
        throw DomainError("crop_roi: center outside mask");
    int r0 = center_row - size / 2;
    int c0 = center_col - size / 2;
    SegMask out(size, size, mask.binarized);
    for (int r = 0; r < size; ++r) {
        int sr = r0 + r;
        if (sr < 0 || sr >= mask.height) continue;
        for (int c = 0; c < size; ++c) {
            int sc = c0 + c;
            if (sc < 0 || sc >= mask.width) continue;
            out.at(r, c) = mask.at(sr, sc);
        }
    }
    return out;
}

namespace detail {

// 2x2 affine A and shift t acting on (row, col) around the image center:
// q = center + A * (p - center) + t.
struct Affine {
    double a00, a01, a10, a11;  // row' = a00*row + a01*col, col' = a10*row + a11*col
    double tr, tc;
    double cr, cc;

    // inverse map: output pixel -> source location
    void source(double qr, double qc, double& pr, double& pc) const {
        double det = a00 * a11 - a01 * a10;
        double dr = qr - cr - tr, dc = qc - cc - tc;
        pr = cr + (a11 * dr - a01 * dc) / det;
        pc = cc + (-a10 * dr + a00 * dc) / det;
    }
};

inline Affine draw_affine(int h, int w, const AugConfig& cfg, Rng& rng) {
    double shear = rng.uniform(-double(cfg.shear_range), double(cfg.shear_range));
    double rot = rng.uniform(-double(cfg.rotation_range_deg), double(cfg.rotation_range_deg)) *
                 M_PI / 180.0;
    double sc = rng.uniform(-double(cfg.width_shift), double(cfg.width_shift)) * double(w);
    double sr = rng.uniform(-double(cfg.height_shift), double(cfg.height_shift)) * double(h);
    double zoom = rng.uniform(1.0 - double(cfg.zoom_range), 1.0 + double(cfg.zoom_range));
    bool flip = cfg.horizontal_flip && rng.bernoulli(0.5);

    // zoom & flip, then x-shear, then rotation (acting on (row, col))
    double zr = zoom, zc = flip ? -zoom : zoom;
    // shear: col' = col + shear*row
    double s00 = zr, s01 = 0.0, s10 = shear * zr, s11 = zc;
    double cs = std::cos(rot), sn = std::sin(rot);
    // rotation on (row, col): row' = cos*row + sin*col ; col' = -sin*row + cos*col
    Affine a{};
    a.a00 = cs * s00 + sn * s10;
    a.a01 = cs * s01 + sn * s11;
    a.a10 = -sn * s00 + cs * s10;
    a.a11 = -sn * s01 + cs * s11;
    a.tr = sr;
    a.tc = sc;
    a.cr = 0.5 * double(h - 1);
    a.cc = 0.5 * double(w - 1);
    return a;
}

}  // namespace detail

// Identical random geometric transform applied to image (bilinear) and mask
// (nearest neighbour, re-binarized). Deterministic given the seed.
inline PairedSample augment(const PairedSample& sample, const AugConfig& cfg, uint64_t seed) {
    cfg.validate();
    const int h = sample.image.height, w = sample.image.width;
    Rng rng(seed);
    auto affine = detail::draw_affine(h, w, cfg, rng);

    PairedSample out = sample;
    float fill = sample.image.min_value();
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double pr, pc;
            affine.source(double(r), double(c), pr, pc);
            out.image.at(r, c) = bilinear_sample(sample.image.pix, h, w, pr, pc, fill);
            float mv = nearest_sample(sample.mask.pix, h, w, pr, pc, 0.f);
            out.mask.at(r, c) = mv >= 0.5f ? 1.f : 0.f;
        }
    }
    out.mask.binarized = true;
    return out;
}

}  // namespace spcgan
