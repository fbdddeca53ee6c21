#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "spcgan/evalstat.hpp"
#include "spcgan/filters.hpp"
#include "spcgan/image.hpp"

namespace spcgan::gac {

// Double-precision scalar grid (unit spacing).
struct Field {
    int h = 0, w = 0;
    std::vector<double> v;

    Field() = default;
    Field(int h_, int w_, double fill = 0.0) : h(h_), w(w_), v(size_t(h_) * size_t(w_), fill) {}

    double& at(int r, int c) { return v[size_t(r) * size_t(w) + size_t(c)]; }
    double at(int r, int c) const { return v[size_t(r) * size_t(w) + size_t(c)]; }
};

struct LevelSetParams {
    double epsilon = 1.0;     // curvature influence
    double alpha = 20.0;      // advection influence
    double sigma = 2.0;       // Gaussian scale in pixels
    double dt = 0.0;          // explicit time step; 0 selects 0.9x the CFL bound
    int steps = 200;
    double init_radius = 6.0; // pixels

    void validate() const {
        if (epsilon < 0.0) throw ValidationError("LevelSetParams.epsilon: must be >= 0");
        if (alpha < 0.0) throw ValidationError("LevelSetParams.alpha: must be >= 0");
        if (!(sigma > 0.0)) throw ValidationError("LevelSetParams.sigma: must be > 0");
        if (dt < 0.0) throw ValidationError("LevelSetParams.dt: must be >= 0 (0 = auto)");
        if (steps <= 0) throw ValidationError("LevelSetParams.steps: must be > 0");
        if (!(init_radius > 0.0)) throw ValidationError("LevelSetParams.init_radius: must be > 0");
    }
};

// Edge-stopping speed g = 1 / (1 + |grad(G_s * f)|), image rescaled to [0,1]
// before filtering. Exactly 1 on constant images.
inline Field speed_map(const GrayImage& img, double sigma) {
    if (!(sigma > 0.0)) throw ValidationError("speed_map: sigma must be > 0");
    img.validate();
    const int h = img.height, w = img.width;
    std::vector<double> f(img.pix.size());
    for (size_t i = 0; i < f.size(); ++i) f[i] = (double(img.pix[i]) + 1.0) * 0.5;
    std::vector<double> gx, gy;
    gaussian_derivative(f, gx, h, w, sigma, true);
    gaussian_derivative(f, gy, h, w, sigma, false);
    Field g(h, w);
    for (size_t i = 0; i < g.v.size(); ++i) g.v[i] = 1.0 / (1.0 + std::hypot(gx[i], gy[i]));
    return g;
}

// Exact signed distance to a circle, negative inside.
inline Field init_phi(int h, int w, double center_row, double center_col, double radius) {
    if (!(radius > 0.0)) throw ValidationError("init_phi: radius must be > 0");
    if (center_row < 0.0 || center_col < 0.0 || center_row > double(h - 1) ||
        center_col > double(w - 1))
        throw DomainError("init_phi: center out of bounds");
    Field phi(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            phi.at(r, c) = std::hypot(double(r) - center_row, double(c) - center_col) - radius;
    return phi;
}

inline SegMask phi_to_mask(const Field& phi) {
    SegMask m(phi.h, phi.w);
    for (size_t i = 0; i < phi.v.size(); ++i) m.pix[i] = phi.v[i] < 0.0 ? 1.f : 0.f;
    return m;
}

namespace detail {

inline void central_gradients(const Field& g, Field& gx, Field& gy) {
    gx = Field(g.h, g.w);
    gy = Field(g.h, g.w);
    for (int r = 0; r < g.h; ++r)
        for (int c = 0; c < g.w; ++c) {
            int cm = std::max(c - 1, 0), cp = std::min(c + 1, g.w - 1);
            int rm = std::max(r - 1, 0), rp = std::min(r + 1, g.h - 1);
            gx.at(r, c) = (g.at(r, cp) - g.at(r, cm)) / double(cp - cm == 0 ? 1 : cp - cm);
            gy.at(r, c) = (g.at(rp, c) - g.at(rm, c)) / double(rp - rm == 0 ? 1 : rp - rm);
        }
}

// Fast-sweeping reinitialization to a signed distance function. Interface
// cells are frozen at sub-cell distances estimated by linear interpolation.
inline void reinitialize(Field& phi) {
    const int h = phi.h, w = phi.w;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> d(phi.v.size(), inf);
    std::vector<char> frozen(phi.v.size(), 0);
    std::vector<char> sign(phi.v.size());
    bool has_interface = false;
    for (size_t i = 0; i < phi.v.size(); ++i) sign[i] = phi.v[i] < 0.0 ? -1 : 1;

    auto idx = [w](int r, int c) { return size_t(r) * size_t(w) + size_t(c); };
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double pc = phi.at(r, c);
            if (pc == 0.0) {
                d[idx(r, c)] = 0.0;
                frozen[idx(r, c)] = 1;
                has_interface = true;
                continue;
            }
            const int nr[2] = {r, r + 1}, nc[2] = {c + 1, c};
            for (int k = 0; k < 2; ++k) {
                if (nr[k] >= h || nc[k] >= w) continue;
                double pn = phi.at(nr[k], nc[k]);
                if (pc * pn < 0.0) {
                    has_interface = true;
                    double theta = std::fabs(pc) / (std::fabs(pc) + std::fabs(pn));
                    size_t ic = idx(r, c), in = idx(nr[k], nc[k]);
                    d[ic] = std::min(d[ic], theta);
                    d[in] = std::min(d[in], 1.0 - theta);
                    frozen[ic] = frozen[in] = 1;
                }
            }
        }
    }
    if (!has_interface) return;  // no contour: leave the field as-is

    auto solve = [&](int r, int c) {
        size_t i = idx(r, c);
        if (frozen[i]) return;
        double a = std::min(c > 0 ? d[idx(r, c - 1)] : inf, c + 1 < w ? d[idx(r, c + 1)] : inf);
        double b = std::min(r > 0 ? d[idx(r - 1, c)] : inf, r + 1 < h ? d[idx(r + 1, c)] : inf);
        if (a > b) std::swap(a, b);
        double cand = (b - a >= 1.0 || b == inf) ? a + 1.0
                                                 : 0.5 * (a + b + std::sqrt(2.0 - (a - b) * (a - b)));
        d[i] = std::min(d[i], cand);
    };
    for (int round = 0; round < 2; ++round) {
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) solve(r, c);
        for (int r = 0; r < h; ++r)
            for (int c = w - 1; c >= 0; --c) solve(r, c);
        for (int r = h - 1; r >= 0; --r)
            for (int c = 0; c < w; ++c) solve(r, c);
        for (int r = h - 1; r >= 0; --r)
            for (int c = w - 1; c >= 0; --c) solve(r, c);
    }
    for (size_t i = 0; i < phi.v.size(); ++i) phi.v[i] = double(sign[i]) * d[i];
}

}  // namespace detail

// Stability bound for the explicit scheme (h = 1, curvature estimate 2/h).
inline double cfl_bound(const Field& g, const LevelSetParams& p) {
    Field gx, gy;
    detail::central_gradients(g, gx, gy);
    double max_g = 0.0, max_grad = 0.0;
    for (size_t i = 0; i < g.v.size(); ++i) {
        max_g = std::max(max_g, std::fabs(g.v[i]));
        max_grad = std::max(max_grad, std::hypot(gx.v[i], gy.v[i]));
    }
    double denom = max_g * (1.0 + p.epsilon * 2.0) + p.alpha * max_grad;
    if (denom <= 0.0) return std::numeric_limits<double>::infinity();
    return 0.5 / denom;
}

// Explicit upwind evolution of
//   phi_t = -g (1 - eps*k) |grad phi| + alpha * grad g . grad phi
// with k = div(grad phi / |grad phi|) by central differences. Balloon force
// expands a negative-inside front where g is large, the curvature term
// shrinks high-curvature bumps, the advection term attracts the front to
// edges (minima of g). Reinitialized to signed distance every 20 steps.
inline Field evolve(Field phi, const Field& g, const LevelSetParams& params) {
    params.validate();
    if (phi.h != g.h || phi.w != g.w) throw ShapeError("evolve: phi and g dimensions differ");
    double bound = cfl_bound(g, params);
    double dt = params.dt;
    if (dt == 0.0) dt = 0.9 * bound;
    if (dt > bound * (1.0 + 1e-12))
        throw ValidationError("evolve: dt " + fmt_fixed(dt, 6) + " violates CFL bound " +
                              fmt_fixed(bound, 6));

    Field gx, gy;
    detail::central_gradients(g, gx, gy);
    const int h = phi.h, w = phi.w;
    Field next(h, w);
    const double k_max = 2.0;  // matches the CFL estimate

    for (int step = 1; step <= params.steps; ++step) {
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                int cm = std::max(c - 1, 0), cp = std::min(c + 1, w - 1);
                int rm = std::max(r - 1, 0), rp = std::min(r + 1, h - 1);
                double p = phi.at(r, c);
                double dmx = p - phi.at(r, cm), dpx = phi.at(r, cp) - p;
                double dmy = p - phi.at(rm, c), dpy = phi.at(rp, c) - p;

                // curvature by central differences, guarded near |grad| = 0
                double px = 0.5 * (phi.at(r, cp) - phi.at(r, cm));
                double py = 0.5 * (phi.at(rp, c) - phi.at(rm, c));
                double norm2 = px * px + py * py;
                double k = 0.0;
                if (norm2 >= 1e-16) {
                    double pxx = phi.at(r, cp) - 2.0 * p + phi.at(r, cm);
                    double pyy = phi.at(rp, c) - 2.0 * p + phi.at(rm, c);
                    double pxy = 0.25 * (phi.at(rp, cp) - phi.at(rp, cm) - phi.at(rm, cp) +
                                         phi.at(rm, cm));
                    k = (pxx * py * py - 2.0 * px * py * pxy + pyy * px * px) /
                        std::pow(norm2, 1.5);
                    k = std::clamp(k, -k_max, k_max);
                }

                double speed = g.at(r, c) * (1.0 - params.epsilon * k);
                double grad_up;
                if (speed > 0.0)
                    grad_up = std::sqrt(std::max(dmx, 0.0) * std::max(dmx, 0.0) +
                                        std::min(dpx, 0.0) * std::min(dpx, 0.0) +
                                        std::max(dmy, 0.0) * std::max(dmy, 0.0) +
                                        std::min(dpy, 0.0) * std::min(dpy, 0.0));
                else
                    grad_up = std::sqrt(std::min(dmx, 0.0) * std::min(dmx, 0.0) +
                                        std::max(dpx, 0.0) * std::max(dpx, 0.0) +
                                        std::min(dmy, 0.0) * std::min(dmy, 0.0) +
                                        std::max(dpy, 0.0) * std::max(dpy, 0.0));

                // attraction velocity -alpha * grad g, upwinded per component
                double vx = -params.alpha * gx.at(r, c);
                double vy = -params.alpha * gy.at(r, c);
                double adv = vx * (vx > 0.0 ? dmx : dpx) + vy * (vy > 0.0 ? dmy : dpy);

                next.at(r, c) = p - dt * (speed * grad_up + adv);
            }
        }
        std::swap(phi.v, next.v);
        if (step % 20 == 0 && step < params.steps) detail::reinitialize(phi);
    }
    for (double v : phi.v)
        if (!std::isfinite(v)) throw NumericFault("evolve: non-finite level set value");
    return phi;
}

// Full pipeline for one image: speed map, centered circle init, evolve,
// extract mask. The lesion is at the ROI center by the preprocessing
// contract, so the init circle sits at the image center.
inline SegMask segment_gac(const GrayImage& img, const LevelSetParams& params) {
    Field g = speed_map(img, params.sigma);
    Field phi = init_phi(img.height, img.width, 0.5 * double(img.height - 1),
                         0.5 * double(img.width - 1), params.init_radius);
    phi = evolve(std::move(phi), g, params);
    return phi_to_mask(phi);
}

struct ParamGrid {
    std::vector<double> epsilons{0.5, 2.0, 8.0};
    std::vector<double> alphas{5.0, 15.0, 45.0};
    std::vector<int> steps{150, 300};
    std::vector<double> sigmas{2.0};

    void validate() const {
        if (epsilons.empty() || alphas.empty() || steps.empty() || sigmas.empty())
            throw ValidationError("ParamGrid: empty grid axis");
    }
};

// Coordinate descent over the discrete grid maximizing mean training DSC.
// Axis order (steps, epsilon, alpha, sigma); among evaluated candidates with
// equal best score the lexicographically smallest (steps, epsilon, alpha,
// sigma) wins.
inline LevelSetParams fit_params(const std::vector<PairedSample>& train, const ParamGrid& grid_in,
                                 const LevelSetParams& base = LevelSetParams{}) {
    grid_in.validate();
    if (train.empty()) throw ValidationError("fit_params: empty training set");
    ParamGrid grid = grid_in;  // ascending axes so index order matches value order
    std::sort(grid.steps.begin(), grid.steps.end());
    std::sort(grid.epsilons.begin(), grid.epsilons.end());
    std::sort(grid.alphas.begin(), grid.alphas.end());
    std::sort(grid.sigmas.begin(), grid.sigmas.end());

    auto params_at = [&](const std::array<size_t, 4>& ix) {
        LevelSetParams p = base;
        p.steps = grid.steps[ix[0]];
        p.epsilon = grid.epsilons[ix[1]];
        p.alpha = grid.alphas[ix[2]];
        p.sigma = grid.sigmas[ix[3]];
        p.dt = 0.0;  // per-image CFL-derived step
        return p;
    };

    std::map<std::array<size_t, 4>, double> memo;
    auto score = [&](const std::array<size_t, 4>& ix) {
        auto it = memo.find(ix);
        if (it != memo.end()) return it->second;
        LevelSetParams p = params_at(ix);
        double acc = 0.0;
        for (const auto& s : train) acc += dice(segment_gac(s.image, p), s.mask);
        double v = acc / double(train.size());
        memo.emplace(ix, v);
        return v;
    };

    const std::array<size_t, 4> sizes{grid.steps.size(), grid.epsilons.size(),
                                      grid.alphas.size(), grid.sigmas.size()};
    std::array<size_t, 4> cur{0, 0, 0, 0};
    bool moved = true;
    while (moved) {
        moved = false;
        for (size_t axis = 0; axis < 4; ++axis) {
            size_t best_i = cur[axis];
            double best_v = -1.0;
            for (size_t i = 0; i < sizes[axis]; ++i) {
                auto ix = cur;
                ix[axis] = i;
                double v = score(ix);
                if (v > best_v) {
                    best_v = v;
                    best_i = i;
                }
            }
            if (best_i != cur[axis]) {
                cur[axis] = best_i;
                moved = true;
            }
        }
    }

    // deterministic tie-break over everything evaluated
    double best_v = -1.0;
    std::array<size_t, 4> best_ix = cur;
    for (const auto& [ix, v] : memo) {
        if (v > best_v || (v == best_v && ix < best_ix)) {
            best_v = v;
            best_ix = ix;
        }
    }
    return params_at(best_ix);
}

}  // namespace spcgan::gac
