#pragma once

#include <cmath>
#include <vector>

#include "spcgan/common.hpp"

namespace spcgan {

// Separable filtering on row-major h*w grids with symmetric (edge-inclusive
// mirror) boundary handling. Templated so the phantom generator can run in
// float and the level-set pipeline in double.

namespace detail {
inline int mirror_index(int i, int n) {
    // ... -2 -1 | 0 1 2 ... n-1 | n n+1 ...  maps to 1 0 | 0 1 2 .. | n-1 n-2
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}
}  // namespace detail

template <typename T>
std::vector<T> gaussian_kernel(T sigma) {
    if (!(sigma > T(0))) throw ValidationError("gaussian_kernel: sigma must be > 0");
    int radius = std::max(1, int(std::ceil(4.0 * double(sigma))));
    std::vector<T> k(size_t(2 * radius + 1));
    T sum = T(0);
    for (int i = -radius; i <= radius; ++i) {
        T v = std::exp(T(-0.5) * T(i) * T(i) / (sigma * sigma));
        k[size_t(i + radius)] = v;
        sum += v;
    }
    for (T& v : k) v /= sum;
    return k;
}

template <typename T>
void convolve_rows(const std::vector<T>& in, std::vector<T>& out, int h, int w,
                   const std::vector<T>& kernel) {
    int radius = int(kernel.size() / 2);
    out.resize(in.size());
    for (int r = 0; r < h; ++r) {
        const T* row = &in[size_t(r) * size_t(w)];
        T* orow = &out[size_t(r) * size_t(w)];
        for (int c = 0; c < w; ++c) {
            T acc = T(0);
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[size_t(i + radius)] * row[detail::mirror_index(c + i, w)];
            orow[c] = acc;
        }
    }
}

template <typename T>
void convolve_cols(const std::vector<T>& in, std::vector<T>& out, int h, int w,
                   const std::vector<T>& kernel) {
    int radius = int(kernel.size() / 2);
    out.resize(in.size());
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) {
            T acc = T(0);
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[size_t(i + radius)] * in[size_t(detail::mirror_index(r + i, h)) * size_t(w) + size_t(c)];
            out[size_t(r) * size_t(w) + size_t(c)] = acc;
        }
    }
}

template <typename T>
void gaussian_blur(std::vector<T>& grid, int h, int w, T sigma) {
    auto k = gaussian_kernel(sigma);
    std::vector<T> tmp;
    convolve_rows(grid, tmp, h, w, k);
    convolve_cols(tmp, grid, h, w, k);
}

// Derivative-of-Gaussian response along one axis, evaluated in the paired
// form sum_i k[i] * (v[x+i] - v[x-i]) so a constant input yields exactly
// zero in floating point.
template <typename T>
void gaussian_derivative(const std::vector<T>& in, std::vector<T>& out, int h, int w, T sigma,
                         bool along_rows) {
    auto g = gaussian_kernel(sigma);
    int radius = int(g.size() / 2);
    // smooth across the orthogonal axis first
    std::vector<T> smoothed;
    if (along_rows)
        convolve_cols(in, smoothed, h, w, g);
    else
        convolve_rows(in, smoothed, h, w, g);

    // antisymmetric taps: weight at +i is -(i/sigma^2) * G(i)
    std::vector<T> d(size_t(radius) + 1, T(0));
    for (int i = 1; i <= radius; ++i)
        d[size_t(i)] = -(T(i) / (sigma * sigma)) * g[size_t(i + radius)];

    out.resize(in.size());
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            T acc = T(0);
            for (int i = 1; i <= radius; ++i) {
                int pr = along_rows ? r : detail::mirror_index(r + i, h);
                int pc = along_rows ? detail::mirror_index(c + i, w) : c;
                int mr = along_rows ? r : detail::mirror_index(r - i, h);
                int mc = along_rows ? detail::mirror_index(c - i, w) : c;
                acc += d[size_t(i)] * (smoothed[size_t(pr) * size_t(w) + size_t(pc)] -
                                       smoothed[size_t(mr) * size_t(w) + size_t(mc)]);
            }
            out[size_t(r) * size_t(w) + size_t(c)] = acc;
        }
    }
}

}  // namespace spcgan
