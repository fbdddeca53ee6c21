#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "spcgan/blas.hpp"
#include "spcgan/tensor.hpp"

namespace spcgan::nn {

// Reverse-mode autodiff over TensorT<T>. Each forward call builds a fresh
// graph; parameters are persistent leaf nodes whose grads accumulate across
// backward() until zeroed. Single-threaded by design: determinism matters
// more than parallel speedups here, and the heavy lifting is inside gemm.
template <typename T>
struct VarT {
    TensorT<T> v;
    TensorT<T> g;
    bool requires_grad = false;
    std::vector<std::shared_ptr<VarT>> parents;
    std::function<void(VarT&)> backward_fn;

    void ensure_grad() {
        if (g.data.empty()) g = TensorT<T>(v.shape);
    }
};

template <typename T>
using VarPtrT = std::shared_ptr<VarT<T>>;

using Var = VarT<float>;
using VarPtr = VarPtrT<float>;

template <typename T>
VarPtrT<T> constant(TensorT<T> t) {
    auto n = std::make_shared<VarT<T>>();
    n->v = std::move(t);
    return n;
}

template <typename T>
VarPtrT<T> leaf(TensorT<T> t) {
    auto n = std::make_shared<VarT<T>>();
    n->v = std::move(t);
    n->requires_grad = true;
    return n;
}

template <typename T>
VarPtrT<T> make_node(TensorT<T> value, std::vector<VarPtrT<T>> parents,
                     std::function<void(VarT<T>&)> back) {
    auto n = std::make_shared<VarT<T>>();
    n->v = std::move(value);
    for (const auto& p : parents) n->requires_grad |= p->requires_grad;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(back);
    }
    return n;
}

template <typename T>
void backward(const VarPtrT<T>& root) {
    if (root->v.numel() != 1) throw ShapeError("backward: root must be a scalar");
    // iterative post-order topological sort
    std::vector<VarT<T>*> order;
    std::unordered_set<VarT<T>*> visited;
    std::vector<std::pair<VarT<T>*, size_t>> stack{{root.get(), 0}};
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            VarT<T>* p = node->parents[idx++].get();
            if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->ensure_grad();
    root->g[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        VarT<T>* n = *it;
        if (n->backward_fn && !n->g.data.empty()) n->backward_fn(*n);
    }
}

template <typename T>
void zero_grad(const std::vector<VarPtrT<T>>& params) {
    for (const auto& p : params)
        if (!p->g.data.empty()) p->g.fill(T(0));
}

// ---------------------------------------------------------------------------
// im2col / col2im
// ---------------------------------------------------------------------------

namespace detail {

// valid output range [lo, hi) with in-bounds input index i = o*stride - pad + k*dil
inline void valid_range(int extent_in, int extent_out, int stride, int pad, int kd, int& lo,
                        int& hi) {
    int a = pad - kd;  // need o*stride >= a
    lo = a > 0 ? (a + stride - 1) / stride : 0;
    int b = extent_in - 1 + pad - kd;  // need o*stride <= b
    hi = b < 0 ? 0 : std::min(extent_out, b / stride + 1);
    if (hi < lo) hi = lo;
}

}  // namespace detail

template <typename T>
void im2col(const T* x, int C, int H, int W, int K, int stride, int pad, int dil, int OH, int OW,
            T* col) {
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < K; ++ky) {
            for (int kx = 0; kx < K; ++kx) {
                T* dst = col + size_t(((c * K + ky) * K + kx)) * size_t(OH * OW);
                int lo, hi;
                detail::valid_range(W, OW, stride, pad, kx * dil, lo, hi);
                for (int oy = 0; oy < OH; ++oy, dst += OW) {
                    int iy = oy * stride - pad + ky * dil;
                    if (iy < 0 || iy >= H) {
                        std::fill(dst, dst + OW, T(0));
                        continue;
                    }
                    const T* src = x + size_t(c * H + iy) * size_t(W);
                    std::fill(dst, dst + lo, T(0));
                    if (stride == 1) {
                        std::copy(src + (lo - pad + kx * dil), src + (hi - pad + kx * dil),
                                  dst + lo);
                    } else {
                        int ix = lo * stride - pad + kx * dil;
                        for (int ox = lo; ox < hi; ++ox, ix += stride) dst[ox] = src[ix];
                    }
                    std::fill(dst + hi, dst + OW, T(0));
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, int C, int H, int W, int K, int stride, int pad, int dil, int OH,
                int OW, T* dx) {
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < K; ++ky) {
            for (int kx = 0; kx < K; ++kx) {
                const T* src = col + size_t(((c * K + ky) * K + kx)) * size_t(OH * OW);
                int lo, hi;
                detail::valid_range(W, OW, stride, pad, kx * dil, lo, hi);
                for (int oy = 0; oy < OH; ++oy, src += OW) {
                    int iy = oy * stride - pad + ky * dil;
                    if (iy < 0 || iy >= H) continue;
                    T* dst = dx + size_t(c * H + iy) * size_t(W);
                    int ix = lo * stride - pad + kx * dil;
                    for (int ox = lo; ox < hi; ++ox, ix += stride) dst[ix] += src[ox];
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Convolutions
// ---------------------------------------------------------------------------

namespace detail {

// stride-1 same-size im2col with reflect-101 borders
template <typename T>
void im2col_reflect(const T* x, int C, int H, int W, int K, int pad, T* col) {
    auto mir = [](int t, int n) { return t < 0 ? -t : (t >= n ? 2 * n - 2 - t : t); };
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < K; ++ky) {
            for (int kx = 0; kx < K; ++kx) {
                T* dst = col + size_t(((c * K + ky) * K + kx)) * size_t(H * W);
                const int off = kx - pad;
                const int lo = std::max(0, -off), hi = std::min(W, W - off);
                for (int oy = 0; oy < H; ++oy, dst += W) {
                    const T* src = x + size_t(c * H + mir(oy - pad + ky, H)) * size_t(W);
                    for (int ox = 0; ox < lo; ++ox) dst[ox] = src[-(ox + off)];
                    std::copy(src + lo + off, src + hi + off, dst + lo);
                    for (int ox = hi; ox < W; ++ox) dst[ox] = src[2 * W - 2 - (ox + off)];
                }
            }
        }
    }
}

template <typename T>
void col2im_reflect_add(const T* col, int C, int H, int W, int K, int pad, T* dx) {
    auto mir = [](int t, int n) { return t < 0 ? -t : (t >= n ? 2 * n - 2 - t : t); };
    for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < K; ++ky) {
            for (int kx = 0; kx < K; ++kx) {
                const T* src = col + size_t(((c * K + ky) * K + kx)) * size_t(H * W);
                const int off = kx - pad;
                const int lo = std::max(0, -off), hi = std::min(W, W - off);
                for (int oy = 0; oy < H; ++oy, src += W) {
                    T* dst = dx + size_t(c * H + mir(oy - pad + ky, H)) * size_t(W);
                    for (int ox = 0; ox < lo; ++ox) dst[-(ox + off)] += src[ox];
                    for (int ox = lo; ox < hi; ++ox) dst[ox + off] += src[ox];
                    for (int ox = hi; ox < W; ++ox) dst[2 * W - 2 - (ox + off)] += src[ox];
                }
            }
        }
    }
}

}  // namespace detail

// Stride-1 same-size convolution with reflect-101 padding (the generator's
// padding mode). x: (C,H,W), w: (OC,C,K,K), K odd, pad = (K-1)/2.
template <typename T>
VarPtrT<T> conv2d_reflect(const VarPtrT<T>& x, const VarPtrT<T>& w, const VarPtrT<T>& b) {
    const int C = x->v.dim(0), H = x->v.dim(1), W = x->v.dim(2);
    const int OC = w->v.dim(0), K = w->v.dim(2);
    if (w->v.dim(1) != C) throw ShapeError("conv2d_reflect: channel mismatch");
    const int pad = (K - 1) / 2;
    if (pad >= H || pad >= W) throw ShapeError("conv2d_reflect: input smaller than kernel radius");
    const int ckk = C * K * K, n = H * W;

    auto col = std::make_shared<TensorT<T>>(TensorT<T>::uninitialized({ckk, n}));
    detail::im2col_reflect(x->v.data.data(), C, H, W, K, pad, col->data.data());

    auto y = TensorT<T>::uninitialized({OC, H, W});
    blas::gemm(blas::Op::none, blas::Op::none, OC, n, ckk, T(1), w->v.data.data(), ckk,
               col->data.data(), n, T(0), y.data.data(), n);
    if (b) {
        for (int oc = 0; oc < OC; ++oc) {
            T bv = b->v[size_t(oc)];
            T* row = y.data.data() + size_t(oc) * size_t(n);
            for (int i = 0; i < n; ++i) row[i] += bv;
        }
    }

    std::vector<VarPtrT<T>> parents =
        b ? std::vector<VarPtrT<T>>{x, w, b} : std::vector<VarPtrT<T>>{x, w};
    return make_node<T>(std::move(y), std::move(parents),
                        [x, w, b, col, C, H, W, K, pad, OC, ckk, n](VarT<T>& self) {
                            const T* gy = self.g.data.data();
                            if (w->requires_grad) {
                                w->ensure_grad();
                                blas::gemm(blas::Op::none, blas::Op::transpose, OC, ckk, n, T(1),
                                           gy, n, col->data.data(), n, T(1), w->g.data.data(),
                                           ckk);
                            }
                            if (b && b->requires_grad) {
                                b->ensure_grad();
                                for (int oc = 0; oc < OC; ++oc) {
                                    double acc = 0.0;
                                    const T* row = gy + size_t(oc) * size_t(n);
                                    for (int i = 0; i < n; ++i) acc += double(row[i]);
                                    b->g[size_t(oc)] += T(acc);
                                }
                            }
                            if (x->requires_grad) {
                                x->ensure_grad();
                                auto dcol = TensorT<T>::uninitialized({ckk, n});
                                blas::gemm(blas::Op::transpose, blas::Op::none, ckk, n, OC, T(1),
                                           w->v.data.data(), ckk, gy, n, T(0), dcol.data.data(),
                                           n);
                                detail::col2im_reflect_add(dcol.data.data(), C, H, W, K, pad,
                                                           x->g.data.data());
                            }
                        });
}

// x: (C,H,W), w: (OC,C,K,K), b: (OC) or nullptr. Zero padding.
template <typename T>
VarPtrT<T> conv2d(const VarPtrT<T>& x, const VarPtrT<T>& w, const VarPtrT<T>& b, int stride,
                  int pad, int dil = 1) {
    const int C = x->v.dim(0), H = x->v.dim(1), W = x->v.dim(2);
    const int OC = w->v.dim(0), K = w->v.dim(2);
    if (w->v.dim(1) != C) throw ShapeError("conv2d: channel mismatch");
    const int eff = (K - 1) * dil + 1;
    const int OH = (H + 2 * pad - eff) / stride + 1;
    const int OW = (W + 2 * pad - eff) / stride + 1;
    if (H + 2 * pad < eff || W + 2 * pad < eff || OH < 1 || OW < 1)
        throw ShapeError("conv2d: input too small for kernel");
    const int ckk = C * K * K, n = OH * OW;

    auto col = std::make_shared<TensorT<T>>(TensorT<T>::uninitialized({ckk, n}));
    im2col(x->v.data.data(), C, H, W, K, stride, pad, dil, OH, OW, col->data.data());

    auto y = TensorT<T>::uninitialized({OC, OH, OW});
    blas::gemm(blas::Op::none, blas::Op::none, OC, n, ckk, T(1), w->v.data.data(), ckk,
               col->data.data(), n, T(0), y.data.data(), n);
    if (b) {
        for (int oc = 0; oc < OC; ++oc) {
            T bv = b->v[size_t(oc)];
            T* row = y.data.data() + size_t(oc) * size_t(n);
            for (int i = 0; i < n; ++i) row[i] += bv;
        }
    }

    std::vector<VarPtrT<T>> parents =
        b ? std::vector<VarPtrT<T>>{x, w, b} : std::vector<VarPtrT<T>>{x, w};
    return make_node<T>(
        std::move(y), std::move(parents),
        [x, w, b, col, C, H, W, K, stride, pad, dil, OH, OW, OC, ckk, n](VarT<T>& self) {
            const T* gy = self.g.data.data();
            if (w->requires_grad) {
                w->ensure_grad();
                blas::gemm(blas::Op::none, blas::Op::transpose, OC, ckk, n, T(1), gy, n,
                           col->data.data(), n, T(1), w->g.data.data(), ckk);
            }
            if (b && b->requires_grad) {
                b->ensure_grad();
                for (int oc = 0; oc < OC; ++oc) {
                    double acc = 0.0;
                    const T* row = gy + size_t(oc) * size_t(n);
                    for (int i = 0; i < n; ++i) acc += double(row[i]);
                    b->g[size_t(oc)] += T(acc);
                }
            }
            if (x->requires_grad) {
                x->ensure_grad();
                auto dcol = TensorT<T>::uninitialized({ckk, n});
                blas::gemm(blas::Op::transpose, blas::Op::none, ckk, n, OC, T(1),
                           w->v.data.data(), ckk, gy, n, T(0), dcol.data.data(), n);
                col2im_add(dcol.data.data(), C, H, W, K, stride, pad, dil, OH, OW,
                           x->g.data.data());
            }
        });
}

// Transposed convolution. x: (C,H,W), w: (C,OC,K,K), b: (OC) or nullptr.
template <typename T>
VarPtrT<T> conv_transpose2d(const VarPtrT<T>& x, const VarPtrT<T>& w, const VarPtrT<T>& b,
                            int stride, int pad, int out_pad) {
    const int C = x->v.dim(0), H = x->v.dim(1), W = x->v.dim(2);
    if (w->v.dim(0) != C) throw ShapeError("conv_transpose2d: channel mismatch");
    const int OC = w->v.dim(1), K = w->v.dim(2);
    const int OH = (H - 1) * stride - 2 * pad + K + out_pad;
    const int OW = (W - 1) * stride - 2 * pad + K + out_pad;
    if (OH < 1 || OW < 1) throw ShapeError("conv_transpose2d: output would be empty");
    const int okk = OC * K * K, n = H * W;

    // cols = w^T (okk x C) * x (C x n)
    auto cols = TensorT<T>::uninitialized({okk, n});
    blas::gemm(blas::Op::transpose, blas::Op::none, okk, n, C, T(1), w->v.data.data(), okk,
               x->v.data.data(), n, T(0), cols.data.data(), n);

    TensorT<T> y({OC, OH, OW});
    // scatter: cols[(oc*K+ky)*K+kx, iy*W+ix] adds at y[oc, iy*s-p+ky, ix*s-p+kx]
    for (int oc = 0; oc < OC; ++oc) {
        for (int ky = 0; ky < K; ++ky) {
            for (int kx = 0; kx < K; ++kx) {
                const T* src = cols.data.data() + size_t((oc * K + ky) * K + kx) * size_t(n);
                int lo, hi;
                detail::valid_range(OW, W, stride, pad, kx, lo, hi);
                for (int iy = 0; iy < H; ++iy, src += W) {
                    int oy = iy * stride - pad + ky;
                    if (oy < 0 || oy >= OH) continue;
                    T* dst = y.data.data() + size_t(oc * OH + oy) * size_t(OW);
                    int ox = lo * stride - pad + kx;
                    for (int ix = lo; ix < hi; ++ix, ox += stride) dst[ox] += src[ix];
                }
            }
        }
    }
    if (b) {
        for (int oc = 0; oc < OC; ++oc) {
            T bv = b->v[size_t(oc)];
            T* plane = y.data.data() + size_t(oc) * size_t(OH * OW);
            for (int i = 0; i < OH * OW; ++i) plane[i] += bv;
        }
    }

    std::vector<VarPtrT<T>> parents =
        b ? std::vector<VarPtrT<T>>{x, w, b} : std::vector<VarPtrT<T>>{x, w};
    return make_node<T>(
        std::move(y), std::move(parents),
        [x, w, b, C, H, W, K, stride, pad, OH, OW, OC, okk, n](VarT<T>& self) {
            const T* gy = self.g.data.data();
            // gather dcols[(oc*K+ky)*K+kx, iy*W+ix] = gy[oc, iy*s-p+ky, ix*s-p+kx]
            auto dcols = TensorT<T>::uninitialized({okk, n});
            for (int oc = 0; oc < OC; ++oc) {
                for (int ky = 0; ky < K; ++ky) {
                    for (int kx = 0; kx < K; ++kx) {
                        T* dst = dcols.data.data() + size_t((oc * K + ky) * K + kx) * size_t(n);
                        int lo, hi;
                        detail::valid_range(OW, W, stride, pad, kx, lo, hi);
                        for (int iy = 0; iy < H; ++iy, dst += W) {
                            int oy = iy * stride - pad + ky;
                            if (oy < 0 || oy >= OH) {
                                std::fill(dst, dst + W, T(0));
                                continue;
                            }
                            const T* src = gy + size_t(oc * OH + oy) * size_t(OW);
                            std::fill(dst, dst + lo, T(0));
                            if (stride == 1) {
                                std::copy(src + (lo - pad + kx), src + (hi - pad + kx), dst + lo);
                            } else {
                                int ox = lo * stride - pad + kx;
                                for (int ix = lo; ix < hi; ++ix, ox += stride) dst[ix] = src[ox];
                            }
                            std::fill(dst + hi, dst + W, T(0));
                        }
                    }
                }
            }
            if (x->requires_grad) {
                x->ensure_grad();
                blas::gemm(blas::Op::none, blas::Op::none, C, n, okk, T(1), w->v.data.data(), okk,
                           dcols.data.data(), n, T(1), x->g.data.data(), n);
            }
            if (w->requires_grad) {
                w->ensure_grad();
                blas::gemm(blas::Op::none, blas::Op::transpose, C, okk, n, T(1), x->v.data.data(),
                           n, dcols.data.data(), n, T(1), w->g.data.data(), okk);
            }
            if (b && b->requires_grad) {
                b->ensure_grad();
                for (int oc = 0; oc < OC; ++oc) {
                    double acc = 0.0;
                    const T* plane = gy + size_t(oc) * size_t(OH * OW);
                    for (int i = 0; i < OH * OW; ++i) acc += double(plane[i]);
                    b->g[size_t(oc)] += T(acc);
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Padding, normalization, activations
// ---------------------------------------------------------------------------

template <typename T>
VarPtrT<T> reflection_pad(const VarPtrT<T>& x, int p) {
    const int C = x->v.dim(0), H = x->v.dim(1), W = x->v.dim(2);
    if (p >= H || p >= W) throw ShapeError("reflection_pad: pad too large");
    auto refl = [](int t, int n) { return t < 0 ? -t : (t >= n ? 2 * n - 2 - t : t); };
    auto y = TensorT<T>::uninitialized({C, H + 2 * p, W + 2 * p});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < H + 2 * p; ++i) {
            int si = refl(i - p, H);
            for (int j = 0; j < W + 2 * p; ++j) y.at(c, i, j) = x->v.at(c, si, refl(j - p, W));
        }
    return make_node<T>(std::move(y), {x}, [x, p, C, H, W, refl](VarT<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < H + 2 * p; ++i) {
                int si = refl(i - p, H);
                for (int j = 0; j < W + 2 * p; ++j)
                    x->g.at(c, si, refl(j - p, W)) += self.g.at(c, i, j);
            }
    });
}

// Non-affine instance normalization (per-channel standardization).
template <typename T>
VarPtrT<T> instance_norm(const VarPtrT<T>& x, T eps = T(1e-5)) {
    const int C = x->v.dim(0), HW = x->v.dim(1) * x->v.dim(2);
    TensorT<T> y(x->v.shape);
    auto inv = std::make_shared<std::vector<T>>(size_t(C));
    for (int c = 0; c < C; ++c) {
        const T* src = x->v.data.data() + size_t(c) * size_t(HW);
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < HW; ++i) {
            sum += double(src[i]);
            sumsq += double(src[i]) * double(src[i]);
        }
        double mu = sum / HW;
        double var = std::max(0.0, sumsq / HW - mu * mu);
        T iv = T(1.0 / std::sqrt(var + double(eps)));
        (*inv)[size_t(c)] = iv;
        T* dst = y.data.data() + size_t(c) * size_t(HW);
        for (int i = 0; i < HW; ++i) dst[i] = (src[i] - T(mu)) * iv;
    }
    return make_node<T>(std::move(y), {x}, [x, inv, C, HW](VarT<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int c = 0; c < C; ++c) {
            const T* yv = self.v.data.data() + size_t(c) * size_t(HW);
            const T* gy = self.g.data.data() + size_t(c) * size_t(HW);
            T* gx = x->g.data.data() + size_t(c) * size_t(HW);
            double mg = 0.0, mgy = 0.0;
            for (int i = 0; i < HW; ++i) {
                mg += double(gy[i]);
                mgy += double(gy[i]) * double(yv[i]);
            }
            mg /= HW;
            mgy /= HW;
            T iv = (*inv)[size_t(c)];
            for (int i = 0; i < HW; ++i) gx[i] += iv * (gy[i] - T(mg) - yv[i] * T(mgy));
        }
    });
}

// Fused instance_norm + ReLU. The masked upstream gradient g~ satisfies
// g~ * y_pre == g~ * y_relu, so only the post-ReLU output and the pre-ReLU
// values are needed; both live in one saved tensor pair.
template <typename T>
VarPtrT<T> instance_norm_relu(const VarPtrT<T>& x, T eps = T(1e-5)) {
    const int C = x->v.dim(0), HW = x->v.dim(1) * x->v.dim(2);
    auto y = TensorT<T>::uninitialized(x->v.shape);
    auto pre = std::make_shared<TensorT<T>>(TensorT<T>::uninitialized(x->v.shape));
    auto inv = std::make_shared<std::vector<T>>(size_t(C));
    for (int c = 0; c < C; ++c) {
        const T* src = x->v.data.data() + size_t(c) * size_t(HW);
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < HW; ++i) {
            sum += double(src[i]);
            sumsq += double(src[i]) * double(src[i]);
        }
        double mu = sum / HW;
        double var = std::max(0.0, sumsq / HW - mu * mu);
        T iv = T(1.0 / std::sqrt(var + double(eps)));
        (*inv)[size_t(c)] = iv;
        T* dst = y.data.data() + size_t(c) * size_t(HW);
        T* pv = pre->data.data() + size_t(c) * size_t(HW);
        for (int i = 0; i < HW; ++i) {
            T n = (src[i] - T(mu)) * iv;
            pv[i] = n;
            dst[i] = n > T(0) ? n : T(0);
        }
    }
    return make_node<T>(std::move(y), {x}, [x, inv, pre, C, HW](VarT<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int c = 0; c < C; ++c) {
            const T* yv = pre->data.data() + size_t(c) * size_t(HW);
            const T* gy = self.g.data.data() + size_t(c) * size_t(HW);
            T* gx = x->g.data.data() + size_t(c) * size_t(HW);
            double mg = 0.0, mgy = 0.0;
            for (int i = 0; i < HW; ++i) {
                T gm = yv[i] > T(0) ? gy[i] : T(0);
                mg += double(gm);
                mgy += double(gm) * double(yv[i]);
            }
            mg /= HW;
            mgy /= HW;
            T iv = (*inv)[size_t(c)];
            for (int i = 0; i < HW; ++i) {
                T gm = yv[i] > T(0) ? gy[i] : T(0);
                gx[i] += iv * (gm - T(mg) - yv[i] * T(mgy));
            }
        }
    });
}

template <typename T>
VarPtrT<T> leaky_relu(const VarPtrT<T>& x, T slope) {
    auto y = TensorT<T>::uninitialized(x->v.shape);
    for (size_t i = 0; i < y.data.size(); ++i) {
        T v = x->v[i];
        y[i] = v > T(0) ? v : slope * v;
    }
    return make_node<T>(std::move(y), {x}, [x, slope](VarT<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (size_t i = 0; i < self.g.data.size(); ++i)
            x->g[i] += self.g[i] * (x->v[i] > T(0) ? T(1) : slope);
    });
}

template <typename T>
VarPtrT<T> relu(const VarPtrT<T>& x) {
    return leaky_relu(x, T(0));
}

template <typename T>
VarPtrT<T> vtanh(const VarPtrT<T>& x) {
    auto y = TensorT<T>::uninitialized(x->v.shape);
    for (size_t i = 0; i < y.data.size(); ++i) y[i] = std::tanh(x->v[i]);
    return make_node<T>(std::move(y), {x}, [x](VarT<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (size_t i = 0; i < self.g.data.size(); ++i)
            x->g[i] += self.g[i] * (T(1) - self.v[i] * self.v[i]);
    });
}

template <typename T>
VarPtrT<T> vsigmoid(const VarPtrT<T>& x) {
    auto y = TensorT<T>::uninitialized(x->v.shape);
    for (size_t i = 0; i < y.data.size(); ++i) y[i] = T(1) / (T(1) + std::exp(-x->v[i]));
    return make_node<T>(std::move(y), {x}, [x](VarT<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (size_t i = 0; i < self.g.data.size(); ++i)
            x->g[i] += self.g[i] * self.v[i] * (T(1) - self.v[i]);
    });
}

template <typename T>
VarPtrT<T> vlog(const VarPtrT<T>& x) {
    auto y = TensorT<T>::uninitialized(x->v.shape);
    for (size_t i = 0; i < y.data.size(); ++i) {
        if (!(x->v[i] > T(0))) throw DomainError("log of non-positive argument");
        y[i] = std::log(x->v[i]);
    }
    return make_node<T>(std::move(y), {x}, [x](VarT<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (size_t i = 0; i < self.g.data.size(); ++i) x->g[i] += self.g[i] / x->v[i];
    });
}

template <typename T>
VarPtrT<T> vabs(const VarPtrT<T>& x) {
    auto y = TensorT<T>::uninitialized(x->v.shape);
    for (size_t i = 0; i < y.data.size(); ++i) y[i] = std::fabs(x->v[i]);
    return make_node<T>(std::move(y), {x}, [x](VarT<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (size_t i = 0; i < self.g.data.size(); ++i) {
            T v = x->v[i];
            x->g[i] += self.g[i] * (v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)));
        }
    });
}

template <typename T>
VarPtrT<T> square(const VarPtrT<T>& x) {
    auto y = TensorT<T>::uninitialized(x->v.shape);
    for (size_t i = 0; i < y.data.size(); ++i) y[i] = x->v[i] * x->v[i];
    return make_node<T>(std::move(y), {x}, [x](VarT<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (size_t i = 0; i < self.g.data.size(); ++i) x->g[i] += self.g[i] * T(2) * x->v[i];
    });
}

// ---------------------------------------------------------------------------
// Arithmetic & reductions
// ---------------------------------------------------------------------------

template <typename T>
VarPtrT<T> add(const VarPtrT<T>& a, const VarPtrT<T>& b) {
    require_same_shape(a->v, b->v, "add");
    auto y = TensorT<T>::uninitialized(a->v.shape);
    for (size_t i = 0; i < y.data.size(); ++i) y[i] = a->v[i] + b->v[i];
    return make_node<T>(std::move(y), {a, b}, [a, b](VarT<T>& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < self.g.data.size(); ++i) a->g[i] += self.g[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < self.g.data.size(); ++i) b->g[i] += self.g[i];
        }
    });
}

template <typename T>
VarPtrT<T> sub(const VarPtrT<T>& a, const VarPtrT<T>& b) {
    require_same_shape(a->v, b->v, "sub");
    auto y = TensorT<T>::uninitialized(a->v.shape);
    for (size_t i = 0; i < y.data.size(); ++i) y[i] = a->v[i] - b->v[i];
    return make_node<T>(std::move(y), {a, b}, [a, b](VarT<T>& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < self.g.data.size(); ++i) a->g[i] += self.g[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < self.g.data.size(); ++i) b->g[i] -= self.g[i];
        }
    });
}

template <typename T>
VarPtrT<T> scale(const VarPtrT<T>& x, T s) {
    auto y = TensorT<T>::uninitialized(x->v.shape);
    for (size_t i = 0; i < y.data.size(); ++i) y[i] = x->v[i] * s;
    return make_node<T>(std::move(y), {x}, [x, s](VarT<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (size_t i = 0; i < self.g.data.size(); ++i) x->g[i] += self.g[i] * s;
    });
}

template <typename T>
VarPtrT<T> add_const(const VarPtrT<T>& x, T k) {
    auto y = TensorT<T>::uninitialized(x->v.shape);
    for (size_t i = 0; i < y.data.size(); ++i) y[i] = x->v[i] + k;
    return make_node<T>(std::move(y), {x}, [x](VarT<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (size_t i = 0; i < self.g.data.size(); ++i) x->g[i] += self.g[i];
    });
}

template <typename T>
VarPtrT<T> concat_channels(const VarPtrT<T>& a, const VarPtrT<T>& b) {
    if (a->v.dim(1) != b->v.dim(1) || a->v.dim(2) != b->v.dim(2))
        throw ShapeError("concat_channels: spatial dims differ");
    auto y = TensorT<T>::uninitialized({a->v.dim(0) + b->v.dim(0), a->v.dim(1), a->v.dim(2)});
    std::copy(a->v.data.begin(), a->v.data.end(), y.data.begin());
    std::copy(b->v.data.begin(), b->v.data.end(), y.data.begin() + a->v.numel());
    return make_node<T>(std::move(y), {a, b}, [a, b](VarT<T>& self) {
        size_t na = a->v.data.size();
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < na; ++i) a->g[i] += self.g[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < b->v.data.size(); ++i) b->g[i] += self.g[na + i];
        }
    });
}

template <typename T>
VarPtrT<T> mean_all(const VarPtrT<T>& x) {
    double acc = 0.0;
    for (T v : x->v.data) acc += double(v);
    TensorT<T> y({1});
    const size_t n = x->v.data.size();
    y[0] = T(acc / double(n));
    return make_node<T>(std::move(y), {x}, [x, n](VarT<T>& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        T gk = self.g[0] / T(n);
        for (size_t i = 0; i < n; ++i) x->g[i] += gk;
    });
}

// weighted sum of scalar vars
template <typename T>
VarPtrT<T> linear_comb(const std::vector<VarPtrT<T>>& xs, const std::vector<T>& ws) {
    if (xs.size() != ws.size()) throw ShapeError("linear_comb: size mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) acc += double(ws[i]) * double(xs[i]->v[0]);
    TensorT<T> y({1});
    y[0] = T(acc);
    std::vector<VarPtrT<T>> parents = xs;
    auto wcopy = ws;
    return make_node<T>(std::move(y), std::move(parents), [xs, wcopy](VarT<T>& self) {
        for (size_t i = 0; i < xs.size(); ++i) {
            if (!xs[i]->requires_grad) continue;
            xs[i]->ensure_grad();
            xs[i]->g[0] += self.g[0] * wcopy[i];
        }
    });
}

// graph-side losses used by the trainer
template <typename T>
VarPtrT<T> l1_loss(const VarPtrT<T>& a, const VarPtrT<T>& b) {
    return mean_all(vabs(sub(a, b)));
}
template <typename T>
VarPtrT<T> mse_loss(const VarPtrT<T>& a, const VarPtrT<T>& b) {
    return mean_all(square(sub(a, b)));
}

}  // namespace spcgan::nn
