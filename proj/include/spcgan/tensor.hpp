#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "spcgan/common.hpp"

namespace spcgan {

// Allocator that skips value-initialization on resize. Tensor buffers are
// either fully overwritten (activations, im2col scratch) or explicitly
// zero-filled (gradients), so the implicit zeroing is pure overhead.
template <typename T, typename A = std::allocator<T>>
struct default_init_allocator : A {
    template <typename U>
    struct rebind {
        using other = default_init_allocator<U, typename std::allocator_traits<A>::template rebind_alloc<U>>;
    };
    using A::A;
    template <typename U>
    void construct(U* ptr) noexcept(std::is_nothrow_default_constructible_v<U>) {
        ::new (static_cast<void*>(ptr)) U;
    }
    template <typename U, typename... Args>
    void construct(U* ptr, Args&&... args) {
        std::allocator_traits<A>::construct(static_cast<A&>(*this), ptr,
                                            std::forward<Args>(args)...);
    }
};

// Dense tensor, row-major, up to 4 dims. Rank-3 tensors are (C, H, W);
// conv weights are (OC, IC, KH, KW). Training runs the float instantiation;
// gradient checks run the double one.
template <typename T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T, default_init_allocator<T>> data;

    TensorT() = default;
    explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
        data.resize(size_t(numel_of(shape)));
        std::fill(data.begin(), data.end(), T(0));
    }

    // contents undefined; caller overwrites every element
    static TensorT uninitialized(std::vector<int> s) {
        TensorT t;
        t.shape = std::move(s);
        t.data.resize(size_t(numel_of(t.shape)));
        return t;
    }

    static int64_t numel_of(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            if (d <= 0) throw ShapeError("tensor dimension must be positive");
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return int64_t(data.size()); }
    int dim(int i) const { return shape[size_t(i)]; }
    int rank() const { return int(shape.size()); }

    T& operator[](size_t i) { return data[i]; }
    T operator[](size_t i) const { return data[i]; }

    // (C,H,W) accessor for rank-3 tensors
    T& at(int c, int y, int x) { return data[size_t((c * shape[1] + y) * shape[2] + x)]; }
    T at(int c, int y, int x) const { return data[size_t((c * shape[1] + y) * shape[2] + x)]; }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(double(v))) return false;
        return true;
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape.size(); ++i)
            s += (i ? "," : "") + std::to_string(shape[i]);
        return s + ")";
    }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out(shape);
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
        return out;
    }
};

using Tensor = TensorT<float>;

template <typename T>
TensorT<T> zeros_like(const TensorT<T>& t) {
    return TensorT<T>(t.shape);
}

template <typename T>
void require_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* where) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
}

}  // namespace spcgan
