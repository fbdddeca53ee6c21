#pragma once

#include <cstdlib>
#include <dlfcn.h>

#include "spcgan/common.hpp"

namespace spcgan::blas {

// Row-major gemm: C = alpha * op(A) * op(B) + beta * C.
//
// OpenBLAS is loaded lazily through dlopen so we can pin OPENBLAS_CORETYPE
// and OPENBLAS_NUM_THREADS before its initializer runs. The packaged
// OpenBLAS misdetects newer CPUs and falls back to a slow generic kernel;
// forcing the SKYLAKEX target when AVX-512 is present recovers a ~4x
// speedup. Thread count is pinned to 1 so results are reproducible
// regardless of the machine's core count.
namespace detail {

typedef void (*sgemm_fn)(int order, int transa, int transb, int m, int n, int k, float alpha,
                         const float* a, int lda, const float* b, int ldb, float beta, float* c,
                         int ldc);
typedef void (*dgemm_fn)(int order, int transa, int transb, int m, int n, int k, double alpha,
                         const double* a, int lda, const double* b, int ldb, double beta,
                         double* c, int ldc);

inline void* openblas_handle() {
    static void* h = [] {
        setenv("OPENBLAS_NUM_THREADS", "1", 0);
#if defined(__x86_64__)
        if (__builtin_cpu_supports("avx512f")) setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 0);
#endif
        void* handle = dlopen("libopenblas.so.0", RTLD_NOW | RTLD_LOCAL);
        if (!handle) handle = dlopen("libopenblas.so", RTLD_NOW | RTLD_LOCAL);
        return handle;
    }();
    return h;
}

inline sgemm_fn sgemm_ptr() {
    static sgemm_fn fn = openblas_handle()
                             ? reinterpret_cast<sgemm_fn>(dlsym(openblas_handle(), "cblas_sgemm"))
                             : nullptr;
    return fn;
}

inline dgemm_fn dgemm_ptr() {
    static dgemm_fn fn = openblas_handle()
                             ? reinterpret_cast<dgemm_fn>(dlsym(openblas_handle(), "cblas_dgemm"))
                             : nullptr;
    return fn;
}

// Plain fallback used only when OpenBLAS cannot be loaded.
template <typename T>
inline void naive_gemm(bool ta, bool tb, int m, int n, int k, T alpha, const T* a, int lda,
                       const T* b, int ldb, T beta, T* c, int ldc) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            T acc = 0;
            for (int p = 0; p < k; ++p) {
                T av = ta ? a[p * lda + i] : a[i * lda + p];
                T bv = tb ? b[j * ldb + p] : b[p * ldb + j];
                acc += av * bv;
            }
            c[i * ldc + j] = alpha * acc + beta * c[i * ldc + j];
        }
    }
}

constexpr int kRowMajor = 101, kNoTrans = 111, kTrans = 112;

}  // namespace detail

enum class Op { none, transpose };

inline void gemm(Op ta, Op tb, int m, int n, int k, float alpha, const float* a, int lda,
                 const float* b, int ldb, float beta, float* c, int ldc) {
    auto fn = detail::sgemm_ptr();
    if (fn)
        fn(detail::kRowMajor, ta == Op::none ? detail::kNoTrans : detail::kTrans,
           tb == Op::none ? detail::kNoTrans : detail::kTrans, m, n, k, alpha, a, lda, b, ldb,
           beta, c, ldc);
    else
        detail::naive_gemm(ta == Op::transpose, tb == Op::transpose, m, n, k, alpha, a, lda, b,
                           ldb, beta, c, ldc);
}

inline void gemm(Op ta, Op tb, int m, int n, int k, double alpha, const double* a, int lda,
                 const double* b, int ldb, double beta, double* c, int ldc) {
    auto fn = detail::dgemm_ptr();
    if (fn)
        fn(detail::kRowMajor, ta == Op::none ? detail::kNoTrans : detail::kTrans,
           tb == Op::none ? detail::kNoTrans : detail::kTrans, m, n, k, alpha, a, lda, b, ldb,
           beta, c, ldc);
    else
        detail::naive_gemm(ta == Op::transpose, tb == Op::transpose, m, n, k, alpha, a, lda, b,
                           ldb, beta, c, ldc);
}

}  // namespace spcgan::blas
