#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace spcgan {

// Locale-independent fixed-point formatting (CSV/JSON outputs must be
// byte-stable across runs).
inline std::string fmt_fixed(double v, int precision) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
    return std::string(buf, res.ptr);
}

// Error hierarchy shared by all modules. The CLI maps NumericFault to exit
// code 1 and everything else to exit code 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : Error {
    using Error::Error;
};
struct ShapeError : ValidationError {
    using ValidationError::ValidationError;
};
struct DomainError : Error {
    using Error::Error;
};
struct ResourceError : Error {
    using Error::Error;
};
struct NumericFault : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derive an independent stream seed from a base seed and a stream tag.
inline uint64_t derive_seed(uint64_t base, uint64_t tag) {
    return splitmix64(base ^ splitmix64(tag));
}

// Deterministic RNG. mt19937_64 output is fully specified by the standard;
// the mappings to uniform/normal below are hand-rolled so that draws do not
// depend on the standard library's unspecified distribution algorithms.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    // uniform double in [0, 1)
    double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller (pairs cached)
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    // uniform integer in [0, n), rejection sampled (no modulo bias)
    uint64_t below(uint64_t n) {
        if (n == 0) throw ValidationError("Rng::below: n must be positive");
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return v % n;
    }

    uint64_t raw() { return gen_(); }

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

template <typename T>
void shuffle_indices(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = size_t(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace spcgan
