#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace auglab {

// ---------------------------------------------------------------------------
// RngStream: counter-based, splittable random stream.
//
// A stream is identified by a 64-bit key derived from a root seed and a
// hierarchical path of fork tags. Output n of a stream is
// mix64(key + n*GAMMA) (the splitmix64 sequence started at the key), so a
// stream is a pure function of (seed, path) and never touches shared state.
// Forking derives a child key through an independent mixing function, which
// keeps sibling streams and parent output sequences decorrelated.
// ---------------------------------------------------------------------------
class RngStream {
public:
    explicit RngStream(std::uint64_t seed)
        : key_(mix64(seed ^ 0x243f6a8885a308d3ull)) {}

    // Child stream for a path component. Equal (seed, path) gives equal
    // output; any differing tag gives an unrelated stream.
    RngStream fork(std::uint64_t tag) const {
        return RngStream(derive_key(key_, tag), 0);
    }

    std::uint64_t next_u64() {
        counter_ += 1;
        return mix64(key_ + counter_ * 0x9e3779b97f4a7c15ull);
    }

    // Uniform in [0,1), 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in (0,1), safe as a log() argument.
    double next_double_open() {
        return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
    }

    float next_float() {
        return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
    }

    // Uniform integer in [0, n). Modulo bias is < n / 2^64, irrelevant at
    // the n used here (dataset and pixel indices).
    std::uint32_t next_below(std::uint32_t n) {
        return static_cast<std::uint32_t>(next_u64() % n);
    }

    bool bernoulli(double p) { return next_double() < p; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Standard normal via Box-Muller.
    double normal() {
        const double u1 = next_double_open();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    // Gamma(shape, 1) by Marsaglia-Tsang squeeze; shapes below 1 use the
    // boost G(a) = G(a+1) * U^(1/a).
    double gamma(double shape) {
        if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be > 0");
        if (shape < 1.0) {
            const double u = next_double_open();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = 0.0;
            double v = 0.0;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = next_double_open();
            if (u < 1.0 - 0.0331 * (x * x) * (x * x)) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Beta(c, c) as G1/(G1+G2). Underflowed gamma draws (possible for very
    // small c) are clamped to the smallest normal double so the ratio stays
    // defined and inside (0,1).
    double beta_symmetric(double concentration) {
        if (!(concentration > 0.0)) throw std::invalid_argument("beta: concentration must be > 0");
        double g1 = gamma(concentration);
        double g2 = gamma(concentration);
        const double tiny = std::numeric_limits<double>::min();
        if (g1 < tiny) g1 = tiny;
        if (g2 < tiny) g2 = tiny;
        return g1 / (g1 + g2);
    }

    std::uint64_t key() const { return key_; }

private:
    RngStream(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

    // splitmix64 finalizer
    static std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // murmur3 finalizer, kept distinct from mix64 so fork keys do not
    // collide with output values
    static std::uint64_t fmix64(std::uint64_t z) {
        z ^= z >> 33;
        z *= 0xff51afd7ed558ccdull;
        z ^= z >> 33;
        z *= 0xc4ceb9fe1a85ec53ull;
        z ^= z >> 33;
        return z;
    }

    static std::uint64_t derive_key(std::uint64_t key, std::uint64_t tag) {
        return fmix64(key ^ fmix64(tag + 0x9e3779b97f4a7c15ull));
    }

    static constexpr double kPi = 3.14159265358979323846;

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Canonical fork tags. Call sites across the library agree on these so that
// a value drawn for one purpose can never alias a value drawn for another.
namespace rng_tag {
inline constexpr std::uint64_t model_init = 0x01;
inline constexpr std::uint64_t epoch = 0x02;
inline constexpr std::uint64_t shuffle = 0x03;
inline constexpr std::uint64_t sample = 0x04;
inline constexpr std::uint64_t batch_mix = 0x05;
inline constexpr std::uint64_t measure = 0x06;
inline constexpr std::uint64_t train_split = 0x07;
inline constexpr std::uint64_t test_split = 0x08;
inline constexpr std::uint64_t dropout = 0x09;
inline constexpr std::uint64_t hflip = 0x0a;
inline constexpr std::uint64_t pad_crop = 0x0b;
inline constexpr std::uint64_t policy = 0x0c;
inline constexpr std::uint64_t cutout = 0x0d;
inline constexpr std::uint64_t noise = 0x0e;
inline constexpr std::uint64_t background = 0x0f;
inline constexpr std::uint64_t geometry = 0x10;
}  // namespace rng_tag

// Fisher-Yates permutation of {0..n-1}.
inline std::vector<int> random_permutation(int n, RngStream& rng) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(i + 1)));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    return perm;
}

}  // namespace auglab
