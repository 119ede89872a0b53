#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace emq {

/// Deterministic splitmix64-based generator. Distributions are implemented
/// by hand so streams are stable across standard-library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ULL) {}

    /// Derives an independent stream from (seed, name). The same pair always
    /// yields the same stream.
    static Rng stream(std::uint64_t seed, std::string_view name) {
        std::uint64_t h = 1469598103934665603ULL;
        for (char c : name) {
            h ^= static_cast<std::uint8_t>(c);
            h *= 1099511628211ULL;
        }
        return Rng(seed * 0x2545f4914f6cdd1dULL + h);
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, n). n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    int next_int(int lo, int hi_inclusive) {
        return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
    }

    /// Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    bool bernoulli(double p) { return next_double() < p; }

    /// Standard normal via Box-Muller (one value per call, no cache).
    double normal() {
        double u1 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double rademacher() { return (next_u64() & 1u) ? 1.0 : -1.0; }

    /// Index sampled from non-negative weights (need not be normalized).
    std::size_t weighted_index(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double r = next_double() * total;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            r -= weights[i];
            if (r < 0.0) return i;
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct values from [0, n), order randomized.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

private:
    std::uint64_t state_;
};

}  // namespace emq
