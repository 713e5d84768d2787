#pragma once

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace modechoice {

// splitmix64 finalizer. Stable across platforms, used to derive per-stage
// seeds from the one global seed (stage k gets derive_seed(seed, k)).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t stage) {
    return splitmix64(global_seed ^ splitmix64(stage + 1));
}

// mt19937_64 with hand-rolled distributions. The standard engine is bit-exact
// by definition; std::uniform_* distributions are not, and reproducibility of
// serialized artifacts depends on every draw being identical run to run.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Unbiased uniform index in [0, n). n must be > 0.
    std::size_t uniform_index(std::size_t n) {
        const std::uint64_t span = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return static_cast<std::size_t>(x % span);
    }

    /// Standard normal via Box-Muller.
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_index(i)]);
        }
    }

    /// k distinct indices from [0, n), ascending. Partial Fisher-Yates.
    std::vector<std::uint32_t> sample_indices(std::size_t n, std::size_t k) {
        std::vector<std::uint32_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = static_cast<std::uint32_t>(i);
        if (k > n) k = n;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + uniform_index(n - i);
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

private:
    std::mt19937_64 eng_;
};

} // namespace modechoice
