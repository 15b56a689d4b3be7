#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace pfedlia {

// splitmix64 is used both as the seed mixer and as the generator, so every
// random decision in the simulator is pinned to explicit integer seeds and
// reproduces bit-identically across platforms (no std::distribution involved).
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    return splitmix64_next(s);
}

template <typename... Rest>
    requires(sizeof...(Rest) > 0)
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, Rest... rest) {
    return mix_seed(mix_seed(a, b), static_cast<std::uint64_t>(rest)...);
}

// Purpose tags for seed derivation; keeps independent random streams from
// aliasing when they share an experiment seed.
namespace seed_tag {
inline constexpr std::uint64_t data = 0x01;
inline constexpr std::uint64_t partition = 0x02;
inline constexpr std::uint64_t init = 0x03;
inline constexpr std::uint64_t sample = 0x04;
inline constexpr std::uint64_t local_train = 0x05;
inline constexpr std::uint64_t lia_subset = 0x06;
inline constexpr std::uint64_t lia_shuffle = 0x07;
inline constexpr std::uint64_t split = 0x08;
inline constexpr std::uint64_t kmeans = 0x09;
inline constexpr std::uint64_t means = 0x0a;
inline constexpr std::uint64_t noisy = 0x0b;
inline constexpr std::uint64_t bench = 0x0c;
}  // namespace seed_tag

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64_next(state_); }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform in [0, n), unbiased.
    std::size_t next_index(std::size_t n) {
        assert(n > 0);
        const std::uint64_t nn = n;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % nn;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return static_cast<std::size_t>(x % nn);
    }

    // Standard normal via Box-Muller with a cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - next_double();  // (0, 1], keeps log() finite
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[next_index(i)]);
        }
    }

    // k distinct indices from [0, n), ascending.
    std::vector<int> sample_without_replacement(int n, int k);

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace pfedlia
