#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace dnas {

// SplitMix64 finalizer. All randomness in the project flows through this
// single mixing function so results are bit-reproducible across platforms
// and languages.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Derive an independent stream key from a base seed and a label. Streams
// with distinct labels never share draws, which is what makes parallel
// training runs and optional noise streams independent of each other.
std::uint64_t derive_key(std::uint64_t seed, std::string_view label);
std::uint64_t derive_key(std::uint64_t seed, std::string_view label, std::uint64_t index);

// Counter-based generator: draw i is mix64(key + i * GAMMA). Stateless
// apart from the counter, so serializing (key, counter) captures the
// whole generator.
class CounterRng {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0)
        : key_(key), counter_(counter) {}

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }
    void set_counter(std::uint64_t c) noexcept { counter_ = c; }

    std::uint64_t next_u64() { return mix64(key_ + (counter_++) * kGamma); }

    // Uniform in [0, 1), 53-bit mantissa.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_uniform();
    }

    // Standard normal via Box-Muller (cosine branch only, so one normal
    // consumes exactly two counter draws and no state is cached).
    double next_normal();

    // Integer in [0, n), rejection-free via 128-bit multiply.
    std::uint64_t next_below(std::uint64_t n);

    // In-place Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

} // namespace dnas
