#include "dnas/rng.hpp"

#include <cmath>

namespace dnas {

std::uint64_t derive_key(std::uint64_t seed, std::string_view label) {
    // FNV-1a over the label, folded into the seed through mix64.
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return mix64(seed ^ mix64(h));
}

std::uint64_t derive_key(std::uint64_t seed, std::string_view label, std::uint64_t index) {
    return mix64(derive_key(seed, label) ^ mix64(index));
}

double CounterRng::next_normal() {
    double u1 = next_uniform();
    double u2 = next_uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

std::uint64_t CounterRng::next_below(std::uint64_t n) {
    // Lemire's multiply-shift; bias is negligible for the small n used here
    // and the result is fully deterministic.
    using u128 = unsigned __int128;
    return static_cast<std::uint64_t>((static_cast<u128>(next_u64()) * n) >> 64);
}

} // namespace dnas
