#pragma once

#include <cstdint>

namespace rieszflow {

/// Counter-based SplitMix64. Deterministic across platforms: stream k of seed
/// q is hash(q + k * golden gamma), so fixtures are reproducible from (seed,
/// index) alone and safe to draw concurrently.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Value of stream element k without advancing shared state.
    static double at(std::uint64_t seed, std::uint64_t k) {
        SplitMix64 g(seed + k * 0x9e3779b97f4a7c15ull);
        return g.next_double();
    }

private:
    std::uint64_t state_;
};

} // namespace rieszflow
