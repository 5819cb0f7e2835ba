#pragma once

#include <cstdint>
#include <random>

namespace hsd {

/// SplitMix64 finalizer; used only to derive seeds for independent substreams.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stream tags keep substreams for different purposes disjoint.
enum class StreamTag : std::uint64_t {
    restart = 1,
    noise = 2,
    run = 3,
    truth = 4,
};

inline constexpr std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag, std::uint64_t index) {
    return mix64(mix64(seed ^ mix64(static_cast<std::uint64_t>(tag))) + index);
}

/// Seedable random stream: std::mt19937_64 seeded through SplitMix64.
/// Real draws are built from the raw 64-bit output rather than
/// std::uniform_real_distribution, so sequences do not depend on the standard
/// library vendor.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    /// Child stream for (tag, index). Depends only on this stream's seed, never
    /// on how many values were drawn from it.
    RandomStream substream(StreamTag tag, std::uint64_t index) const {
        return RandomStream(derive_seed(seed_, tag, index));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    /// Uniform on the open interval (lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_open(); }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

} // namespace hsd
