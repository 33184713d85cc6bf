#pragma once

#include <cstdint>
#include <limits>

namespace kwlngb {

/// Counter-based random stream. Each (key, counter) pair maps to one output
/// through the SplitMix64 finalizer, so a stream is fully determined by the
/// key it was derived from and how many values have been drawn.
///
/// Satisfies UniformRandomBitGenerator.
class RandomStream {
public:
    using result_type = std::uint64_t;

    explicit RandomStream(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

    /// Independent stream for replicate `index` of a run seeded with `seed`.
    static RandomStream derive(std::uint64_t seed, std::uint64_t index) {
        RandomStream s(0);
        s.key_ = mix(mix(seed ^ 0x6a09e667f3bcc909ULL) + mix(index + 0xbb67ae8584caa73bULL));
        return s;
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        ++counter_;
        return mix(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
    }

    /// Uniform double strictly inside (0, 1).
    double uniform_open() {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace kwlngb
