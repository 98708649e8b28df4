#pragma once
#include <cstdint>

namespace flatvp {

/// Counter-based generator: the n-th draw of stream `key` is a pure function
/// of (seed, key, n), built from the SplitMix64 finalizer. Sampling particle i
/// uses key = i, so results do not depend on evaluation order or threading.
class CounterRng {
public:
    static constexpr const char* name = "splitmix64-counter";

    CounterRng(std::uint64_t seed, std::uint64_t key) : state_(mix(seed ^ mix(key + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t next_u64()
    {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    /// Uniform double in the open interval (0, 1).
    double uniform()
    {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    static std::uint64_t mix(std::uint64_t z)
    {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

}  // namespace flatvp
