#pragma once

#include <cstdint>

namespace adlab {

// SplitMix64 finalizer.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Independent stream for (base, stream-id).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return mix_seed(mix_seed(base) ^ (stream * 0xD1B54A32D192ED03ULL));
}

namespace streams {
inline constexpr std::uint64_t kDataset = 1;
inline constexpr std::uint64_t kTestSet = 2;
inline constexpr std::uint64_t kInit = 3;
inline constexpr std::uint64_t kRandomSign = 4;
}  // namespace streams

}  // namespace adlab
