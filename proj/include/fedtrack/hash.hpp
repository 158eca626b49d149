#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace fedtrack {

// FNV-1a with a splitmix-style finalizer. Used for track naming and for
// deriving per-(client, round, track) training seeds; both need a stable
// value across platforms and runs, which rules out std::hash.
inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

constexpr std::uint64_t hash_bytes(std::uint64_t h, const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<std::uint8_t>(data[i]);
        h *= kFnvPrime;
    }
    return h;
}

constexpr std::uint64_t hash_u64(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (i * 8)) & 0xFFu;
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t hash_str(std::uint64_t h, std::string_view s) {
    return hash_bytes(h, s.data(), s.size());
}

constexpr std::uint64_t finalize_hash(std::uint64_t h) {
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return h;
}

std::string hex64(std::uint64_t v);

} // namespace fedtrack
