#pragma once

#include <cstdint>
#include <string_view>

namespace jetpref {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30u)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27u)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31u);
}

inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Independent stream seed for (base seed, purpose tag, index).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index = 0) {
    return splitmix64(splitmix64(base ^ fnv1a64(tag)) + index);
}

/// Counter-based uniform draw in [0, 1) from (key, counter).
inline double hashed_uniform(std::uint64_t key, std::uint64_t counter) {
    return static_cast<double>(splitmix64(key ^ splitmix64(counter)) >> 11u) * 0x1.0p-53;
}

}  // namespace jetpref
