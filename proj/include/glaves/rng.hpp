#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace glaves {

// splitmix64; used to derive independent substreams from a user seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Hash a (seed, path...) tuple into a stream seed. Substreams derived from
// distinct paths are independent of worker count and evaluation order.
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t part : path) {
        h = splitmix64(h ^ splitmix64(part));
    }
    return h;
}

inline std::mt19937_64 make_engine(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> path = {}) {
    return std::mt19937_64(derive_seed(seed, path));
}

}  // namespace glaves
