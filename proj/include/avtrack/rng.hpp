#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace avtrack {

// splitmix64 step; used to derive independent stream seeds from a master seed.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t hash_str(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Deterministic sub-stream: same (seed, tags...) always yields the same engine,
// independent of call order elsewhere in the program.
inline std::mt19937_64 substream(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t s = mix64(seed);
    s = mix64(s ^ a);
    s = mix64(s ^ b);
    s = mix64(s ^ c);
    return std::mt19937_64(s);
}

inline std::mt19937_64 substream(uint64_t seed, const std::string& tag, uint64_t b = 0,
                                 uint64_t c = 0) {
    return substream(seed, hash_str(tag), b, c);
}

}  // namespace avtrack
