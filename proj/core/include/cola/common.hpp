#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cola {

// All numerics run in double precision: desk-scale models are small and the
// gradient checks in the test suite assume FD noise well below 1e-4.
using scalar = double;

/// Invalid configuration or mismatched artifacts. CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite losses, exploding gradients, non-PSD inputs. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// FNV-1a over a byte string. Stable across platforms, used for config hashes.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Deterministic sub-seed for a named stream of a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, const std::string& stream) {
    return splitmix64(master ^ fnv1a64(stream));
}

std::string hex64(std::uint64_t v);

}  // namespace cola
