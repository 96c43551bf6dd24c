#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cola/common.hpp"

namespace cola {

/// Seeded RNG. All randomness in the pipeline flows through explicitly seeded
/// instances of this class; named forks give independent reproducible streams.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream derived from a master seed and a stream name.
    static Rng forked(std::uint64_t master, const std::string& stream) {
        return Rng(derive_seed(master, stream));
    }

    std::mt19937_64& engine() { return engine_; }

    scalar uniform(scalar lo = 0.0, scalar hi = 1.0) {
        return std::uniform_real_distribution<scalar>(lo, hi)(engine_);
    }
    scalar normal(scalar mean = 0.0, scalar stddev = 1.0) {
        return std::normal_distribution<scalar>(mean, stddev)(engine_);
    }
    /// Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n) {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
    }
    bool bernoulli(scalar p) { return std::bernoulli_distribution(p)(engine_); }

    std::vector<int> permutation(int n) {
        std::vector<int> p(n);
        for (int i = 0; i < n; ++i) p[i] = i;
        shuffle(p);
        return p;
    }
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace cola
