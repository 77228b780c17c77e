#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <vector>

namespace aoi {

// Seedable 64-bit generator. Substreams are derived by hashing the base seed
// together with a list of integer keys through std::seed_seq, so distinct key
// tuples give statistically independent streams.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed) : RandomSource(seed, {}) {}

    RandomSource(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
        std::vector<std::uint32_t> words;
        words.reserve(2 + 2 * keys.size());
        auto push = [&words](std::uint64_t v) {
            words.push_back(static_cast<std::uint32_t>(v));
            words.push_back(static_cast<std::uint32_t>(v >> 32));
        };
        push(seed);
        for (auto k : keys) push(k);
        std::seed_seq seq(words.begin(), words.end());
        engine_.seed(seq);
    }

    // Uniform on the open interval (0, 1).
    double uniform() {
        for (;;) {
            double u = std::generate_canonical<double, 53>(engine_);
            if (u > 0.0 && u < 1.0) return u;
        }
    }

    // Exponential with the given rate; +inf for rate 0.
    double exponential(double rate) {
        if (rate <= 0.0) return std::numeric_limits<double>::infinity();
        return -std::log(uniform()) / rate;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace aoi
