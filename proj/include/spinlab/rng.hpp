#pragma once

// Deterministic randomness.
//
// Every random draw in the library flows from a single run seed through
// named substreams:
//
//     key = splitmix64( splitmix64(seed) ^ 0xD1B54A32D192ED03 * (stream + 1) )
//
// and `key` seeds a std::mt19937_64. Distribution shaping (uniform doubles,
// normals, bounded ints, categorical draws) is implemented here rather than
// with <random> distributions, whose output sequences are
// implementation-defined; this keeps sample streams bit-stable.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace spinlab {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Substream purposes. A stream id is (purpose << 32) | index, so per-iteration
// streams never collide across purposes.
enum class Stream : std::uint64_t {
    task_base = 1,
    task_data = 2,
    sft = 3,
    gather = 4,     // index = iteration
    optimizer = 5,  // index = iteration
    gfn_train = 6,  // index = iteration (0 for standalone training)
    generic = 7,
};

inline std::uint64_t stream_id(Stream purpose, std::uint64_t index = 0) {
    return (static_cast<std::uint64_t>(purpose) << 32) | index;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    static Rng substream(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed;
        std::uint64_t a = splitmix64(s);
        std::uint64_t t = a ^ (0xD1B54A32D192ED03ull * (stream + 1));
        return Rng(splitmix64(t));
    }

    static Rng substream(std::uint64_t seed, Stream purpose, std::uint64_t index = 0) {
        return substream(seed, stream_id(purpose, index));
    }

    // The substream key itself, for seeding nested components.
    static std::uint64_t derive_seed(std::uint64_t seed, Stream purpose, std::uint64_t index = 0) {
        std::uint64_t s = seed;
        std::uint64_t a = splitmix64(s);
        std::uint64_t t = a ^ (0xD1B54A32D192ED03ull * (stream_id(purpose, index) + 1));
        return splitmix64(t);
    }

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller with a cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Uniform integer in [0, n), rejection sampling (no modulo bias).
    std::uint64_t bounded(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r = gen_();
        while (r >= limit) r = gen_();
        return r % n;
    }

    // Inverse-CDF draw from a probability vector (assumed to sum to ~1).
    int categorical(std::span<const double> probs) {
        double u = uniform();
        double cum = 0.0;
        for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
            cum += probs[i];
            if (u < cum) return static_cast<int>(i);
        }
        return static_cast<int>(probs.size()) - 1;
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Fisher-Yates permutation of 0..n-1.
inline std::vector<int> shuffled_indices(int n, Rng& rng) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(i) + 1));
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

}  // namespace spinlab
