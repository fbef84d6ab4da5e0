#pragma once

#include <cstdint>
#include <string_view>

namespace qevade {

/// 64-bit FNV-1a hash. Used for deriving stage seeds from labels and for
/// hashing artifact files in run manifests.
constexpr std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// SplitMix64 step. Mixes well enough to serve both as a stream generator
/// and as the seed-derivation function.
constexpr std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Derives a per-stage sub-seed from a master seed and a stage label.
/// The derivation is `splitmix64(master ^ fnv1a64(label))`, so sub-seeds for
/// distinct labels are independent and changing one stage's label or seed
/// never perturbs another stage.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
    std::uint64_t s = master ^ fnv1a64(label);
    return splitmix64(s);
}

/// Small deterministic PRNG (SplitMix64 stream). Self-contained so results
/// are identical across standard libraries and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be > 0. Unbiased via rejection.
    std::uint64_t uniform_below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::uint64_t state_;
};

}  // namespace qevade
