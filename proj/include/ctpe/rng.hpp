#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ctpe {

// Seed mixer (splitmix64). Used to derive independent stream seeds from one
// master seed so that, e.g., epoch 3's sampling does not overlap epoch 2's.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t s = master;
    splitmix64(s);
    s ^= 0x9e3779b97f4a7c15ULL * (stream + 1);
    splitmix64(s);
    return splitmix64(s);
}

// Deterministic RNG. mt19937_64 output is pinned by the standard; the helpers
// below avoid std::uniform_*_distribution, whose mapping is
// implementation-defined, so streams are reproducible across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t bits() { return engine_(); }

    // uniform double in [0, 1), 53-bit resolution
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // unbiased uniform integer in [0, n); rejection sampling
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t x, r;
        do {
            x = engine_();
            r = x % n;
        } while (x - r > std::uint64_t(0) - n);
        return r;
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

    bool coin() { return (engine_() >> 63) != 0; }

    // Fisher-Yates
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

}  // namespace ctpe
