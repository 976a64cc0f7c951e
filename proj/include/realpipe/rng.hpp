#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

namespace realpipe {

// splitmix64 step. Fixed reference constants, so seeded streams are
// reproducible across platforms and standard library versions.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Deliberately not std::mt19937 + std::uniform_int_distribution: the
// distribution's output sequence is implementation-defined, and seeded
// shuffles here must be bit-stable.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64_next(state_); }

    // Uniform draw in [0, bound). bound must be > 0.
    std::uint64_t next_below(std::uint64_t bound) { return next_u64() % bound; }

private:
    std::uint64_t state_;
};

// Derives an independent stream seed from a base seed and two indices.
// Used for per-(feature, repeat) permutation streams.
inline std::uint64_t derive_stream_seed(std::uint64_t seed,
                                        std::uint64_t a,
                                        std::uint64_t b) {
    std::uint64_t s = seed;
    std::uint64_t x = splitmix64_next(s);
    s = x ^ (a * 0xA24BAED4963EE407ull);
    x = splitmix64_next(s);
    s = x ^ (b * 0x9FB21C651E98DF25ull);
    return splitmix64_next(s);
}

// In-place Fisher-Yates shuffle driven by the portable generator above.
template <typename T>
void seeded_shuffle(std::vector<T>& values, Rng& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(values[i - 1], values[j]);
    }
}

// k distinct indices drawn from [0, n) without replacement, returned in
// ascending order. Deterministic for a given seed.
inline std::vector<std::size_t> sample_indices(std::size_t n,
                                               std::size_t k,
                                               std::uint64_t seed) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    if (k >= n) return pool;
    Rng rng(seed);
    // Partial Fisher-Yates: after k steps the tail holds the sample.
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t limit = n - i;
        std::size_t j = static_cast<std::size_t>(rng.next_below(limit));
        std::swap(pool[limit - 1], pool[j]);
    }
    std::vector<std::size_t> picked(pool.end() - static_cast<std::ptrdiff_t>(k),
                                    pool.end());
    std::sort(picked.begin(), picked.end());
    return picked;
}

} // namespace realpipe
