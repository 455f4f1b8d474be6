#ifndef KMA_RNG_HPP
#define KMA_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace kma {

// splitmix64 finalizer, used to derive child seeds from a root seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Seed for partition i (0-based) under a root seed.
inline std::uint64_t partition_seed(std::uint64_t root, std::size_t i) {
    return splitmix64(root + 0x9E3779B97F4A7C15ULL * (i + 1));
}

// Seed for trajectory j within a partition stream. Each trajectory owns its
// own generator, so results do not depend on generation order.
inline std::uint64_t trajectory_seed(std::uint64_t pseed, std::size_t j) {
    return splitmix64(pseed + 0xBF58476D1CE4E5B9ULL * (j + 1));
}

// mt19937_64 with uniform sampling by inversion of the top 53 bits.
// The raw mt19937_64 stream is pinned by the standard, and the double
// conversion below is plain arithmetic, so sequences are identical across
// platforms (std::uniform_real_distribution is not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform(double lo, double hi) {
        const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }

    // Uniform integer in [0, n). Modulo bias is irrelevant at our sizes.
    std::uint64_t index(std::uint64_t n) { return gen_() % n; }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

// Portable Fisher-Yates shuffle (std::shuffle is implementation-defined).
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::swap(v[i - 1], v[rng.index(i)]);
    }
}

}  // namespace kma

#endif
