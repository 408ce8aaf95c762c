#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ktune {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from a master seed and tag words.
// Sampler iterations, GA instances, and grid points all get their own stream
// so that resumed and parallel runs replay bit-identically.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix64(splitmix64(seed ^ (a * 0x9e3779b97f4a7c15ull)) ^ b);
}

// mt19937_64 with hand-rolled value mappings. The std distributions are
// implementation-defined; these are not, so artifacts stay stable across
// standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // uniform in [0, 1)
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // uniform in [low, high)
    double uniform(double low, double high) { return low + (high - low) * uniform01(); }

    // uniform in [0, n); bias is negligible for any n we use
    std::uint64_t below(std::uint64_t n) { return n <= 1 ? 0 : gen_() % n; }

    // uniform integer in [low, high] inclusive
    long long uniform_int(long long low, long long high) {
        return low + static_cast<long long>(below(static_cast<std::uint64_t>(high - low) + 1));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        shuffle(p);
        return p;
    }

private:
    std::mt19937_64 gen_;
};

} // namespace ktune
