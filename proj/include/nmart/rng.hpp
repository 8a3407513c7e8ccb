#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace nmart {

using Engine = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic seed for (root, path, substream); distinct triples give
/// statistically unrelated streams.
inline constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t path,
                                           std::uint64_t substream) noexcept {
    std::uint64_t h = splitmix64(root);
    h = splitmix64(h ^ (path * 0xd1b54a32d192ed03ULL));
    h = splitmix64(h ^ (substream * 0xa0761d6478bd642fULL + 0x632be59bd9b4e019ULL));
    return h;
}

/// Root seed for a named sub-experiment (e.g. one control of a sweep).
inline constexpr std::uint64_t child_seed(std::uint64_t root, std::uint64_t child) noexcept {
    return derive_seed(root, ~child, 0x5eedULL);
}

/// Per-path random streams. Coordinate i draws Gaussians from substream 2i
/// and Poisson counts from substream 2i + 1.
class PathStreams {
public:
    PathStreams(std::uint64_t root, std::uint64_t path, std::size_t dims) {
        gauss_.reserve(dims);
        jumps_.reserve(dims);
        for (std::size_t i = 0; i < dims; ++i) {
            gauss_.emplace_back(derive_seed(root, path, 2 * i));
            jumps_.emplace_back(derive_seed(root, path, 2 * i + 1));
        }
        // One distribution per coordinate: libstdc++ caches the second
        // Box-Muller variate inside the distribution object.
        normals_.resize(dims);
    }

    double gaussian(std::size_t coord) { return normals_[coord](gauss_[coord]); }

    long poisson(std::size_t coord, double mean) {
        if (mean <= 0.0) return 0;
        std::poisson_distribution<long> dist(mean);
        return dist(jumps_[coord]);
    }

    double exponential(std::size_t coord, double rate) {
        std::exponential_distribution<double> dist(rate);
        return dist(jumps_[coord]);
    }

    std::size_t dims() const noexcept { return gauss_.size(); }

private:
    std::vector<Engine> gauss_;
    std::vector<Engine> jumps_;
    std::vector<std::normal_distribution<double>> normals_;
};

} // namespace nmart
