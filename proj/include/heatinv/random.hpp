#pragma once

#include <cstdint>
#include <random>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

namespace heatinv {

/// Engine used everywhere. std::mt19937_64 and std::seed_seq are fully
/// specified by the standard; the Boost distributions below are header code
/// with a fixed algorithm (ziggurat normals), so draws are reproducible
/// across compilers and platforms, unlike std::normal_distribution.
using Rng = std::mt19937_64;

/// Independent stream `stream` derived from a root seed.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x68656174u};
    return Rng(seq);
}

/// Child seed for a sub-job (study cell, chain replicate, path block).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    Rng r = make_rng(seed, stream);
    return r();
}

inline double standard_normal(Rng& rng) {
    boost::random::normal_distribution<double> nd(0.0, 1.0);
    return nd(rng);
}

/// Uniform on [0, 1).
inline double uniform01(Rng& rng) {
    boost::random::uniform_real_distribution<double> ud(0.0, 1.0);
    return ud(rng);
}

/// Uniform on the open interval (0, 1).
inline double uniform_open01(Rng& rng) {
    double u = uniform01(rng);
    while (u == 0.0) u = uniform01(rng);
    return u;
}

}  // namespace heatinv
