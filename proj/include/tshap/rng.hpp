#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace tshap {

using Rng = std::mt19937_64;

/// splitmix64 step, used to derive well-separated seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based stream split: stream `k` of master seed `seed`.
/// Streams with distinct k are statistically independent for practical use.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t s = splitmix64(seed ^ splitmix64(stream + 0x5851f42d4c957f2dULL));
    return Rng(s);
}

inline double std_normal(Rng& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    return n01(rng);
}

inline Eigen::VectorXd normal_vector(int n, Rng& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z[i] = n01(rng);
    return z;
}

inline double uniform01(Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return u(rng);
}

/// Uniform integer in [0, n).
inline int uniform_index(int n, Rng& rng) {
    std::uniform_int_distribution<int> u(0, n - 1);
    return u(rng);
}

} // namespace tshap
