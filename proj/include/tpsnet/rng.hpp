#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace tpsnet {

// splitmix64 mix, used to derive independent stream seeds from a base
// seed plus a stream tag (epoch, sample index, ...).
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline Eigen::MatrixXd random_normal(std::mt19937_64& rng, Eigen::Index rows,
                                     Eigen::Index cols, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

inline Eigen::MatrixXd random_uniform(std::mt19937_64& rng, Eigen::Index rows,
                                      Eigen::Index cols, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    return m;
}

}  // namespace tpsnet
