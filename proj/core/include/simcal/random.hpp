#pragma once

#include <cstdint>
#include <random>

#include "simcal/types.hpp"

namespace simcal {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser; derives independent stream seeds from (seed, index).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    return Rng(mix_seed(seed, stream));
}

/// Each row drawn from Dirichlet(1, …, 1).
Table dirichlet_rows(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Multinomial draw of `trials` over the probabilities in `probs`.
std::vector<std::int64_t> multinomial(std::int64_t trials, const std::vector<double>& probs, Rng& rng);

}  // namespace simcal
