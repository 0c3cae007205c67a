#pragma once

#include <vector>

#include "simcal/posterior.hpp"
#include "simcal/random.hpp"

namespace simcal::testing {

inline CountTable counts(int rows, int cols, std::initializer_list<std::int64_t> values) {
    CountTable c(rows, cols);
    auto it = values.begin();
    for (int j = 0; j < rows; ++j)
        for (int i = 0; i < cols; ++i) c(j, i) = *it++;
    return c;
}

inline Table table(int rows, int cols, std::initializer_list<double> values) {
    Table t(rows, cols);
    auto it = values.begin();
    for (int j = 0; j < rows; ++j)
        for (int i = 0; i < cols; ++i) t(j, i) = *it++;
    return t;
}

inline std::vector<double> unit_coords(int s) {
    std::vector<double> x(static_cast<std::size_t>(s));
    for (int j = 0; j < s; ++j) x[static_cast<std::size_t>(j)] = j;
    return x;
}

/// Identity correlation on both blocks.
inline GaussianPriorSpec identity_prior(int sm, double lambda_d, double lambda_p) {
    GaussianPriorSpec p;
    p.lambda_d = lambda_d;
    p.lambda_p = lambda_p;
    p.R_d = Matrix::Identity(sm, sm);
    p.R_p = Matrix::Identity(sm, sm);
    return p;
}

/// Random small model: counts in [0, max_real] / [min_sim, max_sim], default kernel prior.
inline PosteriorModel random_model(int s, int m, Rng& rng, int max_real = 8, int max_sim = 30, int min_sim = 0) {
    std::uniform_int_distribution<int> real(0, max_real);
    std::uniform_int_distribution<int> sim(min_sim, max_sim);
    CountTable n(s, m), nt(s, m);
    for (int j = 0; j < s; ++j)
        for (int i = 0; i < m; ++i) {
            n(j, i) = real(rng);
            nt(j, i) = sim(rng);
        }
    return PosteriorModel(ProblemData(unit_coords(s), n, nt), GaussianPriorSpec{});
}

}  // namespace simcal::testing
