#pragma once

#include <cstdint>

#include "simcal/posterior.hpp"

namespace simcal {

enum class StepRule { fixed, backtracking };

struct SolverOptions {
    int max_iterations = 20000;
    double gradient_tolerance = 1e-9;
    StepRule step_rule = StepRule::backtracking;
    double fixed_step = 1e-4;  // only read when step_rule == fixed
    int restarts = 5;
    std::uint64_t seed = 0;
    double interior_floor = 1e-10;

    // Level-set solvers: log-barrier schedule μ_k = barrier_mu0 · barrier_shrink^k.
    double barrier_mu0 = 1.0;
    double barrier_shrink = 0.2;
    double barrier_gap_tolerance = 1e-8;
    int barrier_max_rounds = 40;
    int max_alternations = 200;

    void validate() const;
};

struct ModeResult {
    DiscrepancyTable d_star;
    ProbTable p_star;        // d_star ∘ p̃_star
    ProbTable p_tilde_star;
    double log_post_star = 0.0;
    int iterations = 0;
    bool converged = false;
    double kkt_residual = 0.0;
};

/// Constrained maximiser of the log posterior, searched over (p, p̃) with both
/// blocks on simplices. Best of `opts.restarts` starts (the first is the
/// smoothed empirical frequencies, the rest Dirichlet perturbations of it).
ModeResult find_posterior_mode(const PosteriorModel& model, const SolverOptions& opts = {});

/// Smoothed empirical start: (n_j(i)+1)/(n_j+m) and (ñ_j(i)+1)/(ñ_j+m).
void smoothed_frequencies(const ProblemData& data, Table& p, Table& p_tilde);

}  // namespace simcal
