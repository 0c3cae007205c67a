#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "simcal/bounds.hpp"
#include "simcal/posterior.hpp"

namespace simcal {

/// Retained Metropolis-Hastings draws in the (p, p̃) parameterisation.
struct Chain {
    std::vector<Table> p;
    std::vector<Table> p_tilde;
    std::vector<double> log_posts;
    double acceptance_rate = 0.0;
    std::uint64_t seed = 0;

    std::size_t size() const { return log_posts.size(); }
};

struct SamplerOptions {
    int n_draws = 1000;
    int burn_in = 1000;
    double step_scale = 0.1;
    int thin = 1;  // sweeps between retained draws
    bool adapt = true;
    double target_acceptance = 0.25;
    std::uint64_t seed = 0;
};

/// Random-walk MH started at the posterior mode. Each sweep updates every
/// simplex row of p and p̃ in turn with a logistic-normal step (Gaussian in
/// additive log-ratio coordinates, Jacobian included in the acceptance
/// ratio). Per-row scales start at `step_scale`, adapt toward the target
/// acceptance during burn-in, and are frozen afterwards.
Chain mh_sample(const PosteriorModel& model, const SamplerOptions& opts);
/// Same, started at a mode the caller already has.
Chain mh_sample(const PosteriorModel& model, const ModeResult& mode, const SamplerOptions& opts);
Chain mh_sample(const PosteriorModel& model, int n_draws, int burn_in, double step_scale, std::uint64_t seed);

/// Type-7 empirical quantile of ζ(p) over the chain.
double posterior_quantile(const Chain& chain, const QueryFunctional& functional, double alpha);

/// Effective sample size of a scalar trace (initial positive sequence of autocorrelations).
double effective_sample_size(const std::vector<double>& trace);

/// One row per draw: draw, p_j_i..., pt_j_i..., log_post.
void write_chain_csv(const Chain& chain, std::ostream& out);

}  // namespace simcal
