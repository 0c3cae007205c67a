#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "simcal/mode.hpp"
#include "simcal/posterior.hpp"

namespace simcal {

/// Linear functional ζ = Σ_j Σ_i z_j(i) p_j(i) of the real-system distributions.
struct QueryFunctional {
    Table z;
    std::string description;

    double evaluate(const Table& p) const { return (z.array() * p.array()).sum(); }
};

/// Per-outcome indicator at one design point: ζ = p_design(outcome).
QueryFunctional indicator_functional(int designs, int outcomes, int design, int outcome);
/// Expectation of `values` (one per outcome) at one design point.
QueryFunctional expectation_functional(int designs, const std::vector<double>& values, int design);

/// Either a confidence level q or a radius ℓ; log c = log post* − Φ⁻¹(q)²/2 or − ℓ²/2.
class ThresholdSpec {
public:
    static ThresholdSpec from_level(double q);
    static ThresholdSpec from_radius(double ell);

    /// ℓ, computing Φ⁻¹(q) when the level form was given.
    double radius() const;
    std::optional<double> level() const { return q_; }

private:
    std::optional<double> q_;
    std::optional<double> ell_;
};

enum class SolveStatus { optimal, max_iter, infeasible };
const char* to_string(SolveStatus status);

enum class Direction { minimize, maximize };

struct BoundSolution {
    double value = 0.0;
    SolveStatus status = SolveStatus::infeasible;
    int iterations = 0;
    double feasibility_residual = 0.0;
    Table p;        // real-system distribution at the optimum
    Table p_tilde;  // simulator distribution at the optimum (π̃ for the fixed-simulator solver)
};

struct BoundResult {
    double lower = 0.0;
    double upper = 0.0;
    double log_c = 0.0;
    double mode_value = 0.0;
    SolveStatus lower_status = SolveStatus::infeasible;
    SolveStatus upper_status = SolveStatus::infeasible;
    double feasibility_residual = 0.0;
    int lower_iterations = 0;
    int upper_iterations = 0;
    double ell = 0.0;
    std::optional<double> q;

    bool optimal() const {
        return lower_status == SolveStatus::optimal && upper_status == SolveStatus::optimal;
    }
    /// Strictly disjoint intervals.
    bool disjoint_from(const BoundResult& other) const {
        return upper < other.lower || other.upper < lower;
    }
};

double threshold_from_spec(const ThresholdSpec& spec, double log_post_star);

/// Optimum of ζ over {log post ≥ log_c} by alternating convex subproblems,
/// started at the posterior mode.
BoundSolution solve_bound(const PosteriorModel& model, const QueryFunctional& functional, double log_c,
                          Direction direction, const SolverOptions& opts = {});
BoundSolution solve_bound(const PosteriorModel& model, const ModeResult& mode,
                          const QueryFunctional& functional, double log_c, Direction direction,
                          const SolverOptions& opts = {});

/// Maximum of g(d) + Σ n log d over valid discrepancies with respect to a fixed π̃.
struct FixedSimMode {
    Table d;
    double value = 0.0;
};
FixedSimMode fixed_sim_mode(const Table& pi_tilde, const ProblemData& data, const GaussianPriorSpec& prior,
                            const SolverOptions& opts = {});

/// Optimum of Σ z π̃ d subject to g(d) + Σ n log d ≥ log_c, d ≥ 0, Σ_i π̃_j(i) d_j(i) = 1,
/// solved by a log-barrier interior method (convex program).
BoundSolution solve_bound_fixed_sim(const Table& pi_tilde, const ProblemData& data,
                                    const GaussianPriorSpec& prior, const QueryFunctional& functional,
                                    double log_c, Direction direction, const SolverOptions& opts = {});

/// Mode → threshold → both directions.
BoundResult bound_interval(const PosteriorModel& model, const QueryFunctional& functional,
                           const ThresholdSpec& spec, const SolverOptions& opts = {});
BoundResult bound_interval(const PosteriorModel& model, const ModeResult& mode,
                           const QueryFunctional& functional, const ThresholdSpec& spec,
                           const SolverOptions& opts = {});

struct BruteForceResult {
    double value = 0.0;
    bool feasible = false;
    long long evaluations = 0;
    Table p;  // best lattice point
    Table p_tilde;
};

/// Lattice oracle for small instances (s·m ≤ 6): an exhaustive scan of a
/// coarse lattice over the product of simplices, then lattice refinement of
/// the best feasible points down to `grid_step`.
BruteForceResult brute_force_bound(const PosteriorModel& model, const QueryFunctional& functional,
                                   double log_c, Direction direction, double grid_step);

struct ConvexityProbeResult {
    double pass_fraction = 1.0;
    int pairs_tested = 0;
    int feasible_points = 0;
    bool degenerate = false;
};

/// Draws posterior samples, keeps those inside {log post ≥ log_c}, and checks
/// that midpoints of random pairs stay inside the set.
ConvexityProbeResult convexity_probe(const PosteriorModel& model, double log_c, int n_pairs,
                                     std::uint64_t seed);

}  // namespace simcal
