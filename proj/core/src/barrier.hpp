#pragma once

// Log-barrier interior method for the concave programs met by the bound solver.
//
//   G(x) = −(x−c)ᵀ Q (x−c) + Σ n log x
//   A x = b,  x > 0
//
// With x = d, c = 1, Q = λ_d R_d⁻¹ and one row Σ_i π̃_j(i) d_j(i) = 1 per design,
// this is the discrepancy step; with x = p̃ it is the simulator step.

#include <functional>

#include "simcal/mode.hpp"
#include "simcal/types.hpp"

namespace simcal::detail {

struct DiscrepancyProgram {
    int designs = 0;
    int outcomes = 0;
    Matrix equalities;  // A
    Vector rhs;         // b
    Vector counts;      // n
    Vector center;      // c
    const Matrix* precision = nullptr;

    /// One row Σ_i w_j(i) x_j(i) = 1 per design.
    void set_row_weights(const Vector& weights);

    double density(const Vector& x) const;  // G(x); −∞ outside x > 0
    void density_gradient(const Vector& x, Vector& grad) const;
    /// −∇²G = 2Q + diag(n / x²)
    void negative_density_hessian(const Vector& x, Matrix& hess) const;
    /// max |A x − b|
    double equality_residual(const Vector& x) const;
};

struct Objective {
    std::function<double(const Vector&)> value;  // +∞ outside the domain
    std::function<void(const Vector&, Vector&, Matrix&)> derivatives;
};

/// Damped Newton for min F(x) s.t. Ax = b from a point in the domain. An
/// indefinite Hessian is shifted until it factors. Returns the step count;
/// `converged` is set when the Newton decrement is small.
int newton_equality(Vector& x, const Objective& F, const Matrix& A, const Vector& b, int max_steps,
                    bool& converged);

struct BarrierOutcome {
    Vector d;
    int newton_steps = 0;
    bool converged = false;
};

/// Maximiser of G over the equality constraints (started at x ≡ 1, which
/// must satisfy them).
BarrierOutcome maximize_density(const DiscrepancyProgram& prog, const SolverOptions& opts);

/// Minimises sign·(costᵀx) over {G(x) ≥ level}; `start` must be strictly feasible.
BarrierOutcome optimize_over_level_set(const DiscrepancyProgram& prog, const Vector& cost, double sign,
                                       double level, Vector start, const SolverOptions& opts);

}  // namespace simcal::detail
