#pragma once

// Projected gradient ascent over products of simplex rows with Barzilai-Borwein
// step lengths and an Armijo backtracking search along the projection arc.

#include <functional>

#include "simcal/mode.hpp"
#include "simcal/types.hpp"

namespace simcal::detail {

struct SpgResult {
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
    double residual = 0.0;  // ‖P(x + ∇) − x‖∞
};

using ValueFn = std::function<double(const Table&)>;
using GradFn = std::function<void(const Table&, Table&)>;

/// Maximises `value` over rows of `x` constrained to {v ≥ floor, Σv = 1}.
/// `x` must be feasible with a finite value on entry; it is updated in place.
SpgResult spg_maximize(Table& x, const ValueFn& value, const GradFn& grad, const SolverOptions& opts);

}  // namespace simcal::detail
