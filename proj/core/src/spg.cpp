#include "spg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "simcal/simplex.hpp"

namespace simcal::detail {

SpgResult spg_maximize(Table& x, const ValueFn& value, const GradFn& grad, const SolverOptions& opts) {
    constexpr double kArmijo = 1e-4;
    constexpr double kMinStep = 1e-12;
    constexpr double kMaxStep = 1e12;
    constexpr double kMaxMove = 1e3;

    const double floor = opts.interior_floor;
    project_rows_to_simplex(x, floor);

    SpgResult out;
    out.value = value(x);
    Table g, g_new, trial, direction;
    grad(x, g);

    const double gmax = g.cwiseAbs().maxCoeff();
    double step = opts.step_rule == StepRule::fixed ? opts.fixed_step
                                                     : (gmax > 0.0 ? 1.0 / gmax : 1.0);
    int stalls = 0;

    for (int it = 0; it < opts.max_iterations; ++it) {
        out.iterations = it + 1;

        trial = x + g;
        project_rows_to_simplex(trial, floor);
        out.residual = (trial - x).cwiseAbs().maxCoeff();
        if (out.residual < opts.gradient_tolerance) {
            out.converged = true;
            break;
        }

        trial = x + step * g;
        project_rows_to_simplex(trial, floor);
        direction = trial - x;
        const double slope = (g.array() * direction.array()).sum();

        double t = 1.0;
        double candidate = value(trial);
        if (opts.step_rule == StepRule::backtracking) {
            while (!(candidate >= out.value + kArmijo * t * slope) && t > 1e-20) {
                t *= 0.5;
                trial = x + t * direction;
                candidate = value(trial);
            }
        }
        if (!std::isfinite(candidate) || candidate < out.value) {
            // No ascent available along the projected direction at machine precision.
            out.converged = out.residual < std::sqrt(opts.gradient_tolerance);
            break;
        }

        const double gain = candidate - out.value;
        grad(trial, g_new);
        const Table s = trial - x;
        const double sy = -(s.array() * (g_new - g).array()).sum();
        const double ss = s.squaredNorm();
        x = trial;
        g.swap(g_new);
        out.value = candidate;

        if (opts.step_rule == StepRule::backtracking) {
            step = sy > 0.0 ? std::clamp(ss / sy, kMinStep, kMaxStep) : kMaxStep;
            // Moves longer than the simplex diameter only cost projection accuracy.
            const double gnorm = g.cwiseAbs().maxCoeff();
            if (gnorm > 0.0) step = std::min(step, kMaxMove / gnorm);
        }
        // Stalled on a flat ridge: value no longer moves at machine precision.
        if (gain <= 1e-15 * std::max(1.0, std::abs(out.value))) {
            if (++stalls >= 50) {
                out.converged = out.residual < std::sqrt(opts.gradient_tolerance);
                break;
            }
        } else {
            stalls = 0;
        }
    }
    return out;
}

}  // namespace simcal::detail
