#include "barrier.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Cholesky>

namespace simcal::detail {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

int newton_equality(Vector& x, const Objective& F, const Matrix& A, const Vector& b, int max_steps,
                    bool& converged) {
    constexpr double kAlpha = 0.25;
    constexpr double kBeta = 0.5;
    constexpr double kDecrement = 1e-11;

    Vector grad;
    Matrix hess;
    converged = false;
    double fx = F.value(x);
    int steps = 0;
    for (; steps < max_steps; ++steps) {
        F.derivatives(x, grad, hess);

        Eigen::LLT<Matrix> llt(hess);
        double shift = 0.0;
        while (llt.info() != Eigen::Success) {
            shift = shift == 0.0 ? 1e-10 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff()) : 10.0 * shift;
            llt.compute(hess + shift * Matrix::Identity(hess.rows(), hess.cols()));
        }
        const Matrix HinvAt = llt.solve(A.transpose());
        const Vector Hinvg = llt.solve(grad);
        const Matrix schur = A * HinvAt;
        const Vector residual = b - A * x;
        const Vector w = schur.ldlt().solve(-A * Hinvg - residual);
        const Vector step = -(Hinvg + HinvAt * w);

        const double decrement = -grad.dot(step);
        // F grows with the barrier weight, so the test is also relative to |F|.
        const double target = std::max(kDecrement, 1e-14 * std::abs(fx));
        if (decrement / 2.0 <= target && residual.cwiseAbs().maxCoeff() < 1e-13) {
            converged = true;
            break;
        }

        double t = 1.0;
        Vector trial = x + step;
        double ft = F.value(trial);
        while (!(ft <= fx - kAlpha * t * decrement) && t > 1e-14) {
            t *= kBeta;
            trial = x + t * step;
            ft = F.value(trial);
        }
        if (!(ft < kInf) || !(ft <= fx)) {
            // No decrease representable at this scale: treat as centred.
            converged = decrement / 2.0 < 1e-6 * std::max(1.0, std::abs(fx));
            break;
        }
        x = trial;
        fx = ft;
    }
    return steps;
}

void DiscrepancyProgram::set_row_weights(const Vector& weights) {
    equalities = Matrix::Zero(designs, static_cast<Eigen::Index>(designs) * outcomes);
    for (int j = 0; j < designs; ++j) {
        equalities.block(j, static_cast<Eigen::Index>(j) * outcomes, 1, outcomes) =
            weights.segment(j * outcomes, outcomes).transpose();
    }
    rhs = Vector::Ones(designs);
}

double DiscrepancyProgram::density(const Vector& d) const {
    double logs = 0.0;
    for (Eigen::Index k = 0; k < d.size(); ++k) {
        if (!(d(k) > 0.0)) return -kInf;
        if (counts(k) > 0.0) logs += counts(k) * std::log(d(k));
    }
    const Vector v = d - center;
    return logs - v.dot(*precision * v);
}

void DiscrepancyProgram::density_gradient(const Vector& d, Vector& grad) const {
    grad = -2.0 * (*precision * (d - center));
    grad.array() += counts.array() / d.array();
}

void DiscrepancyProgram::negative_density_hessian(const Vector& d, Matrix& hess) const {
    hess = 2.0 * *precision;
    hess.diagonal().array() += counts.array() / d.array().square();
}

double DiscrepancyProgram::equality_residual(const Vector& d) const {
    return (equalities * d - rhs).cwiseAbs().maxCoeff();
}

BarrierOutcome maximize_density(const DiscrepancyProgram& prog, const SolverOptions& opts) {
    const Matrix& A = prog.equalities;
    const auto size = static_cast<double>(prog.counts.size());
    BarrierOutcome out;
    out.d = Vector::Ones(prog.counts.size());
    out.converged = true;

    double t = 1.0 / opts.barrier_mu0;
    for (int round = 0; round < opts.barrier_max_rounds; ++round) {
        Objective F;
        F.value = [&](const Vector& d) {
            double barrier = 0.0;
            for (Eigen::Index k = 0; k < d.size(); ++k) {
                if (!(d(k) > 0.0)) return kInf;
                barrier -= std::log(d(k));
            }
            return -t * prog.density(d) + barrier;
        };
        F.derivatives = [&](const Vector& d, Vector& g, Matrix& H) {
            prog.density_gradient(d, g);
            g = -t * g;
            g.array() -= 1.0 / d.array();
            prog.negative_density_hessian(d, H);
            H *= t;
            H.diagonal().array() += 1.0 / d.array().square();
        };
        bool centred = false;
        out.newton_steps += newton_equality(out.d, F, A, prog.rhs, 100, centred);
        if (size / t < 0.01 * opts.barrier_gap_tolerance) break;
        t /= opts.barrier_shrink;
    }
    out.converged = size / t < opts.barrier_gap_tolerance;
    return out;
}

BarrierOutcome optimize_over_level_set(const DiscrepancyProgram& prog, const Vector& cost, double sign,
                                       double level, Vector start, const SolverOptions& opts) {
    const Matrix& A = prog.equalities;
    const double inequalities = static_cast<double>(prog.counts.size()) + 1.0;
    BarrierOutcome out;
    out.d = std::move(start);

    double t = 1.0 / opts.barrier_mu0;
    for (int round = 0; round < opts.barrier_max_rounds; ++round) {
        Objective F;
        F.value = [&](const Vector& d) {
            double barrier = 0.0;
            for (Eigen::Index k = 0; k < d.size(); ++k) {
                if (!(d(k) > 0.0)) return kInf;
                barrier -= std::log(d(k));
            }
            const double slack = prog.density(d) - level;
            if (!(slack > 0.0)) return kInf;
            return t * sign * cost.dot(d) - std::log(slack) + barrier;
        };
        F.derivatives = [&](const Vector& d, Vector& g, Matrix& H) {
            Vector dg;
            prog.density_gradient(d, dg);
            const double slack = prog.density(d) - level;
            prog.negative_density_hessian(d, H);
            H /= slack;
            H.noalias() += (dg * dg.transpose()) / (slack * slack);
            H.diagonal().array() += 1.0 / d.array().square();
            g = t * sign * cost - dg / slack;
            g.array() -= 1.0 / d.array();
        };
        bool centred = false;
        out.newton_steps += newton_equality(out.d, F, A, prog.rhs, 100, centred);
        if (inequalities / t < opts.barrier_gap_tolerance) break;
        t /= opts.barrier_shrink;
    }
    out.converged = inequalities / t < opts.barrier_gap_tolerance;
    return out;
}

}  // namespace simcal::detail
