#include "simcal/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "barrier.hpp"
#include "simcal/normal.hpp"
#include "simcal/random.hpp"
#include "simcal/sampler.hpp"
#include "simcal/simplex.hpp"
#include "spg.hpp"

namespace simcal {
namespace {

constexpr double kInfeasibleSlack = 1e-9;

void check_functional(const QueryFunctional& f, int s, int m) {
    if (f.z.rows() != s || f.z.cols() != m) {
        throw std::invalid_argument("functional shape does not match the model");
    }
    if (!f.z.allFinite()) throw std::invalid_argument("functional coefficients must be finite");
}

double sign_of(Direction direction) {
    return direction == Direction::maximize ? -1.0 : 1.0;
}

bool better(double candidate, double incumbent, Direction direction) {
    return direction == Direction::maximize ? candidate > incumbent : candidate < incumbent;
}

detail::DiscrepancyProgram make_program(const Table& pi_tilde, const ProblemData& data, const Matrix& precision) {
    detail::DiscrepancyProgram prog;
    prog.designs = data.designs();
    prog.outcomes = data.outcomes();
    prog.counts = data.real_counts().cast<double>().reshaped<Eigen::RowMajor>();
    prog.center = Vector::Ones(prog.counts.size());
    prog.precision = &precision;
    prog.set_row_weights(flat(pi_tilde));
    return prog;
}

// The simulator step with d fixed: G(p̃) = f(p̃) + Σ (n + ñ) log p̃ subject to
// Σ_i p̃_j(i) = 1 and Σ_i d_j(i) p̃_j(i) = 1. The second row is written against
// the row mean of d so that the pair stays well conditioned, and dropped when
// d is constant on the row (the two constraints then coincide).
detail::DiscrepancyProgram simulator_program(const PosteriorModel& model, const Table& d) {
    const int s = model.designs();
    const int m = model.outcomes();
    detail::DiscrepancyProgram prog;
    prog.designs = s;
    prog.outcomes = m;
    prog.counts = (model.data().real_counts() + model.data().sim_counts()).cast<double>().reshaped<Eigen::RowMajor>();
    prog.center = Vector::Constant(prog.counts.size(), 1.0 / m);
    prog.precision = &model.simulator_precision();

    std::vector<std::pair<Vector, double>> rows;
    for (int j = 0; j < s; ++j) {
        Vector ones = Vector::Zero(static_cast<Eigen::Index>(s) * m);
        ones.segment(j * m, m).setOnes();
        rows.emplace_back(ones, 1.0);
        const double mean = d.row(j).mean();
        Vector tilt = Vector::Zero(static_cast<Eigen::Index>(s) * m);
        tilt.segment(j * m, m) = (d.row(j).array() - mean).matrix().transpose();
        const double norm = tilt.norm();
        if (norm > 1e-9 * std::max(1.0, std::abs(mean))) rows.emplace_back(tilt / norm, (1.0 - mean) / norm);
    }
    prog.equalities.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(s) * m);
    prog.rhs.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        prog.equalities.row(static_cast<Eigen::Index>(r)) = rows[r].first.transpose();
        prog.rhs(static_cast<Eigen::Index>(r)) = rows[r].second;
    }
    return prog;
}

// Σ n log d + g(d): the d-only terms of the log posterior.
double discrepancy_terms(const PosteriorModel& model, const Table& d) {
    const auto& n = model.data().real_counts();
    double total = model.discrepancy_log_density(d);
    for (Eigen::Index j = 0; j < d.rows(); ++j) {
        for (Eigen::Index i = 0; i < d.cols(); ++i) {
            if (n(j, i) > 0) total += static_cast<double>(n(j, i)) * std::log(d(j, i));
        }
    }
    return total;
}

// Sum of the p̃-only terms of the log posterior: f(p̃) + Σ (n + ñ) log p̃.
double simulator_terms(const PosteriorModel& model, const Table& p_tilde) {
    const auto& n = model.data().real_counts();
    const auto& nt = model.data().sim_counts();
    double total = model.simulator_log_density(p_tilde);
    for (Eigen::Index j = 0; j < p_tilde.rows(); ++j) {
        for (Eigen::Index i = 0; i < p_tilde.cols(); ++i) {
            const auto c = n(j, i) + nt(j, i);
            if (c > 0) total += static_cast<double>(c) * std::log(p_tilde(j, i));
        }
    }
    return total;
}

double joint_residual(const PosteriorModel& model, const Table& p, const Table& p_tilde, double log_c) {
    double worst = std::max(0.0, log_c - model.log_posterior_pp(p, p_tilde));
    for (Eigen::Index j = 0; j < p.rows(); ++j) {
        worst = std::max(worst, std::abs(p.row(j).sum() - 1.0));
        worst = std::max(worst, std::abs(p_tilde.row(j).sum() - 1.0));
    }
    worst = std::max(worst, std::max(0.0, -p.minCoeff()));
    worst = std::max(worst, std::max(0.0, -p_tilde.minCoeff()));
    return worst;
}

struct AlternationState {
    Table p;
    Table p_tilde;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Alternates two convex steps in the (d, p̃) parameterisation: a discrepancy
// step (p̃ fixed, barrier solve over d) and a simulator step (d fixed, barrier
// solve over p̃). Keeping d fixed while p̃ moves lets mass return to outcomes
// whose simulator probability sits at the floor without disturbing d there.
AlternationState alternate(const PosteriorModel& model, const QueryFunctional& functional, double log_c,
                           Direction direction, Table p, Table p_tilde, const SolverOptions& opts) {
    const int s = model.designs();
    const int m = model.outcomes();
    const double tol = std::max(opts.gradient_tolerance, 10.0 * opts.barrier_gap_tolerance);

    AlternationState st;
    st.value = functional.evaluate(p);
    for (int it = 0; it < opts.max_alternations; ++it) {
        st.iterations = it + 1;
        const double before = st.value;

        // Discrepancy step.
        {
            const detail::DiscrepancyProgram prog = make_program(p_tilde, model.data(), model.discrepancy_precision());
            const double level = log_c - simulator_terms(model, p_tilde);
            const Vector d0 = flat(Table(p.cwiseQuotient(p_tilde)));
            if (prog.density(d0) - level > 0.0) {
                const Vector cost = flat(Table(functional.z.cwiseProduct(p_tilde)));
                const detail::BarrierOutcome res =
                    detail::optimize_over_level_set(prog, cost, sign_of(direction), level, d0, opts);
                Table d(s, m);
                flat(d) = res.d;
                Table candidate = d.cwiseProduct(p_tilde);
                // Remove the Newton solver's equality residue so rows sum to one exactly.
                for (Eigen::Index j = 0; j < s; ++j) candidate.row(j) /= candidate.row(j).sum();
                if (!better(st.value, functional.evaluate(candidate), direction) &&
                    model.log_posterior_pp(candidate, p_tilde) >= log_c) {
                    p = candidate;
                }
            }
        }

        // Simulator step.
        {
            const Table d = p.cwiseQuotient(p_tilde);
            const detail::DiscrepancyProgram prog = simulator_program(model, d);
            const double level = log_c - discrepancy_terms(model, d);
            const Vector x0 = flat(p_tilde);
            if (prog.density(x0) - level > 0.0) {
                const Vector cost = flat(Table(functional.z.cwiseProduct(d)));
                const detail::BarrierOutcome res =
                    detail::optimize_over_level_set(prog, cost, sign_of(direction), level, x0, opts);
                Table pt(s, m);
                flat(pt) = res.d;
                for (Eigen::Index j = 0; j < s; ++j) pt.row(j) /= pt.row(j).sum();
                Table candidate = d.cwiseProduct(pt);
                for (Eigen::Index j = 0; j < s; ++j) candidate.row(j) /= candidate.row(j).sum();
                if ((pt.array() > 0.0).all() && !better(functional.evaluate(p), functional.evaluate(candidate), direction) &&
                    model.log_posterior_pp(candidate, pt) >= log_c) {
                    p = candidate;
                    p_tilde = pt;
                }
            }
        }

        // Both steps end on the boundary of the level set. Moving p̃ with p
        // fixed to raise the log posterior restores room for the next round.
        {
            const detail::ValueFn value = [&](const Table& pt) { return model.log_posterior_pp(p, pt); };
            const detail::GradFn grad = [&](const Table& pt, Table& g) {
                Table gp;
                model.gradient_pp(p, pt, gp, g);
            };
            Table pt = p_tilde;
            SolverOptions inner = opts;
            inner.max_iterations = std::min(opts.max_iterations, 2000);
            detail::spg_maximize(pt, value, grad, inner);
            if (model.log_posterior_pp(p, pt) >= model.log_posterior_pp(p, p_tilde)) p_tilde = pt;
        }

        st.value = functional.evaluate(p);
        if (std::abs(st.value - before) < tol) {
            st.converged = true;
            break;
        }
    }
    st.p = std::move(p);
    st.p_tilde = std::move(p_tilde);
    return st;
}

// Joint log-barrier Newton over x = (p, p̃) with the row sums as equalities.
// The block steps above can stall where only a simultaneous move of p and p̃
// improves the bound; second-order steps in both blocks get past that. The
// start is pulled toward the mode until strictly inside the level set.
void joint_polish(const PosteriorModel& model, const QueryFunctional& functional, double log_c,
                  Direction direction, const ModeResult& mode, AlternationState& st, const SolverOptions& opts) {
    const int s = model.designs();
    const int m = model.outcomes();
    const Eigen::Index k = static_cast<Eigen::Index>(s) * m;

    auto split = [&](const Vector& x, Table& p, Table& pt) {
        p.resize(s, m);
        pt.resize(s, m);
        flat(p) = x.head(k);
        flat(pt) = x.tail(k);
    };
    Vector centre(2 * k), x(2 * k);
    centre << flat(mode.p_star.values), flat(mode.p_tilde_star.values);
    x << flat(st.p), flat(st.p_tilde);
    // Strictly positive reference: the mode can sit on the simplex floor.
    centre = 0.999 * centre + 0.001 * Vector::Constant(2 * k, 1.0 / m);

    Table p, pt;
    const double room = model.log_posterior_pp(mode.p_star.values, mode.p_tilde_star.values) - log_c;
    double w = 1e-6;
    for (;; w *= 4.0) {
        if (w >= 1.0) return;
        const Vector y = (1.0 - w) * x + w * centre;
        split(y, p, pt);
        if ((y.array() > 0.0).all() && model.log_posterior_pp(p, pt) > log_c + 1e-6 * room) {
            x = y;
            break;
        }
    }

    Matrix A = Matrix::Zero(2 * s, 2 * k);
    for (int r = 0; r < 2 * s; ++r) A.block(r, static_cast<Eigen::Index>(r) * m, 1, m).setOnes();
    const Vector b = Vector::Ones(2 * s);
    Vector cost = Vector::Zero(2 * k);
    cost.head(k) = sign_of(direction) * flat(functional.z);
    const double inequalities = static_cast<double>(2 * k) + 1.0;
    const double scale = std::max(1.0, functional.z.cwiseAbs().maxCoeff());

    double t = inequalities / (1e-3 * scale);
    detail::Objective F;
    F.value = [&](const Vector& y) {
        double barrier = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            if (!(y(i) > 0.0)) return std::numeric_limits<double>::infinity();
            barrier -= std::log(y(i));
        }
        Table a, c;
        split(y, a, c);
        const double slack = model.log_posterior_pp(a, c) - log_c;
        if (!(slack > 0.0)) return std::numeric_limits<double>::infinity();
        return t * cost.dot(y) - std::log(slack) + barrier;
    };
    F.derivatives = [&](const Vector& y, Vector& g, Matrix& H) {
        Table a, c, ga, gc;
        split(y, a, c);
        const double slack = model.log_posterior_pp(a, c) - log_c;
        model.gradient_pp(a, c, ga, gc);
        Vector grad(2 * k);
        grad << flat(ga), flat(gc);
        model.hessian_pp(a, c, H);
        H = -H / slack;
        H.noalias() += (grad * grad.transpose()) / (slack * slack);
        H.diagonal().array() += y.array().square().inverse();
        g = t * cost - grad / slack;
        g.array() -= y.array().inverse();
    };

    int steps = 0;
    for (int round = 0; round < opts.barrier_max_rounds; ++round) {
        bool centred = false;
        steps += detail::newton_equality(x, F, A, b, 100, centred);
        if (inequalities / t < opts.barrier_gap_tolerance * scale) break;
        t /= opts.barrier_shrink;
    }

    split(x, p, pt);
    for (Eigen::Index j = 0; j < s; ++j) {
        p.row(j) /= p.row(j).sum();
        pt.row(j) /= pt.row(j).sum();
    }
    const double value = functional.evaluate(p);
    if (model.log_posterior_pp(p, pt) >= log_c && better(value, st.value, direction)) {
        st.p = std::move(p);
        st.p_tilde = std::move(pt);
        st.value = value;
    }
    st.iterations += steps > 0 ? 1 : 0;
}

}  // namespace

QueryFunctional indicator_functional(int designs, int outcomes, int design, int outcome) {
    if (design < 0 || design >= designs || outcome < 0 || outcome >= outcomes) {
        throw std::out_of_range("indicator functional index out of range");
    }
    QueryFunctional f;
    f.z = Table::Zero(designs, outcomes);
    f.z(design, outcome) = 1.0;
    f.description = "P(outcome " + std::to_string(outcome) + " | design " + std::to_string(design) + ")";
    return f;
}

QueryFunctional expectation_functional(int designs, const std::vector<double>& values, int design) {
    if (design < 0 || design >= designs) throw std::out_of_range("design index out of range");
    QueryFunctional f;
    f.z = Table::Zero(designs, static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) f.z(design, static_cast<Eigen::Index>(i)) = values[i];
    f.description = "E[value | design " + std::to_string(design) + "]";
    return f;
}

ThresholdSpec ThresholdSpec::from_level(double q) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("confidence level q must lie in (0, 1)");
    ThresholdSpec t;
    t.q_ = q;
    return t;
}

ThresholdSpec ThresholdSpec::from_radius(double ell) {
    if (!(ell > 0.0) || !std::isfinite(ell)) throw std::invalid_argument("radius ell must be positive");
    ThresholdSpec t;
    t.ell_ = ell;
    return t;
}

double ThresholdSpec::radius() const {
    if (ell_) return *ell_;
    if (q_) return normal_quantile(*q_);
    throw std::logic_error("empty threshold specification");
}

const char* to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::max_iter: return "max_iter";
        case SolveStatus::infeasible: return "infeasible";
    }
    return "unknown";
}

double threshold_from_spec(const ThresholdSpec& spec, double log_post_star) {
    const double ell = spec.radius();
    return log_post_star - 0.5 * ell * ell;
}

FixedSimMode fixed_sim_mode(const Table& pi_tilde, const ProblemData& data, const GaussianPriorSpec& prior,
                            const SolverOptions& opts) {
    opts.validate();
    if (pi_tilde.rows() != data.designs() || pi_tilde.cols() != data.outcomes()) {
        throw std::invalid_argument("pi_tilde shape does not match the data");
    }
    if (!(pi_tilde.array() > 0.0).all() || !validate_distribution(pi_tilde)) {
        throw std::invalid_argument("pi_tilde must be a strictly positive distribution per design");
    }
    const PosteriorModel model(data, prior);
    const detail::DiscrepancyProgram prog = make_program(pi_tilde, data, model.discrepancy_precision());
    const detail::BarrierOutcome res = detail::maximize_density(prog, opts);
    FixedSimMode out;
    out.d.resize(data.designs(), data.outcomes());
    flat(out.d) = res.d;
    out.value = prog.density(res.d);
    return out;
}

BoundSolution solve_bound_fixed_sim(const Table& pi_tilde, const ProblemData& data,
                                    const GaussianPriorSpec& prior, const QueryFunctional& functional,
                                    double log_c, Direction direction, const SolverOptions& opts) {
    const FixedSimMode mode = fixed_sim_mode(pi_tilde, data, prior, opts);
    check_functional(functional, data.designs(), data.outcomes());

    const PosteriorModel model(data, prior);
    const detail::DiscrepancyProgram prog = make_program(pi_tilde, data, model.discrepancy_precision());

    BoundSolution out;
    out.p_tilde = pi_tilde;
    if (log_c > mode.value + kInfeasibleSlack) {
        out.status = SolveStatus::infeasible;
        out.value = std::numeric_limits<double>::quiet_NaN();
        return out;
    }

    Vector d = flat(mode.d);
    int steps = 0;
    bool converged = true;
    if (mode.value - log_c > 0.0) {
        const Vector cost = flat(Table(functional.z.cwiseProduct(pi_tilde)));
        const detail::BarrierOutcome res =
            detail::optimize_over_level_set(prog, cost, sign_of(direction), log_c, d, opts);
        d = res.d;
        steps = res.newton_steps;
        converged = res.converged;
    }
    Table dt(data.designs(), data.outcomes());
    flat(dt) = d;
    for (Eigen::Index j = 0; j < dt.rows(); ++j) dt.row(j) /= dt.row(j).dot(pi_tilde.row(j));
    d = flat(dt);
    out.p = dt.cwiseProduct(pi_tilde);
    out.value = functional.evaluate(out.p);
    out.iterations = steps;
    out.status = converged ? SolveStatus::optimal : SolveStatus::max_iter;
    out.feasibility_residual = std::max({prog.equality_residual(d), std::max(0.0, log_c - prog.density(d)),
                                         std::max(0.0, -d.minCoeff())});
    return out;
}

BoundSolution solve_bound(const PosteriorModel& model, const QueryFunctional& functional, double log_c,
                          Direction direction, const SolverOptions& opts) {
    const ModeResult mode = find_posterior_mode(model, opts);
    return solve_bound(model, mode, functional, log_c, direction, opts);
}

BoundSolution solve_bound(const PosteriorModel& model, const ModeResult& mode,
                          const QueryFunctional& functional, double log_c, Direction direction,
                          const SolverOptions& opts) {
    opts.validate();
    check_functional(functional, model.designs(), model.outcomes());

    BoundSolution out;
    if (log_c > mode.log_post_star + kInfeasibleSlack) {
        out.status = SolveStatus::infeasible;
        out.value = std::numeric_limits<double>::quiet_NaN();
        return out;
    }

    const Table& p0 = mode.p_star.values;
    const Table& pt0 = mode.p_tilde_star.values;
    AlternationState best = alternate(model, functional, log_c, direction, p0, pt0, opts);
    joint_polish(model, functional, log_c, direction, mode, best, opts);

    // The level set need not be convex for small counts, and block steps can
    // stall where only a joint move helps. Further starts come from posterior
    // draws strictly inside the set.
    const int extra = opts.restarts - 1;
    const double margin = 0.1 * (mode.log_post_star - log_c);
    if (extra > 0 && margin > 0.0) {
        SamplerOptions so;
        so.n_draws = 10 * extra;
        so.burn_in = 100;
        so.thin = 2;
        so.seed = mix_seed(opts.seed, 0xb0d);
        const Chain chain = mh_sample(model, mode, so);
        int used = 0;
        int total = best.iterations;
        for (std::size_t k = 0; k < chain.size() && used < extra; k += 10) {
            std::size_t pick = k;
            while (pick < std::min(chain.size(), k + 10) && chain.log_posts[pick] < log_c + margin) ++pick;
            if (pick == std::min(chain.size(), k + 10)) continue;
            ++used;
            AlternationState alt = alternate(model, functional, log_c, direction, chain.p[pick], chain.p_tilde[pick], opts);
            joint_polish(model, functional, log_c, direction, mode, alt, opts);
            total += alt.iterations;
            if (alt.converged && (!best.converged || better(alt.value, best.value, direction))) best = std::move(alt);
        }
        best.iterations = total;
    }

    out.value = best.value;
    out.iterations = best.iterations;
    out.status = best.converged ? SolveStatus::optimal : SolveStatus::max_iter;
    out.feasibility_residual = joint_residual(model, best.p, best.p_tilde, log_c);
    out.p = std::move(best.p);
    out.p_tilde = std::move(best.p_tilde);
    return out;
}

BoundResult bound_interval(const PosteriorModel& model, const QueryFunctional& functional,
                           const ThresholdSpec& spec, const SolverOptions& opts) {
    const ModeResult mode = find_posterior_mode(model, opts);
    return bound_interval(model, mode, functional, spec, opts);
}

BoundResult bound_interval(const PosteriorModel& model, const ModeResult& mode,
                           const QueryFunctional& functional, const ThresholdSpec& spec,
                           const SolverOptions& opts) {
    BoundResult r;
    r.ell = spec.radius();
    r.q = spec.level();
    r.log_c = threshold_from_spec(spec, mode.log_post_star);
    r.mode_value = functional.evaluate(mode.p_star.values);

    const BoundSolution lo = solve_bound(model, mode, functional, r.log_c, Direction::minimize, opts);
    const BoundSolution hi = solve_bound(model, mode, functional, r.log_c, Direction::maximize, opts);
    r.lower = lo.value;
    r.upper = hi.value;
    r.lower_status = lo.status;
    r.upper_status = hi.status;
    r.lower_iterations = lo.iterations;
    r.upper_iterations = hi.iterations;
    r.feasibility_residual = std::max(lo.feasibility_residual, hi.feasibility_residual);
    return r;
}

ConvexityProbeResult convexity_probe(const PosteriorModel& model, double log_c, int n_pairs, std::uint64_t seed) {
    ConvexityProbeResult out;
    if (n_pairs <= 0) return out;
    const int s = model.designs();

    // Posterior draws inside the level set; several short chains until enough are found.
    std::vector<Table> points;
    constexpr int kMaxChains = 20;
    for (int attempt = 0; attempt < kMaxChains && static_cast<int>(points.size()) < n_pairs; ++attempt) {
        SamplerOptions so;
        so.n_draws = std::max(2 * n_pairs, 200);
        so.burn_in = 1000;
        so.thin = 5;
        so.seed = mix_seed(seed, static_cast<std::uint64_t>(attempt));
        const Chain chain = mh_sample(model, so);
        for (std::size_t k = 0; k < chain.size() && static_cast<int>(points.size()) < n_pairs; ++k) {
            if (chain.log_posts[k] >= log_c) {
                Table x(2 * s, model.outcomes());
                x.topRows(s) = chain.p[k];
                x.bottomRows(s) = chain.p_tilde[k];
                points.push_back(std::move(x));
            }
        }
    }
    out.feasible_points = static_cast<int>(points.size());
    out.degenerate = out.feasible_points < n_pairs;
    if (points.size() < 2) {
        out.degenerate = true;
        return out;
    }

    Rng rng = make_rng(seed, 0xc0ffee);
    std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
    int passed = 0;
    for (int k = 0; k < n_pairs; ++k) {
        const std::size_t a = pick(rng);
        std::size_t b = pick(rng);
        while (b == a) b = pick(rng);
        const Table mid = 0.5 * (points[a] + points[b]);
        if (model.log_posterior_pp(mid.topRows(s), mid.bottomRows(s)) >= log_c) ++passed;
    }
    out.pairs_tested = n_pairs;
    out.pass_fraction = static_cast<double>(passed) / n_pairs;
    return out;
}

}  // namespace simcal
