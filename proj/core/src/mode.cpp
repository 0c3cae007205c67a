#include "simcal/mode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "simcal/random.hpp"
#include "simcal/simplex.hpp"
#include "barrier.hpp"
#include "spg.hpp"

namespace simcal {

void SolverOptions::validate() const {
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
    if (!(gradient_tolerance > 0.0)) throw std::invalid_argument("gradient_tolerance must be positive");
    if (restarts < 1) throw std::invalid_argument("restarts must be at least 1");
    if (!(interior_floor > 0.0) || interior_floor > 1e-3) {
        throw std::invalid_argument("interior_floor must lie in (0, 1e-3]");
    }
    if (step_rule == StepRule::fixed && !(fixed_step > 0.0)) {
        throw std::invalid_argument("fixed_step must be positive");
    }
    if (!(barrier_mu0 > 0.0) || !(barrier_shrink > 0.0 && barrier_shrink < 1.0) ||
        !(barrier_gap_tolerance > 0.0) || barrier_max_rounds < 1 || max_alternations < 1) {
        throw std::invalid_argument("invalid barrier schedule");
    }
}

void smoothed_frequencies(const ProblemData& data, Table& p, Table& p_tilde) {
    const int s = data.designs();
    const int m = data.outcomes();
    p.resize(s, m);
    p_tilde.resize(s, m);
    for (int j = 0; j < s; ++j) {
        const double nj = static_cast<double>(data.real_total(j));
        const double ntj = static_cast<double>(data.sim_total(j));
        for (int i = 0; i < m; ++i) {
            p(j, i) = (static_cast<double>(data.real_counts()(j, i)) + 1.0) / (nj + m);
            p_tilde(j, i) = (static_cast<double>(data.sim_counts()(j, i)) + 1.0) / (ntj + m);
        }
    }
}

namespace {

struct Stacked {
    const PosteriorModel& model;
    int s;

    double value(const Table& x) const {
        return model.log_posterior_pp(x.topRows(s), x.bottomRows(s));
    }
    void grad(const Table& x, Table& g) const {
        Table gp, gpt;
        model.gradient_pp(x.topRows(s), x.bottomRows(s), gp, gpt);
        g.resize(x.rows(), x.cols());
        g.topRows(s) = gp;
        g.bottomRows(s) = gpt;
    }
};

// Barrier Newton on −L over x = (p, p̃) with the row sums as equalities. SPG
// crawls when counts differ by orders of magnitude; a few Newton steps from
// its end point finish the job. Cells pinned at the floor stay near zero.
bool newton_polish(const PosteriorModel& model, Table& x, double floor) {
    const int s = model.designs();
    const int m = model.outcomes();
    const Eigen::Index k = static_cast<Eigen::Index>(s) * m;
    auto split = [&](const Vector& v, Table& p, Table& pt) {
        p.resize(s, m);
        pt.resize(s, m);
        flat(p) = v.head(k);
        flat(pt) = v.tail(k);
    };
    Vector v(2 * k);
    v << flat(Table(x.topRows(s))), flat(Table(x.bottomRows(s)));
    // SPG can stall on a face; start the barrier strictly inside.
    v = (0.999 * v.array() + 0.001 / m).matrix().cwiseMax(floor);

    Matrix A = Matrix::Zero(2 * s, 2 * k);
    for (int r = 0; r < 2 * s; ++r) A.block(r, static_cast<Eigen::Index>(r) * m, 1, m).setOnes();
    const Vector b = Vector::Ones(2 * s);

    double t = 1e4;
    detail::Objective F;
    F.value = [&](const Vector& y) {
        double barrier = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            if (!(y(i) > 0.0)) return std::numeric_limits<double>::infinity();
            barrier -= std::log(y(i));
        }
        Table p, pt;
        split(y, p, pt);
        const double L = model.log_posterior_pp(p, pt);
        if (!std::isfinite(L)) return std::numeric_limits<double>::infinity();
        return -t * L + barrier;
    };
    F.derivatives = [&](const Vector& y, Vector& g, Matrix& H) {
        Table p, pt, gp, gpt;
        split(y, p, pt);
        model.gradient_pp(p, pt, gp, gpt);
        model.hessian_pp(p, pt, H);
        g.resize(2 * k);
        g << flat(gp), flat(gpt);
        g = -t * g;
        g.array() -= y.array().inverse();
        H = -t * H;
        H.diagonal().array() += y.array().square().inverse();
    };

    // Past a relative gap of 1e-10 the barrier problem is dominated by rounding.
    const double scale = std::max(1.0, std::abs(model.log_posterior_pp(x.topRows(s), x.bottomRows(s))));
    bool centred = false;
    for (; t < 1e15; t *= 10.0) {
        // From a start stalled on a face the first centring can need hundreds of steps.
        detail::newton_equality(v, F, A, b, t == 1e4 ? 500 : 50, centred);
        if (2.0 * static_cast<double>(k) / t < 1e-10 * scale) break;
    }
    Table p, pt;
    split(v, p, pt);
    for (Eigen::Index j = 0; j < s; ++j) {
        p.row(j) /= p.row(j).sum();
        pt.row(j) /= pt.row(j).sum();
    }
    if (!(model.log_posterior_pp(p, pt) > model.log_posterior_pp(x.topRows(s), x.bottomRows(s)))) return centred;
    x.topRows(s) = p;
    x.bottomRows(s) = pt;
    return centred;
}

}  // namespace

ModeResult find_posterior_mode(const PosteriorModel& model, const SolverOptions& opts) {
    opts.validate();
    const int s = model.designs();
    const int m = model.outcomes();
    if (m < 2 || s < 1) throw std::invalid_argument("model has no feasible region");

    Table p0, pt0;
    smoothed_frequencies(model.data(), p0, pt0);
    Table start(2 * s, m);
    start.topRows(s) = p0;
    start.bottomRows(s) = pt0;

    const Stacked fn{model, s};
    const detail::ValueFn value = [&](const Table& x) { return fn.value(x); };
    const detail::GradFn grad = [&](const Table& x, Table& g) { fn.grad(x, g); };

    ModeResult best;
    best.log_post_star = -std::numeric_limits<double>::infinity();
    Table best_x;
    int total_iterations = 0;

    for (int r = 0; r < opts.restarts; ++r) {
        Table x = start;
        if (r > 0) {
            Rng rng = make_rng(opts.seed, static_cast<std::uint64_t>(r));
            x = 0.5 * start + 0.5 * dirichlet_rows(2 * s, m, rng);
        }
        project_rows_to_simplex(x, opts.interior_floor);
        if (!std::isfinite(value(x))) continue;

        const detail::SpgResult res = detail::spg_maximize(x, value, grad, opts);
        total_iterations += res.iterations;
        // Strict improvement keeps the lowest restart index on ties.
        if (res.value > best.log_post_star) {
            best.log_post_star = res.value;
            best.converged = res.converged;
            best.kkt_residual = res.residual;
            best_x = x;
        }
    }
    if (best_x.size() == 0) throw std::runtime_error("log posterior is -inf at every starting point");
    if (newton_polish(model, best_x, opts.interior_floor)) best.converged = true;

    best.p_star.values = best_x.topRows(s);
    best.p_tilde_star.values = best_x.bottomRows(s);
    best.d_star.values = best.p_star.values.cwiseQuotient(best.p_tilde_star.values);
    best.log_post_star = model.log_posterior(best.d_star.values, best.p_tilde_star.values);
    best.iterations = total_iterations;
    return best;
}

}  // namespace simcal
