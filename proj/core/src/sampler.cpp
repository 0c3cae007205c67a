#include "simcal/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "simcal/mode.hpp"
#include "simcal/random.hpp"

namespace simcal {
namespace {

constexpr int kAdaptBatch = 50;

// Softmax of (y, 0): inverse additive log-ratio transform.
void alr_inverse(const Vector& y, Eigen::Ref<Vector> row) {
    const double top = std::max(0.0, y.maxCoeff());
    double total = std::exp(-top);
    for (Eigen::Index i = 0; i < y.size(); ++i) total += std::exp(y(i) - top);
    for (Eigen::Index i = 0; i < y.size(); ++i) row(i) = std::exp(y(i) - top) / total;
    row(y.size()) = std::exp(-top) / total;
}

double log_jacobian(const Eigen::Ref<const Vector>& row) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < row.size(); ++i) sum += std::log(row(i));
    return sum;
}

}  // namespace

Chain mh_sample(const PosteriorModel& model, int n_draws, int burn_in, double step_scale, std::uint64_t seed) {
    SamplerOptions opts;
    opts.n_draws = n_draws;
    opts.burn_in = burn_in;
    opts.step_scale = step_scale;
    opts.seed = seed;
    return mh_sample(model, opts);
}

Chain mh_sample(const PosteriorModel& model, const SamplerOptions& opts) {
    if (opts.n_draws < 1) throw std::invalid_argument("n_draws must be at least 1");
    if (opts.burn_in < 0 || opts.thin < 1 || !(opts.step_scale >= 0.0)) {
        throw std::invalid_argument("invalid sampler settings");
    }
    SolverOptions mode_opts;
    mode_opts.seed = opts.seed;
    ModeResult mode;
    try {
        mode = find_posterior_mode(model, mode_opts);
    } catch (const std::runtime_error&) {
        throw std::invalid_argument("posterior is -inf everywhere; nothing to sample");
    }
    return mh_sample(model, mode, opts);
}

Chain mh_sample(const PosteriorModel& model, const ModeResult& mode, const SamplerOptions& opts) {
    if (opts.n_draws < 1) throw std::invalid_argument("n_draws must be at least 1");
    if (opts.burn_in < 0 || opts.thin < 1 || !(opts.step_scale >= 0.0)) {
        throw std::invalid_argument("invalid sampler settings");
    }
    if (!std::isfinite(mode.log_post_star)) {
        throw std::invalid_argument("posterior is -inf everywhere; nothing to sample");
    }
    const int s = model.designs();
    const int m = model.outcomes();

    Table x(2 * s, m);
    x.topRows(s) = mode.p_star.values;
    x.bottomRows(s) = mode.p_tilde_star.values;
    auto log_post = [&](const Table& state) {
        return model.log_posterior_pp(state.topRows(s), state.bottomRows(s));
    };
    double current = log_post(x);

    Rng rng = make_rng(opts.seed, 0x5a3d);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    std::vector<double> scale(static_cast<std::size_t>(2 * s), opts.step_scale);
    std::vector<int> batch_accepts(scale.size(), 0);

    Chain chain;
    chain.seed = opts.seed;
    chain.p.reserve(static_cast<std::size_t>(opts.n_draws));
    chain.p_tilde.reserve(static_cast<std::size_t>(opts.n_draws));
    chain.log_posts.reserve(static_cast<std::size_t>(opts.n_draws));

    long long proposals = 0;
    long long accepts = 0;
    Vector y(m - 1);
    Vector old_row(m);
    Table proposal = x;

    const long long total_sweeps = static_cast<long long>(opts.burn_in) +
                                   static_cast<long long>(opts.n_draws) * opts.thin;
    for (long long sweep = 0; sweep < total_sweeps; ++sweep) {
        const bool burning = sweep < opts.burn_in;
        for (int r = 0; r < 2 * s; ++r) {
            old_row = x.row(r).transpose();
            for (int i = 0; i < m - 1; ++i) {
                y(i) = std::log(old_row(i) / old_row(m - 1)) + scale[static_cast<std::size_t>(r)] * normal(rng);
            }
            Vector new_row(m);
            alr_inverse(y, new_row);
            proposal.row(r) = new_row.transpose();

            const double candidate = log_post(proposal);
            const double log_ratio = candidate - current + log_jacobian(new_row) - log_jacobian(old_row);
            const bool accept = std::isfinite(candidate) && std::isfinite(log_ratio) &&
                                (log_ratio >= 0.0 || uniform(rng) < std::exp(log_ratio));
            if (accept) {
                x.row(r) = proposal.row(r);
                current = candidate;
            } else {
                proposal.row(r) = x.row(r);
            }
            if (burning) {
                batch_accepts[static_cast<std::size_t>(r)] += accept ? 1 : 0;
            } else {
                ++proposals;
                accepts += accept ? 1 : 0;
            }
        }

        if (burning && opts.adapt && (sweep + 1) % kAdaptBatch == 0) {
            for (std::size_t r = 0; r < scale.size(); ++r) {
                const double rate = static_cast<double>(batch_accepts[r]) / kAdaptBatch;
                scale[r] *= std::exp(rate - opts.target_acceptance);
                batch_accepts[r] = 0;
            }
        }
        if (!burning && (sweep - opts.burn_in + 1) % opts.thin == 0) {
            chain.p.emplace_back(x.topRows(s));
            chain.p_tilde.emplace_back(x.bottomRows(s));
            chain.log_posts.push_back(current);
        }
    }
    chain.acceptance_rate = proposals > 0 ? static_cast<double>(accepts) / static_cast<double>(proposals) : 0.0;
    return chain;
}

double posterior_quantile(const Chain& chain, const QueryFunctional& functional, double alpha) {
    if (chain.size() == 0) throw std::invalid_argument("empty chain");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    std::vector<double> values;
    values.reserve(chain.size());
    for (const Table& p : chain.p) values.push_back(functional.evaluate(p));
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * alpha;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

double effective_sample_size(const std::vector<double>& trace) {
    const auto n = trace.size();
    if (n < 4) return static_cast<double>(n);
    double mean = 0.0;
    for (double v : trace) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : trace) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    if (var <= 0.0) return static_cast<double>(n);

    auto rho = [&](std::size_t lag) {
        double acc = 0.0;
        for (std::size_t t = 0; t + lag < n; ++t) acc += (trace[t] - mean) * (trace[t + lag] - mean);
        return acc / (static_cast<double>(n) * var);
    };
    double sum = 0.0;
    for (std::size_t lag = 1; lag + 1 < n; lag += 2) {
        const double pair = rho(lag) + rho(lag + 1);
        if (pair <= 0.0) break;
        sum += pair;
    }
    return static_cast<double>(n) / (1.0 + 2.0 * sum);
}

void write_chain_csv(const Chain& chain, std::ostream& out) {
    if (chain.size() == 0) return;
    const auto s = chain.p.front().rows();
    const auto m = chain.p.front().cols();
    out << "draw";
    for (Eigen::Index j = 0; j < s; ++j)
        for (Eigen::Index i = 0; i < m; ++i) out << ",p_" << j << '_' << i;
    for (Eigen::Index j = 0; j < s; ++j)
        for (Eigen::Index i = 0; i < m; ++i) out << ",pt_" << j << '_' << i;
    out << ",log_post\n";
    const auto old_precision = out.precision(17);
    for (std::size_t k = 0; k < chain.size(); ++k) {
        out << k;
        for (Eigen::Index j = 0; j < s; ++j)
            for (Eigen::Index i = 0; i < m; ++i) out << ',' << chain.p[k](j, i);
        for (Eigen::Index j = 0; j < s; ++j)
            for (Eigen::Index i = 0; i < m; ++i) out << ',' << chain.p_tilde[k](j, i);
        out << ',' << chain.log_posts[k] << '\n';
    }
    out.precision(old_precision);
}

}  // namespace simcal
