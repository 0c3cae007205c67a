#include "simcal/commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "simcal/normal.hpp"
#include "simcal/parallel.hpp"
#include "simcal/random.hpp"

#ifndef SIMCAL_VERSION
#define SIMCAL_VERSION "unknown"
#endif

namespace simcal::cli {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

ExperimentReport start_report(const RunConfig& cfg, const char* command) {
    ExperimentReport r;
    r.command = command;
    r.seed = cfg.seed;
    r.metadata.version = SIMCAL_VERSION;
    r.metadata.threads = cfg.threads;
    return r;
}

fs::path output_dir(const RunConfig& cfg) {
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    return dir;
}

std::ofstream open_output(const RunConfig& cfg, ExperimentReport& report, const std::string& name) {
    const fs::path path = output_dir(cfg) / name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    report.outputs.push_back(name);
    return out;
}

void finish_report(const RunConfig& cfg, ExperimentReport& report, Clock::time_point start) {
    report.metadata.timestamp = utc_timestamp();
    report.metadata.runtime_seconds = std::chrono::duration<double>(Clock::now() - start).count();
    report.outputs.push_back("report.json");
    const fs::path path = output_dir(cfg) / "report.json";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << report_to_json(report);
}

std::string combined_status(const BoundResult& r) {
    if (r.optimal()) return "optimal";
    if (r.lower_status == SolveStatus::infeasible || r.upper_status == SolveStatus::infeasible) return "infeasible";
    return "max_iter";
}

std::vector<FunctionalSpec> functional_specs(const RunConfig& cfg) {
    if (!cfg.functionals.empty()) return cfg.functionals;
    return {FunctionalSpec{}};  // per-outcome indicators at every design
}

struct LoadedProblem {
    ProblemData data;
    std::vector<DesignPoint> designs;
};

// Data files when configured, otherwise one draw from the synthetic scheme.
LoadedProblem problem_for(const RunConfig& cfg) {
    if (cfg.designs_path) {
        std::vector<DesignPoint> designs;
        ProblemData data = load_configured_problem(cfg, &designs);
        return {std::move(data), std::move(designs)};
    }
    if (cfg.scheme) {
        std::vector<DesignPoint> designs;
        for (std::size_t j = 0; j < cfg.scheme->coords.size(); ++j) {
            designs.push_back({static_cast<std::int64_t>(j), cfg.scheme->coords[j]});
        }
        return {cfg.scheme->problem(cfg.experiment.n, cfg.seed), std::move(designs)};
    }
    throw ConfigError("config: this command needs /data files or a /scheme");
}

IntervalRecord error_record(const std::string& name, std::optional<std::int64_t> design_id, const std::string& what) {
    IntervalRecord r;
    r.design_id = design_id;
    r.functional = name;
    r.lower = r.upper = std::numeric_limits<double>::quiet_NaN();
    r.status = r.lower_status = r.upper_status = "error";
    r.message = what;
    return r;
}

const SchemeConfig& require_scheme(const RunConfig& cfg) {
    if (!cfg.scheme) throw ConfigError("config: this command needs a /scheme block");
    return *cfg.scheme;
}

struct ReplicationBounds {
    BoundResult primary;
    std::optional<BoundResult> secondary;
    double plug_in = 0.0;
};

ReplicationBounds replicate(const RunConfig& cfg, const SchemeConfig& scheme, const std::vector<NamedFunctional>& fs,
                            std::int64_t n, std::uint64_t seed) {
    const ProblemData data = scheme.problem(n, seed);
    const PosteriorModel model(data, cfg.prior);
    SolverOptions opts = cfg.solver;
    opts.seed = seed;
    const ModeResult mode = find_posterior_mode(model, opts);
    ReplicationBounds out;
    out.primary = bound_interval(model, mode, fs[0].functional, cfg.threshold, opts);
    if (fs.size() > 1) out.secondary = bound_interval(model, mode, fs[1].functional, cfg.threshold, opts);
    out.plug_in = plug_in_estimate(fs[0].functional, data);
    return out;
}

double binomial_se(double p, int n) { return std::sqrt(std::max(p * (1.0 - p), 0.0) / std::max(n, 1)); }

}  // namespace

std::vector<NamedFunctional> resolve_functionals(const std::vector<FunctionalSpec>& specs, int s, int m) {
    std::vector<NamedFunctional> out;
    const auto design_range = [&](const FunctionalSpec& spec) {
        std::vector<int> rows;
        if (spec.design) {
            if (*spec.design < 0 || *spec.design >= s) {
                throw ConfigError("config /functionals: design index " + std::to_string(*spec.design) +
                                  " out of range");
            }
            rows.push_back(*spec.design);
        } else {
            for (int j = 0; j < s; ++j) rows.push_back(j);
        }
        return rows;
    };
    for (std::size_t k = 0; k < specs.size(); ++k) {
        const FunctionalSpec& spec = specs[k];
        switch (spec.kind) {
            case FunctionalSpec::Kind::indicators:
                for (int j : design_range(spec)) {
                    for (int i = 0; i < m; ++i) {
                        NamedFunctional nf{indicator_functional(s, m, j, i), j};
                        nf.functional.description = "P(outcome " + std::to_string(i) + ")";
                        out.push_back(std::move(nf));
                    }
                }
                break;
            case FunctionalSpec::Kind::expectation:
                if (static_cast<int>(spec.values.size()) != m) {
                    throw ConfigError("config /functionals/" + std::to_string(k) + "/values: expected " +
                                      std::to_string(m) + " values");
                }
                for (int j : design_range(spec)) {
                    NamedFunctional nf{expectation_functional(s, spec.values, j), j};
                    nf.functional.description = spec.name.empty() ? "E[value]" : spec.name;
                    out.push_back(std::move(nf));
                }
                break;
            case FunctionalSpec::Kind::explicit_z: {
                if (spec.z.rows() != s || spec.z.cols() != m) {
                    throw ConfigError("config /functionals/" + std::to_string(k) + "/z: expected " +
                                      std::to_string(s) + "x" + std::to_string(m));
                }
                NamedFunctional nf;
                nf.functional.z = spec.z;
                nf.functional.description = spec.name.empty() ? "functional " + std::to_string(k) : spec.name;
                out.push_back(std::move(nf));
                break;
            }
        }
    }
    return out;
}

ProblemData SchemeConfig::problem(std::int64_t n_total, std::uint64_t seed) const {
    SyntheticScheme s = scheme;
    s.n_total = n_total;
    return ProblemData(coords, sample_multinomial_dataset(s, seed), sim_counts);
}

double plug_in_estimate(const QueryFunctional& f, const ProblemData& data) {
    double total = 0.0;
    for (int j = 0; j < data.designs(); ++j) {
        const auto nj = data.real_total(j);
        if (nj == 0) continue;
        for (int i = 0; i < data.outcomes(); ++i) {
            total += f.z(j, i) * static_cast<double>(data.real_counts()(j, i)) / static_cast<double>(nj);
        }
    }
    return total;
}

double target_slope(const SyntheticScheme& scheme, const QueryFunctional& f, double ell) {
    double var = 0.0;
    for (Eigen::Index j = 0; j < scheme.pi.rows(); ++j) {
        const double mean = f.z.row(j).cwiseProduct(scheme.pi.row(j)).sum();
        const double second = f.z.row(j).array().square().matrix().cwiseProduct(scheme.pi.row(j)).sum();
        const double v = second - mean * mean;
        if (v > 0.0) var += v / scheme.xi[static_cast<std::size_t>(j)];
    }
    return ell * std::sqrt(var);
}

IntervalRecord interval_record(const BoundResult& r, const std::string& functional,
                               std::optional<std::int64_t> design_id) {
    IntervalRecord rec;
    rec.design_id = design_id;
    rec.functional = functional;
    rec.q = r.q;
    rec.ell = r.ell;
    rec.log_c = r.log_c;
    rec.lower = r.lower;
    rec.upper = r.upper;
    rec.mode_value = r.mode_value;
    rec.feasibility_residual = r.feasibility_residual;
    rec.status = combined_status(r);
    rec.lower_status = to_string(r.lower_status);
    rec.upper_status = to_string(r.upper_status);
    rec.iterations = r.lower_iterations + r.upper_iterations;
    return rec;
}

ExperimentReport cmd_calibrate(const RunConfig& cfg) {
    const auto start = Clock::now();
    ExperimentReport report = start_report(cfg, "calibrate");
    const LoadedProblem lp = problem_for(cfg);
    const PosteriorModel model(lp.data, cfg.prior);
    const auto functionals = resolve_functionals(functional_specs(cfg), model.designs(), model.outcomes());
    const ModeResult mode = find_posterior_mode(model, cfg.solver);

    report.intervals = parallel_map(static_cast<int>(functionals.size()), cfg.threads, [&](int k) {
        const NamedFunctional& nf = functionals[static_cast<std::size_t>(k)];
        std::optional<std::int64_t> id;
        if (nf.design) id = lp.designs[static_cast<std::size_t>(*nf.design)].id;
        try {
            const BoundResult r = bound_interval(model, mode, nf.functional, cfg.threshold, cfg.solver);
            return interval_record(r, nf.functional.description, id);
        } catch (const std::exception& e) {
            return error_record(nf.functional.description, id, e.what());
        }
    });

    auto csv = open_output(cfg, report, "intervals.csv");
    write_intervals_csv(report.intervals, csv);
    finish_report(cfg, report, start);
    return report;
}

ExperimentReport cmd_mode(const RunConfig& cfg) {
    const auto start = Clock::now();
    ExperimentReport report = start_report(cfg, "mode");
    const LoadedProblem lp = problem_for(cfg);
    const PosteriorModel model(lp.data, cfg.prior);
    const ModeResult mode = find_posterior_mode(model, cfg.solver);
    report.mode = ModeRecord{mode.d_star.values, mode.p_star.values, mode.p_tilde_star.values, mode.log_post_star,
                             mode.iterations, mode.converged, mode.kkt_residual};
    finish_report(cfg, report, start);
    return report;
}

ExperimentReport cmd_coverage(const RunConfig& cfg) {
    const auto start = Clock::now();
    ExperimentReport report = start_report(cfg, "coverage");
    const SchemeConfig& scheme = require_scheme(cfg);
    const auto s = static_cast<int>(scheme.scheme.pi.rows());
    const auto m = static_cast<int>(scheme.scheme.pi.cols());
    const auto functionals = resolve_functionals(functional_specs(cfg), s, m);
    const std::vector<NamedFunctional> primary{functionals.front()};
    const int reps = cfg.experiment.replications;
    const std::int64_t n = cfg.experiment.n;

    const auto results = parallel_map(reps, cfg.threads, [&](int r) {
        return replicate(cfg, scheme, primary, n, mix_seed(cfg.seed, static_cast<std::uint64_t>(r)));
    });

    CoverageStats st;
    st.n = n;
    st.replications = reps;
    st.ell = cfg.threshold.radius();
    st.true_value = primary[0].functional.evaluate(scheme.scheme.pi);
    int upper = 0, lower = 0, both = 0;
    auto csv = open_output(cfg, report, "coverage.csv");
    csv << "replication,lower,upper,plug_in,status\n";
    csv.precision(17);
    for (int r = 0; r < reps; ++r) {
        const BoundResult& b = results[static_cast<std::size_t>(r)].primary;
        if (!b.optimal()) ++st.failures;
        const bool up = b.upper >= st.true_value;
        const bool lo = b.lower <= st.true_value;
        upper += up;
        lower += lo;
        both += up && lo;
        csv << r << ',' << b.lower << ',' << b.upper << ',' << results[static_cast<std::size_t>(r)].plug_in << ','
            << combined_status(b) << '\n';
    }
    st.upper_coverage = static_cast<double>(upper) / reps;
    st.lower_coverage = static_cast<double>(lower) / reps;
    st.two_sided_coverage = static_cast<double>(both) / reps;
    st.upper_se = binomial_se(st.upper_coverage, reps);
    st.lower_se = binomial_se(st.lower_coverage, reps);
    report.coverage = st;
    finish_report(cfg, report, start);
    return report;
}

ExperimentReport cmd_consistency(const RunConfig& cfg) {
    const auto start = Clock::now();
    ExperimentReport report = start_report(cfg, "consistency");
    const SchemeConfig& scheme = require_scheme(cfg);
    const auto s = static_cast<int>(scheme.scheme.pi.rows());
    const auto m = static_cast<int>(scheme.scheme.pi.cols());
    auto functionals = resolve_functionals(functional_specs(cfg), s, m);
    if (functionals.size() > 2) functionals.resize(2);
    const int reps = cfg.experiment.replications;

    ConsistencyStats st;
    st.ell = cfg.threshold.radius();
    st.true_value = functionals[0].functional.evaluate(scheme.scheme.pi);
    st.target_slope = target_slope(scheme.scheme, functionals[0].functional, st.ell);
    const double second_truth =
        functionals.size() > 1 ? functionals[1].functional.evaluate(scheme.scheme.pi) : 0.0;

    auto csv = open_output(cfg, report, "consistency.csv");
    csv << "n,replication,lower,upper,plug_in,status\n";
    csv.precision(17);
    for (std::size_t level = 0; level < cfg.experiment.n_ladder.size(); ++level) {
        const std::int64_t n = cfg.experiment.n_ladder[level];
        const std::uint64_t level_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(n));
        const auto results = parallel_map(reps, cfg.threads, [&](int r) {
            return replicate(cfg, scheme, functionals, n, mix_seed(level_seed, static_cast<std::uint64_t>(r)));
        });
        ConsistencyRow row;
        row.n = n;
        row.replications = reps;
        const double rn = std::sqrt(static_cast<double>(n));
        int contain = 0, ranked = 0;
        for (int r = 0; r < reps; ++r) {
            const auto& res = results[static_cast<std::size_t>(r)];
            const BoundResult& b = res.primary;
            if (!b.optimal()) ++row.failures;
            row.mean_gap_upper += rn * (b.upper - res.plug_in) / reps;
            row.mean_gap_lower += rn * (res.plug_in - b.lower) / reps;
            row.mean_width += (b.upper - b.lower) / reps;
            row.mean_center_error += std::abs(0.5 * (b.upper + b.lower) - st.true_value) / reps;
            contain += b.lower <= st.true_value && st.true_value <= b.upper;
            if (res.secondary) {
                const BoundResult& other = *res.secondary;
                const bool first_larger = st.true_value > second_truth;
                ranked += first_larger ? other.upper < b.lower : b.upper < other.lower;
            }
            csv << n << ',' << r << ',' << b.lower << ',' << b.upper << ',' << res.plug_in << ','
                << combined_status(b) << '\n';
        }
        row.contain_fraction = static_cast<double>(contain) / reps;
        row.slope_ratio = st.target_slope > 0.0 ? row.mean_gap_upper / st.target_slope : 0.0;
        if (functionals.size() > 1) row.ranking_fraction = static_cast<double>(ranked) / reps;
        st.rows.push_back(row);
    }
    report.consistency = st;
    finish_report(cfg, report, start);
    return report;
}

ExperimentReport cmd_simulate(const RunConfig& cfg) {
    const auto start = Clock::now();
    ExperimentReport report = start_report(cfg, "simulate");
    if (!cfg.generator) throw ConfigError("config: simulate needs a /generator block");
    const GeneratorConfig& gen = *cfg.generator;

    std::vector<DesignPoint> designs;
    CountTable real, sim;
    nlohmann::ordered_json sidecar;
    sidecar["seed"] = cfg.seed;
    if (gen.kind == GeneratorConfig::Kind::multinomial) {
        const SchemeConfig& scheme = require_scheme(cfg);
        for (std::size_t j = 0; j < scheme.coords.size(); ++j) {
            designs.push_back({static_cast<std::int64_t>(j), scheme.coords[j]});
        }
        real = scheme.problem(cfg.experiment.n, cfg.seed).real_counts();
        sim = scheme.sim_counts;
        sidecar["generator"] = "multinomial";
        sidecar["n_total"] = cfg.experiment.n;
    } else {
        const auto s = static_cast<Eigen::Index>(gen.servers.size());
        const auto m = gen.model.base.outcomes();
        real = CountTable::Zero(s, m);
        sim = CountTable::Zero(s, m);
        for (Eigen::Index j = 0; j < s; ++j) {
            const int x = gen.servers[static_cast<std::size_t>(j)];
            designs.push_back({x, static_cast<double>(x)});
            TrueModelConfig model = gen.model;
            model.base.servers = x;
            const std::uint64_t sim_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(2 * j));
            const std::uint64_t real_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(2 * j + 1));
            const auto sim_row = gen.kind == GeneratorConfig::Kind::call_center
                                     ? simulate_call_center(model.base, gen.sim_reps, sim_seed)
                                     : simulate_true_system(model, gen.sim_reps, sim_seed);
            for (Eigen::Index i = 0; i < m; ++i) sim(j, i) = sim_row[static_cast<std::size_t>(i)];
            if (!gen.real_reps.empty()) {
                const auto real_row = simulate_true_system(model, gen.real_reps[static_cast<std::size_t>(j)], real_seed);
                for (Eigen::Index i = 0; i < m; ++i) real(j, i) = real_row[static_cast<std::size_t>(i)];
            }
        }
        const auto& b = gen.model.base;
        sidecar["generator"] = gen.kind == GeneratorConfig::Kind::call_center ? "call_center" : "true_system";
        sidecar["servers"] = gen.servers;
        sidecar["sim_reps"] = gen.sim_reps;
        sidecar["real_reps"] = gen.real_reps;
        sidecar["call_center"] = {{"arrival_rate_mean", b.arrival_rate_mean},
                                  {"arrival_rate_var", b.arrival_rate_var},
                                  {"rate_parameterisation", b.rate_parameterisation ==
                                                                    LognormalParameterisation::moments
                                                                ? "moments"
                                                                : "log_scale"},
                                  {"random_arrival_rate", b.random_arrival_rate},
                                  {"service_mean", b.service_mean},
                                  {"abandonment", b.abandonment},
                                  {"abandon_mean", b.abandon_mean},
                                  {"count_abandoned", b.count_abandoned},
                                  {"horizon", b.horizon},
                                  {"warmup", b.warmup},
                                  {"bins", b.bins}};
        sidecar["breaks"] = {{"interarrival_mean", gen.model.break_interarrival_mean},
                             {"duration_mean", gen.model.break_duration_mean},
                             {"break_trigger_idle", gen.model.break_trigger_idle},
                             {"stop_trigger_idle", gen.model.stop_trigger_idle}};
    }
    {
        auto out = open_output(cfg, report, "designs.csv");
        write_designs(out, designs);
    }
    {
        auto out = open_output(cfg, report, "counts.csv");
        write_counts(out, designs, real, sim);
    }
    {
        auto out = open_output(cfg, report, "generator.json");
        out << sidecar.dump(2) << '\n';
    }
    finish_report(cfg, report, start);
    return report;
}

ExperimentReport cmd_compare_sampler(const RunConfig& cfg) {
    const auto start = Clock::now();
    ExperimentReport report = start_report(cfg, "compare-sampler");
    const LoadedProblem lp = problem_for(cfg);
    const PosteriorModel model(lp.data, cfg.prior);
    const auto functionals = resolve_functionals(functional_specs(cfg), model.designs(), model.outcomes());
    const ModeResult mode = find_posterior_mode(model, cfg.solver);
    const Chain chain = mh_sample(model, cfg.sampler);
    const double q = cfg.threshold.level().value_or(normal_cdf(cfg.threshold.radius()));
    const double alpha = 1.0 - q;

    report.intervals = parallel_map(static_cast<int>(functionals.size()), cfg.threads, [&](int k) {
        const NamedFunctional& nf = functionals[static_cast<std::size_t>(k)];
        std::optional<std::int64_t> id;
        if (nf.design) id = lp.designs[static_cast<std::size_t>(*nf.design)].id;
        try {
            return interval_record(bound_interval(model, mode, nf.functional, cfg.threshold, cfg.solver),
                                   nf.functional.description, id);
        } catch (const std::exception& e) {
            return error_record(nf.functional.description, id, e.what());
        }
    });
    auto csv = open_output(cfg, report, "comparison.csv");
    csv << "design_id,functional,opt_lower,opt_upper,sample_lower,sample_upper\n";
    csv.precision(17);
    for (std::size_t k = 0; k < functionals.size(); ++k) {
        const NamedFunctional& nf = functionals[k];
        std::vector<double> trace(chain.size());
        for (std::size_t t = 0; t < chain.size(); ++t) trace[t] = nf.functional.evaluate(chain.p[t]);
        SamplerRecord rec;
        rec.design_id = report.intervals[k].design_id;
        rec.functional = nf.functional.description;
        rec.opt_lower = report.intervals[k].lower;
        rec.opt_upper = report.intervals[k].upper;
        rec.sample_lower = posterior_quantile(chain, nf.functional, alpha);
        rec.sample_upper = posterior_quantile(chain, nf.functional, 1.0 - alpha);
        rec.alpha = alpha;
        rec.effective_sample_size = effective_sample_size(trace);
        if (rec.design_id) csv << *rec.design_id;
        csv << ",\"" << rec.functional << "\"," << rec.opt_lower << ',' << rec.opt_upper << ',' << rec.sample_lower
            << ',' << rec.sample_upper << '\n';
        report.sampler.push_back(std::move(rec));
    }
    auto chain_csv = open_output(cfg, report, "chain.csv");
    write_chain_csv(chain, chain_csv);
    finish_report(cfg, report, start);
    return report;
}

ExperimentReport cmd_convexity_check(const RunConfig& cfg) {
    const auto start = Clock::now();
    ExperimentReport report = start_report(cfg, "convexity-check");
    const LoadedProblem lp = problem_for(cfg);
    const PosteriorModel model(lp.data, cfg.prior);
    const ModeResult mode = find_posterior_mode(model, cfg.solver);
    const double log_c = threshold_from_spec(cfg.threshold, mode.log_post_star);
    const ConvexityProbeResult probe = convexity_probe(model, log_c, cfg.convexity_pairs, cfg.seed);
    report.convexity = ConvexityRecord{log_c, probe.pass_fraction, probe.pairs_tested, probe.feasible_points,
                                       probe.degenerate};
    finish_report(cfg, report, start);
    return report;
}

}  // namespace simcal::cli
