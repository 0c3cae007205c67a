#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "simcal/bounds.hpp"
#include "simcal/io.hpp"
#include "simcal/mode.hpp"
#include "simcal/posterior.hpp"
#include "simcal/sampler.hpp"
#include "simcal/sim.hpp"

namespace simcal::cli {

inline constexpr int kSchemaVersion = 1;

/// A functional as written in the config; resolved against (s, m) at run time.
struct FunctionalSpec {
    enum class Kind { indicators, expectation, explicit_z };
    Kind kind = Kind::indicators;
    std::vector<double> values;  // expectation: one value per outcome
    std::optional<int> design;   // indicators/expectation: restrict to one design row (index)
    Table z;                     // explicit_z
    std::string name;
};

/// A resolved functional plus the design it refers to (if it is design-local).
struct NamedFunctional {
    QueryFunctional functional;
    std::optional<int> design;
};

std::vector<NamedFunctional> resolve_functionals(const std::vector<FunctionalSpec>& specs, int designs,
                                                 int outcomes);

/// Synthetic real-data scheme for the replication experiments. Simulation
/// counts are fixed across replications.
struct SchemeConfig {
    SyntheticScheme scheme;
    CountTable sim_counts;
    std::vector<double> coords;

    ProblemData problem(std::int64_t n_total, std::uint64_t seed) const;
};

struct ExperimentConfig {
    int replications = 100;
    std::int64_t n = 2000;
    std::vector<std::int64_t> n_ladder{5, 10, 20, 200, 2000};
};

struct GeneratorConfig {
    enum class Kind { call_center, true_system, multinomial };
    Kind kind = Kind::call_center;
    std::vector<int> servers{5, 6, 7, 8, 9};
    std::int64_t sim_reps = 250;
    std::vector<std::int64_t> real_reps;  // true-system replications per server level (empty: none)
    TrueModelConfig model;                // model.base drives the simulator
};

struct RunConfig {
    int schema_version = kSchemaVersion;
    std::filesystem::path base_dir;  // relative paths resolve here

    std::optional<std::string> designs_path;
    std::vector<std::string> count_paths;
    int outcomes = 0;

    GaussianPriorSpec prior;
    std::optional<std::string> matrices_path;
    ThresholdSpec threshold = ThresholdSpec::from_level(0.975);
    std::vector<FunctionalSpec> functionals;
    SolverOptions solver;
    SamplerOptions sampler;
    int convexity_pairs = 1000;

    std::optional<SchemeConfig> scheme;
    ExperimentConfig experiment;
    std::optional<GeneratorConfig> generator;

    std::string output_dir = "out";
    std::uint64_t seed = 0;
    int threads = 1;

    std::filesystem::path resolve(const std::string& path) const;
};

/// Throws ConfigError (with a JSON-pointer style location) on schema errors.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir);

/// Design list + counts from the configured files, or an error if none are set.
ProblemData load_configured_problem(const RunConfig& cfg, std::vector<DesignPoint>* designs = nullptr);

struct IntervalRecord {
    std::optional<std::int64_t> design_id;
    std::string functional;
    std::optional<double> q;
    double ell = 0.0;
    double log_c = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double mode_value = 0.0;
    double feasibility_residual = 0.0;
    std::string status;  // "optimal", "max_iter", "infeasible" or "error"
    std::string lower_status;
    std::string upper_status;
    int iterations = 0;
    std::string message;

    bool operator==(const IntervalRecord&) const;
};

struct SamplerRecord {
    std::string functional;
    std::optional<std::int64_t> design_id;
    double opt_lower = 0.0;
    double opt_upper = 0.0;
    double sample_lower = 0.0;
    double sample_upper = 0.0;
    double alpha = 0.0;
    double effective_sample_size = 0.0;

    bool operator==(const SamplerRecord&) const = default;
};

struct CoverageStats {
    std::int64_t n = 0;
    int replications = 0;
    double ell = 0.0;
    double true_value = 0.0;
    double upper_coverage = 0.0;  // fraction with upper ≥ truth
    double lower_coverage = 0.0;  // fraction with lower ≤ truth
    double two_sided_coverage = 0.0;
    double upper_se = 0.0;
    double lower_se = 0.0;
    int failures = 0;  // replications without an optimal status

    bool operator==(const CoverageStats&) const = default;
};

struct ConsistencyRow {
    std::int64_t n = 0;
    int replications = 0;
    double mean_gap_upper = 0.0;  // mean √n (upper − plug-in)
    double mean_gap_lower = 0.0;  // mean √n (plug-in − lower)
    double slope_ratio = 0.0;     // mean_gap_upper / target
    double mean_width = 0.0;
    double mean_center_error = 0.0;  // |midpoint − truth|
    double contain_fraction = 0.0;
    std::optional<double> ranking_fraction;  // disjoint and correctly ordered
    int failures = 0;

    bool operator==(const ConsistencyRow&) const = default;
};

struct ConsistencyStats {
    double ell = 0.0;
    double true_value = 0.0;
    double target_slope = 0.0;  // ℓ √(Σ ξ_j⁻¹ Var Z_j)
    std::vector<ConsistencyRow> rows;

    bool operator==(const ConsistencyStats&) const = default;
};

struct ConvexityRecord {
    double log_c = 0.0;
    double pass_fraction = 1.0;
    int pairs_tested = 0;
    int feasible_points = 0;
    bool degenerate = false;

    bool operator==(const ConvexityRecord&) const = default;
};

struct ModeRecord {
    Table d_star;
    Table p_star;
    Table p_tilde_star;
    double log_post_star = 0.0;
    int iterations = 0;
    bool converged = false;
    double kkt_residual = 0.0;

    bool operator==(const ModeRecord&) const;
};

struct RunMetadata {
    std::string version;
    std::string timestamp;
    double runtime_seconds = 0.0;
    int threads = 1;
};

struct ExperimentReport {
    int schema_version = kSchemaVersion;
    std::string command;
    std::uint64_t seed = 0;
    std::vector<IntervalRecord> intervals;
    std::vector<SamplerRecord> sampler;
    std::optional<CoverageStats> coverage;
    std::optional<ConsistencyStats> consistency;
    std::optional<ConvexityRecord> convexity;
    std::optional<ModeRecord> mode;
    std::vector<std::string> outputs;  // files written, relative to the output directory
    RunMetadata metadata;

    /// Equality ignoring metadata.
    bool same_results(const ExperimentReport& other) const;
};

std::string report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const std::string& text);

/// Interval rows as CSV (design_id,functional,q,ell,log_c,lower,upper,mode_value,status,iterations).
void write_intervals_csv(const std::vector<IntervalRecord>& rows, std::ostream& out);

// Commands. Each writes its outputs under cfg.output_dir and returns the report.
ExperimentReport cmd_calibrate(const RunConfig& cfg);
ExperimentReport cmd_mode(const RunConfig& cfg);
ExperimentReport cmd_coverage(const RunConfig& cfg);
ExperimentReport cmd_consistency(const RunConfig& cfg);
ExperimentReport cmd_simulate(const RunConfig& cfg);
ExperimentReport cmd_compare_sampler(const RunConfig& cfg);
ExperimentReport cmd_convexity_check(const RunConfig& cfg);

/// Pure pieces of the experiments, shared with the acceptance suite.
double plug_in_estimate(const QueryFunctional& f, const ProblemData& data);
double target_slope(const SyntheticScheme& scheme, const QueryFunctional& f, double ell);
IntervalRecord interval_record(const BoundResult& r, const std::string& functional,
                               std::optional<std::int64_t> design_id);

}  // namespace simcal::cli
