#include <iostream>

#include <CLI11.hpp>

#include "simcal/commands.hpp"

namespace {

using simcal::cli::ExperimentReport;
using simcal::cli::RunConfig;

void print_summary(const ExperimentReport& r) {
    std::cout << r.command << ": ";
    if (!r.intervals.empty()) {
        int optimal = 0;
        for (const auto& row : r.intervals) optimal += row.status == "optimal";
        std::cout << r.intervals.size() << " intervals (" << optimal << " optimal)";
    } else if (r.coverage) {
        std::cout << "upper coverage " << r.coverage->upper_coverage << " ± " << r.coverage->upper_se
                  << ", lower coverage " << r.coverage->lower_coverage;
    } else if (r.consistency) {
        std::cout << r.consistency->rows.size() << " sample sizes, target slope " << r.consistency->target_slope;
    } else if (r.convexity) {
        std::cout << "pass fraction " << r.convexity->pass_fraction << " over " << r.convexity->pairs_tested
                  << " pairs";
    } else if (r.mode) {
        std::cout << "log posterior at mode " << r.mode->log_post_star;
    } else {
        std::cout << r.outputs.size() << " files";
    }
    std::cout << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Calibration bounds for stochastic simulation models"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> threads;
    app.add_option("--config", config_path, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Override the configured seed");
    app.add_option("--out", out_dir, "Override the output directory");
    app.add_option("--threads", threads, "Worker threads for replication loops")->check(CLI::PositiveNumber);

    using Command = ExperimentReport (*)(const RunConfig&);
    const std::vector<std::tuple<const char*, const char*, Command>> verbs{
        {"calibrate", "Bounds for every configured functional", simcal::cli::cmd_calibrate},
        {"coverage", "Coverage of the bounds over synthetic replications", simcal::cli::cmd_coverage},
        {"consistency", "Normalised bound gaps over a sample-size ladder", simcal::cli::cmd_consistency},
        {"simulate", "Generate datasets in the count CSV format", simcal::cli::cmd_simulate},
        {"compare-sampler", "Optimisation bounds next to MCMC quantiles", simcal::cli::cmd_compare_sampler},
        {"mode", "Posterior mode", simcal::cli::cmd_mode},
        {"convexity-check", "Midpoint convexity probe of the level set", simcal::cli::cmd_convexity_check},
    };
    Command selected = nullptr;
    for (const auto& [name, help, fn] : verbs) {
        app.add_subcommand(name, help)->callback([&selected, f = fn] { selected = f; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = simcal::cli::load_run_config(config_path);
        if (seed) {
            cfg.seed = *seed;
            cfg.solver.seed = *seed;
            cfg.sampler.seed = *seed;
        }
        if (out_dir) cfg.output_dir = *out_dir;
        if (threads) cfg.threads = *threads;
        print_summary(selected(cfg));
        return 0;
    } catch (const simcal::cli::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
