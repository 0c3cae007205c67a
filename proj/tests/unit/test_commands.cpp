#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "simcal/commands.hpp"
#include "simcal/io.hpp"

using namespace simcal;
using namespace simcal::cli;
namespace fs = std::filesystem;

namespace {

class CommandTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("simcal_cmd_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    RunConfig parse(const std::string& text) { return parse_run_config(text, dir_); }

    void write(const std::string& name, const std::string& text) { std::ofstream(dir_ / name) << text; }

    std::string slurp(const fs::path& p) {
        std::ifstream in(p);
        std::stringstream buf;
        buf << in.rdbuf();
        return buf.str();
    }

    fs::path dir_;
};

const char* kScheme = R"("scheme": {"pi": [[0.2, 0.3, 0.5], [0.5, 0.3, 0.2]], "xi": [0.5, 0.5],
                                   "sim_pi": [[0.25, 0.3, 0.45], [0.45, 0.3, 0.25]], "sim_n": 1000})";

}  // namespace

TEST_F(CommandTest, ConfigDefaultsAndOverrides) {
    const RunConfig cfg = parse(R"({"schema_version": 1, "seed": 9, "threshold": {"ell": 1.5},
                                    "solver": {"restarts": 2, "step_rule": "fixed"}})");
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_EQ(cfg.solver.seed, 9u);
    EXPECT_EQ(cfg.sampler.seed, 9u);
    EXPECT_DOUBLE_EQ(cfg.threshold.radius(), 1.5);
    EXPECT_FALSE(cfg.threshold.level().has_value());
    EXPECT_EQ(cfg.solver.restarts, 2);
    EXPECT_EQ(cfg.solver.step_rule, StepRule::fixed);
    EXPECT_DOUBLE_EQ(cfg.prior.lambda_d, 0.25);
}

TEST_F(CommandTest, ConfigErrorsNameTheLocation) {
    const auto expect_error = [&](const std::string& text, const std::string& fragment) {
        try {
            parse(text);
            FAIL() << "accepted: " << text;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
        }
    };
    expect_error(R"({"threshold": {"q": 0.9}})", "/schema_version");
    expect_error(R"({"schema_version": 2})", "unsupported version");
    expect_error(R"({"schema_version": 1, "threshold": {"q": 0.9, "ell": 1}})", "exactly one");
    expect_error(R"({"schema_version": 1, "threshold": {}})", "exactly one");
    expect_error(R"({"schema_version": 1, "prior": {"lambda": 1}})", "/prior/lambda");
    expect_error(R"({"schema_version": 1, "prior": {"lambda_d": "big"}})", "/prior/lambda_d");
    expect_error(R"({"schema_version": 1, "data": {"designs": "missing.csv", "counts": "c.csv"}})",
                 "/data/designs");
    expect_error(R"({"schema_version": 1, "functionals": [{"type": "median"}]})", "/functionals/0/type");
    expect_error(R"({"schema_version": 1, "scheme": {"pi": [[0.5, 0.6]], "xi": [1.0]}})", "/scheme");
    expect_error("{not json", "not valid JSON");
}

TEST_F(CommandTest, ExplicitMatricesLoaded) {
    write("R.json", R"({"R_d": [[1, 0], [0, 1]], "R_p": [[1, 0.5], [0.5, 1]]})");
    const RunConfig cfg = parse(R"({"schema_version": 1, "prior": {"matrices": "R.json"}})");
    ASSERT_TRUE(cfg.prior.R_p.has_value());
    EXPECT_DOUBLE_EQ((*cfg.prior.R_p)(0, 1), 0.5);
}

TEST_F(CommandTest, FunctionalResolution) {
    FunctionalSpec ind;
    FunctionalSpec exp;
    exp.kind = FunctionalSpec::Kind::expectation;
    exp.values = {1.0, 2.0, 3.0};
    exp.design = 1;
    const auto fs = resolve_functionals({ind, exp}, 2, 3);
    ASSERT_EQ(fs.size(), 7u);
    EXPECT_EQ(fs[4].design, 1);
    EXPECT_EQ(fs[6].functional.z(1, 2), 3.0);
    exp.values = {1.0};
    EXPECT_THROW(resolve_functionals({exp}, 2, 3), ConfigError);
}

TEST_F(CommandTest, ReportJsonRoundTrip) {
    ExperimentReport r;
    r.command = "calibrate";
    r.seed = 18446744073709551615ULL;
    IntervalRecord a;
    a.design_id = 7;
    a.functional = "P(outcome 1)";
    a.q = 0.975;
    a.ell = 1.959963984540054;
    a.log_c = -71.123456789012345;
    a.lower = 0.1 + 0.2;
    a.upper = 1.0 / 3.0;
    a.status = a.lower_status = a.upper_status = "optimal";
    a.iterations = 12;
    IntervalRecord b = a;
    b.design_id.reset();
    b.q.reset();
    b.lower = b.upper = std::numeric_limits<double>::quiet_NaN();
    b.status = "error";
    b.message = "boom";
    r.intervals = {a, b};
    r.sampler.push_back({"E", 3, 0.1, 0.9, 0.2, 0.8, 0.025, 1234.5});
    r.coverage = CoverageStats{2000, 500, 1.96, 0.3, 0.97, 0.98, 0.95, 0.007, 0.006, 1};
    ConsistencyStats cs;
    cs.ell = 1.0;
    cs.target_slope = 1.8439;
    ConsistencyRow row;
    row.n = 20;
    row.ranking_fraction = 0.5;
    cs.rows = {row, ConsistencyRow{}};
    r.consistency = cs;
    r.convexity = ConvexityRecord{-3.0, 0.999, 1000, 1000, false};
    r.mode = ModeRecord{Table::Constant(1, 2, 1.0), Table::Constant(1, 2, 0.5), Table::Constant(1, 2, 0.5), -1.5,
                        10, true, 1e-10};
    r.outputs = {"intervals.csv"};
    r.metadata.timestamp = "2026-01-01T00:00:00Z";

    const std::string text = report_to_json(r);
    const ExperimentReport back = report_from_json(text);
    EXPECT_TRUE(back.same_results(r));
    EXPECT_EQ(report_to_json(back), text);
}

TEST_F(CommandTest, SimulateWritesRoundTrippableDataset) {
    RunConfig cfg = parse(R"({"schema_version": 1, "seed": 3,
        "generator": {"type": "call_center", "servers": [5, 6, 7, 8, 9], "sim_reps": 250}})");
    cfg.output_dir = (dir_ / "data").string();
    const ExperimentReport r = cmd_simulate(cfg);
    EXPECT_EQ(r.outputs.back(), "report.json");
    const auto designs = read_designs_file((dir_ / "data/designs.csv").string());
    ASSERT_EQ(designs.size(), 5u);
    const auto t = read_counts_files({(dir_ / "data/counts.csv").string()}, designs);
    for (int j = 0; j < 5; ++j) EXPECT_EQ(t.sim.row(j).sum(), 250);
    EXPECT_EQ(t.real.sum(), 0);
    EXPECT_TRUE(fs::exists(dir_ / "data/generator.json"));

    std::stringstream again;
    write_counts(again, designs, t.real, t.sim);
    EXPECT_EQ(again.str(), slurp(dir_ / "data/counts.csv"));
}

TEST_F(CommandTest, SimulateZeroReplications) {
    RunConfig cfg = parse(R"({"schema_version": 1,
        "generator": {"type": "true_system", "servers": [6, 7], "sim_reps": 0}})");
    cfg.output_dir = (dir_ / "data").string();
    cmd_simulate(cfg);
    const auto designs = read_designs_file((dir_ / "data/designs.csv").string());
    const auto t = read_counts_files({(dir_ / "data/counts.csv").string()}, designs);
    EXPECT_EQ(t.sim.sum(), 0);
    EXPECT_EQ(t.sim.cols(), 4);
}

TEST_F(CommandTest, CalibrateIsDeterministicAndInRange) {
    write("designs.csv", "design_id,coord\n1,1\n2,2\n");
    write("counts.csv",
          "design_id,outcome_id,count,source\n1,0,4,real\n1,1,6,real\n2,0,0,real\n2,1,0,real\n"
          "1,0,40,sim\n1,1,60,sim\n2,0,70,sim\n2,1,30,sim\n");
    const std::string text = R"({"schema_version": 1, "seed": 5,
        "data": {"designs": "designs.csv", "counts": "counts.csv"},
        "threshold": {"q": 0.975}})";
    RunConfig cfg = parse(text);
    cfg.output_dir = (dir_ / "a").string();
    const ExperimentReport a = cmd_calibrate(cfg);
    cfg.output_dir = (dir_ / "b").string();
    const ExperimentReport b = cmd_calibrate(cfg);
    EXPECT_TRUE(a.same_results(b));
    EXPECT_EQ(slurp(dir_ / "a/intervals.csv"), slurp(dir_ / "b/intervals.csv"));
    ASSERT_EQ(a.intervals.size(), 4u);
    for (const auto& r : a.intervals) {
        EXPECT_EQ(r.status, "optimal") << r.functional;
        EXPECT_GE(r.lower, -1e-9);
        EXPECT_LE(r.upper, 1.0 + 1e-9);
        EXPECT_LE(r.lower, r.upper);
    }
    // The unobserved design is wider than the observed one.
    EXPECT_GT(a.intervals[2].upper - a.intervals[2].lower, a.intervals[0].upper - a.intervals[0].lower);
    EXPECT_TRUE(report_from_json(slurp(dir_ / "a/report.json")).same_results(a));
}

TEST_F(CommandTest, CalibrateStrongPriorCentresOnSimulatorFrequencies) {
    write("designs.csv", "design_id,coord\n0,0\n");
    write("counts.csv", "design_id,outcome_id,count,source\n0,0,300,sim\n0,1,700,sim\n");
    RunConfig cfg = parse(R"({"schema_version": 1, "data": {"designs": "designs.csv", "counts": "counts.csv",
        "outcomes": 2}, "prior": {"lambda_d": 1000}, "threshold": {"q": 0.975}})");
    cfg.output_dir = (dir_ / "out").string();
    const ExperimentReport r = cmd_calibrate(cfg);
    EXPECT_NEAR(0.5 * (r.intervals[0].lower + r.intervals[0].upper), 0.3, 0.03);
    EXPECT_NEAR(0.5 * (r.intervals[1].lower + r.intervals[1].upper), 0.7, 0.03);
}

TEST_F(CommandTest, CompareSamplerConstantFunctional) {
    RunConfig cfg = parse(std::string(R"({"schema_version": 1, "threshold": {"q": 0.975},
        "functionals": [{"type": "explicit", "z": [[2, 2, 2], [2, 2, 2]], "name": "two"}],
        "sampler": {"n_draws": 200, "burn_in": 200}, "experiment": {"n": 200}, )") + kScheme + "}");
    cfg.output_dir = (dir_ / "out").string();
    const ExperimentReport r = cmd_compare_sampler(cfg);
    ASSERT_EQ(r.sampler.size(), 1u);
    EXPECT_NEAR(r.sampler[0].opt_lower, 4.0, 1e-9);
    EXPECT_NEAR(r.sampler[0].opt_upper, 4.0, 1e-9);
    EXPECT_NEAR(r.sampler[0].sample_lower, 4.0, 1e-9);
    EXPECT_NEAR(r.sampler[0].sample_upper, 4.0, 1e-9);
    EXPECT_TRUE(fs::exists(dir_ / "out/chain.csv"));
}

TEST_F(CommandTest, CoverageWithHugeRadiusIsComplete) {
    RunConfig cfg = parse(std::string(R"({"schema_version": 1, "threshold": {"ell": 10},
        "functionals": [{"type": "indicators", "design": 0}],
        "experiment": {"replications": 10, "n": 200}, )") + kScheme + "}");
    cfg.output_dir = (dir_ / "out").string();
    const ExperimentReport r = cmd_coverage(cfg);
    ASSERT_TRUE(r.coverage.has_value());
    EXPECT_EQ(r.coverage->upper_coverage, 1.0);
    EXPECT_EQ(r.coverage->lower_coverage, 1.0);
    EXPECT_DOUBLE_EQ(r.coverage->true_value, 0.2);
}

TEST_F(CommandTest, ConsistencyConstantFunctionalHasZeroGap) {
    RunConfig cfg = parse(std::string(R"({"schema_version": 1, "threshold": {"ell": 1},
        "functionals": [{"type": "explicit", "z": [[1, 1, 1], [1, 1, 1]]}],
        "experiment": {"replications": 3, "n_ladder": [50, 500]}, )") + kScheme + "}");
    cfg.output_dir = (dir_ / "out").string();
    const ExperimentReport r = cmd_consistency(cfg);
    ASSERT_EQ(r.consistency->rows.size(), 2u);
    for (const auto& row : r.consistency->rows) {
        EXPECT_NEAR(row.mean_gap_upper, 0.0, 1e-6);
        EXPECT_NEAR(row.mean_gap_lower, 0.0, 1e-6);
    }
    EXPECT_EQ(r.consistency->target_slope, 0.0);
}

TEST_F(CommandTest, TargetSlopeAndPlugIn) {
    SyntheticScheme s;
    s.pi = Table(2, 3);
    s.pi << 0.2, 0.3, 0.5, 0.5, 0.3, 0.2;
    s.xi = {0.5, 0.5};
    QueryFunctional f;
    f.z = Table(2, 3);
    f.z << 0, 1, 2, 1, 0, 3;
    EXPECT_NEAR(target_slope(s, f, 1.0), 1.843908891458577, 1e-12);
    CountTable n(2, 3), nt = CountTable::Zero(2, 3);
    n << 1, 1, 2, 0, 0, 0;
    EXPECT_NEAR(plug_in_estimate(f, ProblemData({0.0, 1.0}, n, nt)), 1.25, 1e-15);
}

TEST_F(CommandTest, ModeAndConvexityCommands) {
    RunConfig cfg = parse(std::string(R"({"schema_version": 1, "experiment": {"n": 300},
        "convexity": {"pairs": 50}, )") + kScheme + "}");
    cfg.output_dir = (dir_ / "out").string();
    const ExperimentReport m = cmd_mode(cfg);
    ASSERT_TRUE(m.mode.has_value());
    EXPECT_TRUE(std::isfinite(m.mode->log_post_star));
    const ExperimentReport c = cmd_convexity_check(cfg);
    ASSERT_TRUE(c.convexity.has_value());
    EXPECT_EQ(c.convexity->pairs_tested, 50);
}
