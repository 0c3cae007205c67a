#include <gtest/gtest.h>

#include <cmath>
#include <utility>

#include "simcal/bounds.hpp"
#include "simcal/mode.hpp"
#include "simcal/normal.hpp"
#include "support.hpp"

using namespace simcal;
using simcal::testing::counts;
using simcal::testing::identity_prior;
using simcal::testing::table;

namespace {

PosteriorModel oracle_model() {
    const ProblemData data({0.0}, counts(1, 2, {3, 1}), counts(1, 2, {50, 50}));
    return PosteriorModel(data, identity_prior(2, 0.25, 0.01));
}

QueryFunctional constant_functional(int s, int m, double z0) {
    QueryFunctional f;
    f.z = Table::Constant(s, m, z0);
    return f;
}

}  // namespace

TEST(Threshold, Values) {
    EXPECT_NEAR(threshold_from_spec(ThresholdSpec::from_level(0.5), 0.0), 0.0, 1e-15);
    EXPECT_NEAR(threshold_from_spec(ThresholdSpec::from_level(0.975), 0.0), -1.920729410347063, 1e-9);
    EXPECT_NEAR(threshold_from_spec(ThresholdSpec::from_radius(2.0), 5.0), 3.0, 1e-15);
    EXPECT_THROW(ThresholdSpec::from_level(1.0), std::invalid_argument);
    EXPECT_THROW(ThresholdSpec::from_radius(0.0), std::invalid_argument);
}

TEST(Functionals, Builders) {
    const auto f = indicator_functional(2, 3, 1, 2);
    EXPECT_EQ(f.z.sum(), 1.0);
    EXPECT_EQ(f.z(1, 2), 1.0);
    const auto e = expectation_functional(2, {1.0, 2.0, 3.0}, 0);
    EXPECT_EQ(e.z(0, 2), 3.0);
    EXPECT_EQ(e.z.row(1).sum(), 0.0);
    EXPECT_THROW(indicator_functional(2, 3, 2, 0), std::out_of_range);
}

TEST(JointBound, MatchesLatticeOracle) {
    const PosteriorModel model = oracle_model();
    const auto f = indicator_functional(1, 2, 0, 0);
    const BoundResult r = bound_interval(model, f, ThresholdSpec::from_radius(1.0));
    ASSERT_TRUE(r.optimal());
    // Frozen lattice scan (step 0.002) of the feasible set.
    EXPECT_NEAR(r.upper, 0.888, 5e-3);
    EXPECT_NEAR(r.lower, 0.482, 5e-3);
    EXPECT_LE(r.feasibility_residual, 1e-7);
}

TEST(JointBound, AgreesWithBruteForce) {
    const PosteriorModel model = oracle_model();
    const auto f = indicator_functional(1, 2, 0, 0);
    const ModeResult mode = find_posterior_mode(model);
    const double log_c = threshold_from_spec(ThresholdSpec::from_radius(1.0), mode.log_post_star);
    for (Direction dir : {Direction::minimize, Direction::maximize}) {
        const BoundSolution opt = solve_bound(model, mode, f, log_c, dir);
        const BruteForceResult bf = brute_force_bound(model, f, log_c, dir, 0.002);
        ASSERT_TRUE(bf.feasible);
        EXPECT_NEAR(opt.value, bf.value, 5e-3);
    }
}

TEST(JointBound, ConstantFunctionalCollapses) {
    Rng rng = make_rng(31);
    for (int rep = 0; rep < 5; ++rep) {
        const PosteriorModel model = simcal::testing::random_model(2, 3, rng);
        const BoundResult r = bound_interval(model, constant_functional(2, 3, 1.7), ThresholdSpec::from_level(0.975));
        EXPECT_NEAR(r.lower, 3.4, 1e-9);
        EXPECT_NEAR(r.upper, 3.4, 1e-9);
    }
}

TEST(JointBound, SmallRadiusShrinksToMode) {
    const PosteriorModel model = oracle_model();
    const auto f = indicator_functional(1, 2, 0, 0);
    const BoundResult r = bound_interval(model, f, ThresholdSpec::from_radius(1e-4));
    EXPECT_NEAR(r.lower, r.mode_value, 1e-3);
    EXPECT_NEAR(r.upper, r.mode_value, 1e-3);
}

TEST(JointBound, LevelAndRadiusFormsAgree) {
    const PosteriorModel model = oracle_model();
    const auto f = indicator_functional(1, 2, 0, 1);
    const BoundResult a = bound_interval(model, f, ThresholdSpec::from_level(0.975));
    const BoundResult b = bound_interval(model, f, ThresholdSpec::from_radius(normal_quantile(0.975)));
    EXPECT_NEAR(a.lower, b.lower, 1e-12);
    EXPECT_NEAR(a.upper, b.upper, 1e-12);
    EXPECT_TRUE(a.q.has_value());
}

TEST(JointBound, NestedInRadiusAndBracketsMode) {
    Rng rng = make_rng(32);
    for (int rep = 0; rep < 5; ++rep) {
        const PosteriorModel model = simcal::testing::random_model(2, 3, rng);
        const ModeResult mode = find_posterior_mode(model);
        const auto f = indicator_functional(2, 3, rep % 2, rep % 3);
        const BoundResult small = bound_interval(model, mode, f, ThresholdSpec::from_radius(0.5));
        const BoundResult large = bound_interval(model, mode, f, ThresholdSpec::from_radius(2.0));
        ASSERT_TRUE(small.optimal() && large.optimal());
        EXPECT_LE(small.lower, small.mode_value + 1e-9);
        EXPECT_GE(small.upper, small.mode_value - 1e-9);
        EXPECT_LE(large.lower, small.lower + 1e-6);
        EXPECT_GE(large.upper, small.upper - 1e-6);
        EXPECT_GE(small.lower, -1e-9);
        EXPECT_LE(large.upper, 1.0 + 1e-9);
    }
}

TEST(JointBound, InfeasibleLevelReported) {
    const PosteriorModel model = oracle_model();
    const ModeResult mode = find_posterior_mode(model);
    const auto f = indicator_functional(1, 2, 0, 0);
    const BoundSolution r = solve_bound(model, mode, f, mode.log_post_star + 1.0, Direction::maximize);
    EXPECT_EQ(r.status, SolveStatus::infeasible);
    const BruteForceResult bf = brute_force_bound(model, f, mode.log_post_star + 1.0, Direction::maximize, 0.01);
    EXPECT_FALSE(bf.feasible);
}

TEST(JointBound, RejectsMismatchedFunctional) {
    const PosteriorModel model = oracle_model();
    EXPECT_THROW(solve_bound(model, indicator_functional(1, 3, 0, 0), -80.0, Direction::maximize),
                 std::invalid_argument);
}

TEST(FixedSimBound, MatchesDenseOracle) {
    const ProblemData data({0.0}, counts(1, 3, {2, 3, 5}), CountTable::Zero(1, 3));
    const auto prior = identity_prior(3, 0.25, 0.01);
    const Table pit = table(1, 3, {0.2, 0.3, 0.5});
    const FixedSimMode mode = fixed_sim_mode(pit, data, prior);
    EXPECT_NEAR(mode.value, 0.0, 1e-8);  // d = n/(n_tot π̃) = 1 attains both maxima
    QueryFunctional f;
    f.z = table(1, 3, {0.0, 1.0, 2.0});
    const double log_c = mode.value - 0.5 * 1.96 * 1.96;
    const BoundSolution lo = solve_bound_fixed_sim(pit, data, prior, f, log_c, Direction::minimize);
    const BoundSolution hi = solve_bound_fixed_sim(pit, data, prior, f, log_c, Direction::maximize);
    EXPECT_EQ(lo.status, SolveStatus::optimal);
    EXPECT_EQ(hi.status, SolveStatus::optimal);
    EXPECT_NEAR(hi.value, 1.689, 1e-2);
    EXPECT_NEAR(lo.value, 0.842, 1e-2);
    EXPECT_LE(lo.feasibility_residual, 1e-7);
    EXPECT_LE(hi.feasibility_residual, 1e-7);
}

TEST(FixedSimBound, ConstantFunctionalAndStrongPrior) {
    const ProblemData data({0.0, 1.0}, CountTable::Zero(2, 3), CountTable::Zero(2, 3));
    GaussianPriorSpec prior;
    prior.lambda_d = 1e4;
    const Table pit = table(2, 3, {0.2, 0.3, 0.5, 0.6, 0.3, 0.1});
    const auto one = constant_functional(2, 3, 1.0);
    for (Direction dir : {Direction::minimize, Direction::maximize}) {
        EXPECT_NEAR(solve_bound_fixed_sim(pit, data, prior, one, -1.0, dir).value, 2.0, 1e-9);
    }
    QueryFunctional f;
    f.z = table(2, 3, {0, 1, 2, 0, 1, 2});
    const double target = f.z.cwiseProduct(pit).sum();
    const BoundSolution lo = solve_bound_fixed_sim(pit, data, prior, f, -0.01, Direction::minimize);
    const BoundSolution hi = solve_bound_fixed_sim(pit, data, prior, f, -0.01, Direction::maximize);
    EXPECT_NEAR(lo.value, target, 1e-2);
    EXPECT_NEAR(hi.value, target, 1e-2);
    EXPECT_LE(lo.value, hi.value);
}

TEST(BruteForce, ConstantFunctionalAndGuards) {
    const PosteriorModel model = oracle_model();
    const ModeResult mode = find_posterior_mode(model);
    const auto one = constant_functional(1, 2, 2.5);
    for (double step : {0.05, 0.01}) {
        const auto r = brute_force_bound(model, one, mode.log_post_star - 0.5, Direction::maximize, step);
        EXPECT_TRUE(r.feasible);
        EXPECT_NEAR(r.value, 2.5, 1e-12);
    }
    Rng rng = make_rng(1);
    const PosteriorModel big = simcal::testing::random_model(3, 3, rng);
    EXPECT_THROW(brute_force_bound(big, constant_functional(3, 3, 1.0), 0.0, Direction::maximize, 0.01),
                 std::invalid_argument);
}

TEST(ConvexityProbe, VacuousAndLargeSample) {
    const ProblemData data({0.0, 1.0}, CountTable::Zero(2, 3), counts(2, 3, {30000, 30000, 40000, 50000, 30000, 20000}));
    const PosteriorModel model(data, GaussianPriorSpec{});
    EXPECT_EQ(convexity_probe(model, 0.0, 0, 1).pass_fraction, 1.0);
    const ModeResult mode = find_posterior_mode(model);
    const auto r = convexity_probe(model, threshold_from_spec(ThresholdSpec::from_level(0.975), mode.log_post_star),
                                   200, 7);
    EXPECT_FALSE(r.degenerate);
    EXPECT_EQ(r.pairs_tested, 200);
    EXPECT_GE(r.pass_fraction, 0.99);
}

// An outcome with no real and no simulated counts: the bound is approached as
// p̃ → 0 there with p/p̃ held fixed, which no lattice point reaches. The solver
// must still do at least as well as the lattice.
TEST(JointBound, EmptyCellCornerDominatesLattice) {
    const ProblemData data({0.0}, counts(1, 4, {2, 0, 2, 0}), counts(1, 4, {6, 2, 3, 0}));
    const PosteriorModel model(data, GaussianPriorSpec{});
    const QueryFunctional f = indicator_functional(1, 4, 0, 0);
    const ModeResult mode = find_posterior_mode(model);
    const double log_c = threshold_from_spec(ThresholdSpec::from_level(0.975), mode.log_post_star);
    const BoundSolution hi = solve_bound(model, mode, f, log_c, Direction::maximize);
    const BoundSolution lo = solve_bound(model, mode, f, log_c, Direction::minimize);
    EXPECT_GE(hi.value, brute_force_bound(model, f, log_c, Direction::maximize, 0.005).value);
    EXPECT_LE(lo.value, brute_force_bound(model, f, log_c, Direction::minimize, 0.005).value);
    EXPECT_GE(model.log_posterior_pp(hi.p, hi.p_tilde), log_c);
    EXPECT_GE(model.log_posterior_pp(lo.p, lo.p_tilde), log_c);
}

// Queue-shaped data with empty cells at the busiest designs; the mode search
// once stalled on a face here and under-reported L* by five log units.
TEST(JointBound, ModeDominatesEveryBoundSolution) {
    const ProblemData data({5, 6, 7, 8, 9},
                           counts(5, 4, {0, 0, 0, 0, 55, 29, 9, 7, 62, 28, 8, 2, 77, 19, 4, 0, 0, 0, 0, 0}),
                           counts(5, 4, {121, 63, 42, 24, 162, 45, 29, 14, 202, 29, 13, 6, 230, 17, 3, 0,
                                         240, 7, 3, 0}));
    GaussianPriorSpec prior;
    prior.lambda_d = 0.25;
    prior.lambda_p = 0.01;
    const PosteriorModel model(data, prior);
    SolverOptions opts;
    opts.seed = 1106;
    const ModeResult mode = find_posterior_mode(model, opts);
    EXPECT_TRUE(mode.converged);
    const double log_c = threshold_from_spec(ThresholdSpec::from_level(0.975), mode.log_post_star);
    for (const auto& [design, outcome] : {std::pair{0, 0}, {0, 3}, {3, 0}, {4, 2}}) {
        const QueryFunctional f = indicator_functional(5, 4, design, outcome);
        for (Direction dir : {Direction::minimize, Direction::maximize}) {
            const BoundSolution sol = solve_bound(model, mode, f, log_c, dir, opts);
            ASSERT_EQ(sol.status, SolveStatus::optimal);
            EXPECT_LE(model.log_posterior_pp(sol.p, sol.p_tilde), mode.log_post_star + 1e-6);
            EXPECT_GE(model.log_posterior_pp(sol.p, sol.p_tilde), log_c - 1e-6);
        }
    }
}
