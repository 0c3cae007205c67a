#include <gtest/gtest.h>

#include "simcal/mode.hpp"
#include "support.hpp"

using namespace simcal;
using simcal::testing::counts;
using simcal::testing::identity_prior;

TEST(Mode, ZeroCountsReturnPriorMean) {
    const ProblemData data({0.0, 1.0}, CountTable::Zero(2, 3), CountTable::Zero(2, 3));
    const PosteriorModel model(data, GaussianPriorSpec{});
    const ModeResult r = find_posterior_mode(model);
    EXPECT_TRUE(r.converged);
    EXPECT_LT((r.d_star.values - Table::Ones(2, 3)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((r.p_tilde_star.values - Table::Constant(2, 3, 1.0 / 3)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(r.log_post_star, 0.0, 1e-10);
}

TEST(Mode, FlatPriorLimitIsEmpiricalFrequency) {
    const ProblemData data({0.0}, counts(1, 2, {3, 1}), counts(1, 2, {1, 1}));
    const PosteriorModel model(data, identity_prior(2, 1e-9, 1e-9));
    const ModeResult r = find_posterior_mode(model);
    EXPECT_NEAR(r.p_star.values(0, 0), 0.75, 1e-3);
    EXPECT_NEAR(r.p_tilde_star.values(0, 0), 0.5, 1e-3);
}

TEST(Mode, StrongDiscrepancyPriorPinsDToOne) {
    const ProblemData data({0.0}, counts(1, 2, {30, 10}), counts(1, 2, {10, 30}));
    const PosteriorModel model(data, identity_prior(2, 1e6, 0.01));
    const ModeResult r = find_posterior_mode(model);
    EXPECT_LT((r.d_star.values - Table::Ones(1, 2)).cwiseAbs().maxCoeff(), 1e-3);
    EXPECT_LT((r.p_star.values - r.p_tilde_star.values).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Mode, MatchesGridOracleValue) {
    const ProblemData data({0.0}, counts(1, 2, {3, 1}), counts(1, 2, {50, 50}));
    const PosteriorModel model(data, identity_prior(2, 0.25, 0.01));
    const ModeResult r = find_posterior_mode(model);
    EXPECT_NEAR(r.log_post_star, -71.66732585962892, 1e-3);
}

TEST(Mode, FeasibleAndNotWorseThanSmoothedStart) {
    Rng rng = make_rng(12);
    for (int rep = 0; rep < 10; ++rep) {
        const PosteriorModel model = simcal::testing::random_model(2 + rep % 2, 3, rng);
        const ModeResult r = find_posterior_mode(model);
        EXPECT_TRUE(validate_distribution(r.p_tilde_star.values, 1e-7));
        EXPECT_TRUE(validate_discrepancy(r.d_star.values, r.p_tilde_star.values, 1e-7));
        EXPECT_NEAR(r.log_post_star, model.log_posterior(r.d_star.values, r.p_tilde_star.values), 1e-12);
        Table p, pt;
        smoothed_frequencies(model.data(), p, pt);
        EXPECT_GE(r.log_post_star, model.log_posterior_pp(p, pt) - 1e-12);
    }
}

TEST(Mode, DeterministicGivenSeed) {
    Rng rng = make_rng(13);
    const PosteriorModel model = simcal::testing::random_model(2, 3, rng);
    SolverOptions o;
    o.seed = 99;
    const ModeResult a = find_posterior_mode(model, o);
    const ModeResult b = find_posterior_mode(model, o);
    EXPECT_EQ(a.log_post_star, b.log_post_star);
    EXPECT_TRUE((a.p_star.values.array() == b.p_star.values.array()).all());
}

TEST(Mode, FixedStepRuleRuns) {
    const ProblemData data({0.0}, counts(1, 2, {3, 1}), counts(1, 2, {5, 5}));
    const PosteriorModel model(data, identity_prior(2, 0.25, 0.01));
    SolverOptions o;
    o.step_rule = StepRule::fixed;
    o.fixed_step = 1e-3;
    const ModeResult fixed = find_posterior_mode(model, o);
    const ModeResult bt = find_posterior_mode(model);
    EXPECT_NEAR(fixed.log_post_star, bt.log_post_star, 1e-4);
}

TEST(SolverOptionsTest, Validation) {
    SolverOptions o;
    EXPECT_NO_THROW(o.validate());
    o.max_iterations = 0;
    EXPECT_THROW(o.validate(), std::invalid_argument);
    o = SolverOptions{};
    o.gradient_tolerance = 0.0;
    EXPECT_THROW(o.validate(), std::invalid_argument);
    o = SolverOptions{};
    o.interior_floor = -1.0;
    EXPECT_THROW(o.validate(), std::invalid_argument);
}
