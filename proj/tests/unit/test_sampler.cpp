#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "simcal/sampler.hpp"
#include "support.hpp"

using namespace simcal;
using simcal::testing::counts;
using simcal::testing::identity_prior;

namespace {

// Regularised incomplete beta I_x(4, 2) = x^4 (5 − 4x).
double beta42_cdf(double x) { return std::pow(x, 4) * (5.0 - 4.0 * x); }

PosteriorModel conjugate_model() {
    const ProblemData data({0.0}, counts(1, 2, {3, 1}), counts(1, 2, {0, 0}));
    return PosteriorModel(data, identity_prior(2, 1e-9, 1e-9));
}

}  // namespace

TEST(Sampler, ConjugateInstanceMatchesBeta) {
    SamplerOptions o;
    o.n_draws = 50000;
    o.burn_in = 2000;
    o.thin = 2;
    o.seed = 3;
    const Chain chain = mh_sample(conjugate_model(), o);
    std::vector<double> x(chain.size());
    for (std::size_t k = 0; k < chain.size(); ++k) x[k] = chain.p[k](0, 0);
    std::sort(x.begin(), x.end());
    double ks = 0.0;
    const double n = static_cast<double>(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double F = beta42_cdf(x[k]);
        ks = std::max({ks, std::abs(F - k / n), std::abs(F - (k + 1) / n)});
    }
    EXPECT_LT(ks, 0.02);
    const auto f = indicator_functional(1, 2, 0, 0);
    EXPECT_NEAR(posterior_quantile(chain, f, 0.975), 0.9472550494736831, 0.01);
    EXPECT_NEAR(posterior_quantile(chain, f, 0.025), 0.2835820638819105, 0.02);
}

TEST(Sampler, DrawsAreFeasibleAndDeterministic) {
    Rng rng = make_rng(41);
    const PosteriorModel model = simcal::testing::random_model(2, 3, rng);
    SamplerOptions o;
    o.n_draws = 300;
    o.burn_in = 200;
    o.seed = 17;
    const Chain a = mh_sample(model, o);
    const Chain b = mh_sample(model, o);
    ASSERT_EQ(a.size(), 300u);
    for (std::size_t k = 0; k < a.size(); ++k) {
        const Table d = a.p[k].cwiseQuotient(a.p_tilde[k]);
        EXPECT_TRUE(validate_distribution(a.p_tilde[k]));
        EXPECT_TRUE(validate_discrepancy(d, a.p_tilde[k]));
        EXPECT_EQ(a.log_posts[k], b.log_posts[k]);
    }
    EXPECT_GT(a.acceptance_rate, 0.05);
}

TEST(Sampler, StrongPriorConcentratesDiscrepancyAtOne) {
    const ProblemData data({0.0, 1.0}, CountTable::Zero(2, 3), CountTable::Zero(2, 3));
    GaussianPriorSpec prior;
    prior.lambda_d = 1e4;
    const Chain chain = mh_sample(PosteriorModel(data, prior), 10000, 1000, 0.1, 5);
    Table mean = Table::Zero(2, 3);
    for (std::size_t k = 0; k < chain.size(); ++k) mean += chain.p[k].cwiseQuotient(chain.p_tilde[k]);
    mean /= static_cast<double>(chain.size());
    EXPECT_LT((mean - Table::Ones(2, 3)).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Sampler, TinyStepsAreAlmostAlwaysAccepted) {
    SamplerOptions o;
    o.n_draws = 500;
    o.burn_in = 0;
    o.adapt = false;
    o.step_scale = 1e-7;
    const Chain chain = mh_sample(conjugate_model(), o);
    EXPECT_GT(chain.acceptance_rate, 0.99);
    EXPECT_NEAR(chain.p.back()(0, 0), chain.p.front()(0, 0), 1e-4);
}

TEST(Sampler, QuantileDefinitions) {
    Chain c;
    c.p = {Table::Constant(1, 2, 0.5), Table::Constant(1, 2, 0.5)};
    c.p[0](0, 0) = 0.2;
    c.p[0](0, 1) = 0.8;
    c.p[1](0, 0) = 0.6;
    c.p[1](0, 1) = 0.4;
    c.p_tilde = c.p;
    c.log_posts = {0.0, 0.0};
    const auto f = indicator_functional(1, 2, 0, 0);
    EXPECT_NEAR(posterior_quantile(c, f, 0.5), 0.4, 1e-15);
    QueryFunctional one;
    one.z = Table::Constant(1, 2, 3.0);
    for (double a : {0.0, 0.3, 1.0}) EXPECT_NEAR(posterior_quantile(c, one, a), 3.0, 1e-12);
    EXPECT_THROW(posterior_quantile(c, f, 1.5), std::invalid_argument);
    EXPECT_THROW(posterior_quantile(Chain{}, f, 0.5), std::invalid_argument);
}

TEST(Sampler, EffectiveSampleSize) {
    Rng rng = make_rng(2);
    std::normal_distribution<double> nd;
    std::vector<double> iid(4000), ar(4000);
    double x = 0.0;
    for (std::size_t k = 0; k < iid.size(); ++k) {
        iid[k] = nd(rng);
        x = 0.9 * x + nd(rng);
        ar[k] = x;
    }
    EXPECT_GT(effective_sample_size(iid), 2500.0);
    // AR(1) with φ = 0.9: ESS ≈ n (1−φ)/(1+φ) ≈ 210.
    EXPECT_NEAR(effective_sample_size(ar), 210.0, 120.0);
}

TEST(Sampler, ChainCsvHasOneRowPerDraw) {
    const Chain chain = mh_sample(conjugate_model(), 10, 10, 0.1, 1);
    std::ostringstream out;
    write_chain_csv(chain, out);
    const std::string text = out.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 11);
    EXPECT_EQ(text.rfind("draw,p_0_0,p_0_1,pt_0_0,pt_0_1,log_post\n", 0), 0u);
}
