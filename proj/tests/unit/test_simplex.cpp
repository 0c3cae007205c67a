#include <gtest/gtest.h>

#include "simcal/random.hpp"
#include "simcal/simplex.hpp"

using namespace simcal;

TEST(SimplexProjection, FixedPointOnSimplex) {
    Vector v(3);
    v << 0.2, 0.3, 0.5;
    const Vector before = v;
    project_to_simplex(v, 0.0);
    EXPECT_LT((v - before).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(SimplexProjection, KnownProjection) {
    Vector v(3);
    v << 1.0, 1.0, -1.0;
    project_to_simplex(v, 0.0);
    EXPECT_NEAR(v(0), 0.5, 1e-15);
    EXPECT_NEAR(v(1), 0.5, 1e-15);
    EXPECT_NEAR(v(2), 0.0, 1e-15);
}

TEST(SimplexProjection, RespectsFloorAndSum) {
    Rng rng = make_rng(3);
    std::normal_distribution<double> nd(0.0, 3.0);
    for (int rep = 0; rep < 200; ++rep) {
        Table t(3, 4);
        for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = nd(rng);
        project_rows_to_simplex(t, 1e-6);
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(t.row(j).sum(), 1.0, 1e-12);
        EXPECT_GE(t.minCoeff(), 1e-6 - 1e-15);
    }
}

TEST(Random, DirichletRowsAreDistributions) {
    Rng rng = make_rng(1);
    const Table t = dirichlet_rows(5, 4, rng);
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(t.row(j).sum(), 1.0, 1e-12);
    EXPECT_GT(t.minCoeff(), 0.0);
}

TEST(Random, MultinomialSumsToTrials) {
    Rng rng = make_rng(2);
    const auto c = multinomial(1234, {0.1, 0.0, 0.6, 0.3}, rng);
    EXPECT_EQ(c[0] + c[1] + c[2] + c[3], 1234);
    EXPECT_EQ(c[1], 0);
}

TEST(Random, MixSeedSeparatesStreams) {
    EXPECT_NE(mix_seed(0, 0), mix_seed(0, 1));
    EXPECT_NE(mix_seed(0, 1), mix_seed(1, 0));
    EXPECT_EQ(mix_seed(7, 3), mix_seed(7, 3));
}
