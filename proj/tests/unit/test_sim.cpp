#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "simcal/sim.hpp"
#include "support.hpp"

using namespace simcal;

namespace {

std::int64_t total(const std::vector<std::int64_t>& c) { return std::accumulate(c.begin(), c.end(), std::int64_t{0}); }

}  // namespace

TEST(WaitingBins, LeftClosedIntervals) {
    const std::vector<double> bins{1.0, 2.0, 3.0};
    EXPECT_EQ(waiting_time_bin(0.0, bins), 0);
    EXPECT_EQ(waiting_time_bin(0.999, bins), 0);
    EXPECT_EQ(waiting_time_bin(1.0, bins), 1);
    EXPECT_EQ(waiting_time_bin(2.5, bins), 2);
    EXPECT_EQ(waiting_time_bin(3.0, bins), 3);
    EXPECT_EQ(waiting_time_bin(1e9, bins), 3);
}

TEST(CallCenter, ZeroReplications) {
    EXPECT_EQ(simulate_call_center(CallCenterConfig{}, 0, 1), std::vector<std::int64_t>(4, 0));
    EXPECT_EQ(simulate_true_system(TrueModelConfig{}, 0, 1), std::vector<std::int64_t>(4, 0));
}

TEST(CallCenter, CountsSumToReplicationsAndAreReproducible) {
    CallCenterConfig cfg;
    cfg.servers = 6;
    const auto a = simulate_call_center(cfg, 300, 9);
    EXPECT_EQ(total(a), 300);
    EXPECT_EQ(a, simulate_call_center(cfg, 300, 9));
    EXPECT_NE(a, simulate_call_center(cfg, 300, 10));
}

TEST(CallCenter, ManyServersMeanNoQueueing) {
    CallCenterConfig cfg;
    cfg.servers = 500;
    const auto c = simulate_call_center(cfg, 200, 4);
    EXPECT_EQ(c[0], 200);
}

TEST(CallCenter, MM1MeanWait) {
    CallCenterConfig cfg;
    cfg.random_arrival_rate = false;
    cfg.arrival_rate_mean = 0.5;
    cfg.service_mean = 1.0;
    cfg.servers = 1;
    cfg.abandonment = false;
    const double lambda = 0.5, mu = 1.0;
    const double wq = lambda / (mu * (mu - lambda));
    EXPECT_NEAR(pooled_mean_wait(simulate_call_center_waits(cfg, 20000, 3)), wq, 0.05 * wq);
}

TEST(CallCenter, AbandonmentShortensWaits) {
    CallCenterConfig cfg;
    cfg.servers = 5;
    cfg.abandonment = false;
    const double without = pooled_mean_wait(simulate_call_center_waits(cfg, 2000, 5));
    cfg.abandonment = true;
    const auto with_reps = simulate_call_center_waits(cfg, 2000, 5);
    EXPECT_LT(pooled_mean_wait(with_reps), without);
    std::int64_t abandoned = 0;
    for (const auto& r : with_reps) abandoned += r.abandoned;
    EXPECT_GT(abandoned, 0);
}

TEST(CallCenter, LogScaleParameterisationChangesRate) {
    CallCenterConfig a;
    a.servers = 6;
    CallCenterConfig b = a;
    b.rate_parameterisation = LognormalParameterisation::log_scale;  // mean rate e^{1.8+0.2}: heavy load
    EXPECT_GT(pooled_mean_wait(simulate_call_center_waits(b, 500, 1)),
              pooled_mean_wait(simulate_call_center_waits(a, 500, 1)));
}

TEST(CallCenter, ConfigValidation) {
    CallCenterConfig cfg;
    cfg.bins = {1.0, 1.0};
    EXPECT_THROW(simulate_call_center(cfg, 1, 1), std::invalid_argument);
    cfg = CallCenterConfig{};
    cfg.servers = 0;
    EXPECT_THROW(simulate_call_center(cfg, 1, 1), std::invalid_argument);
    TrueModelConfig t;
    t.stop_trigger_idle = t.break_trigger_idle;
    EXPECT_THROW(simulate_true_system(t, 1, 1), std::invalid_argument);
}

TEST(TrueSystem, UnreachableBreakTriggerMatchesBaseModel) {
    TrueModelConfig t;
    t.base.servers = 7;
    t.break_trigger_idle = 8;
    t.stop_trigger_idle = 9;
    EXPECT_EQ(simulate_true_system(t, 500, 21), simulate_call_center(t.base, 500, 21));
}

TEST(TrueSystem, BreaksSlowServiceAtHighStaffing) {
    TrueModelConfig t;
    t.base.servers = 8;
    const auto base = simulate_call_center(t.base, 10000, 2);
    const auto truth = simulate_true_system(t, 10000, 2);
    EXPECT_EQ(total(truth), 10000);
    EXPECT_GT(truth[1] + truth[2] + truth[3], base[1] + base[2] + base[3]);
}

TEST(Multinomial, DegenerateAndEmpty) {
    SyntheticScheme s;
    s.pi = simcal::testing::table(2, 3, {1, 0, 0, 1, 0, 0});
    s.xi = {0.3, 0.7};
    s.n_total = 500;
    const CountTable c = sample_multinomial_dataset(s, 1);
    EXPECT_EQ(c.col(0).sum(), 500);
    EXPECT_EQ(c.rightCols(2).sum(), 0);
    s.n_total = 0;
    EXPECT_EQ(sample_multinomial_dataset(s, 1).sum(), 0);
}

TEST(Multinomial, CellMeansMatchBinomialMoments) {
    SyntheticScheme s;
    s.pi = simcal::testing::table(2, 3, {0.2, 0.3, 0.5, 0.5, 0.3, 0.2});
    s.xi = {0.4, 0.6};
    s.n_total = 1000;
    Table sum = Table::Zero(2, 3);
    const int reps = 200;
    for (int r = 0; r < reps; ++r) sum += sample_multinomial_dataset(s, static_cast<std::uint64_t>(r)).cast<double>();
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 3; ++i) {
            const double pr = s.xi[j] * s.pi(j, i);
            const double mean = s.n_total * pr;
            const double se = std::sqrt(s.n_total * pr * (1 - pr) / reps);
            EXPECT_NEAR(sum(j, i) / reps, mean, 3 * se) << j << "," << i;
        }
}

TEST(Multinomial, SchemeValidation) {
    SyntheticScheme s;
    s.pi = simcal::testing::table(1, 2, {0.5, 0.5});
    s.xi = {0.9};
    EXPECT_THROW(sample_multinomial_dataset(s, 1), std::invalid_argument);
    s.xi = {1.0, 0.0};
    EXPECT_THROW(sample_multinomial_dataset(s, 1), std::invalid_argument);
}
