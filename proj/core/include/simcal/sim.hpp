#pragma once

#include <cstdint>
#include <vector>

#include "simcal/types.hpp"

namespace simcal {

/// How arrival_rate_mean / arrival_rate_var describe the daily lognormal rate.
enum class LognormalParameterisation {
    moments,     // mean and variance of the lognormal variable itself
    log_scale,   // mean and variance of the underlying normal
};

/// x-server FCFS call centre with a random daily arrival rate and
/// exponential patience. Times are in minutes.
struct CallCenterConfig {
    double arrival_rate_mean = 1.8;
    double arrival_rate_var = 0.4;
    LognormalParameterisation rate_parameterisation = LognormalParameterisation::moments;
    bool random_arrival_rate = true;  // false: the rate is fixed at arrival_rate_mean
    double service_mean = 3.5;
    bool abandonment = true;
    double abandon_mean = 5.0;
    bool count_abandoned = false;  // include abandoning customers' waits in the average
    double horizon = 60.0;
    double warmup = 60.0;
    std::vector<double> bins{1.0, 2.0, 3.0};  // left-closed cut points
    int servers = 7;

    int outcomes() const { return static_cast<int>(bins.size()) + 1; }
    void validate() const;
};

/// Base call centre plus staff breaks driven by a Poisson event stream.
struct TrueModelConfig {
    CallCenterConfig base;
    double break_interarrival_mean = 5.0;
    double break_duration_mean = 30.0;
    int break_trigger_idle = 5;  // at an event, ≥ this many idle → all idle servers take a break
    int stop_trigger_idle = 7;   // idle beyond this many stop for the rest of the run

    void validate() const;
};

/// Randomised design allocation: each observation picks design j with
/// probability xi_j, then an outcome from pi_j.
struct SyntheticScheme {
    Table pi;
    std::vector<double> xi;
    std::int64_t n_total = 0;

    void validate() const;
};

struct ReplicationStats {
    double average_wait = 0.0;  // 0 when nobody entered service in the window
    double total_wait = 0.0;
    std::int64_t served = 0;
    std::int64_t abandoned = 0;
};

/// Bin index under left-closed, right-open intervals [0,b0), [b0,b1), …, [b_last, ∞).
int waiting_time_bin(double wait, const std::vector<double>& bins);

std::vector<ReplicationStats> simulate_call_center_waits(const CallCenterConfig& cfg, std::int64_t reps,
                                                         std::uint64_t seed);
std::vector<ReplicationStats> simulate_true_system_waits(const TrueModelConfig& cfg, std::int64_t reps,
                                                         std::uint64_t seed);

/// Customer-weighted mean wait pooled over replications (total wait / total served).
double pooled_mean_wait(const std::vector<ReplicationStats>& reps);

/// Binned replication-average waiting times (length m = bins + 1).
std::vector<std::int64_t> simulate_call_center(const CallCenterConfig& cfg, std::int64_t reps, std::uint64_t seed);
std::vector<std::int64_t> simulate_true_system(const TrueModelConfig& cfg, std::int64_t reps, std::uint64_t seed);

/// Real-system counts (s × m) drawn under the scheme.
CountTable sample_multinomial_dataset(const SyntheticScheme& scheme, std::uint64_t seed);

}  // namespace simcal
