#include "simcal/sim.hpp"

#include <cassert>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <stdexcept>

#include "simcal/posterior.hpp"
#include "simcal/random.hpp"

namespace simcal {
namespace {

constexpr double kNever = std::numeric_limits<double>::infinity();

enum class EventKind { arrival, departure, break_event, break_end };
enum class ServerState { idle, busy, on_break, stopped };

struct Event {
    double time;
    std::uint64_t seq;  // FIFO among simultaneous events
    EventKind kind;
    int server;

    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

struct Waiting {
    double arrival;
    double deadline;
};

struct BreakRules {
    double interarrival_mean;
    double duration_mean;
    int break_trigger;
    int stop_trigger;
};

class Queueing {
public:
    Queueing(const CallCenterConfig& cfg, const BreakRules* breaks, std::uint64_t seed, std::uint64_t rep)
        : cfg_(cfg), breaks_(breaks), rng_(make_rng(seed, rep)),
          break_rng_(make_rng(seed ^ 0x6b7265616bULL, rep)),
          state_(static_cast<std::size_t>(cfg.servers), ServerState::idle) {}

    ReplicationStats run() {
        const double rate = daily_rate();
        end_ = cfg_.warmup + cfg_.horizon;
        schedule(exponential(rng_, 1.0 / rate), EventKind::arrival, -1);
        if (breaks_) schedule(exponential(break_rng_, breaks_->interarrival_mean), EventKind::break_event, -1);

        while (!events_.empty()) {
            const Event ev = events_.top();
            events_.pop();
            if (ev.time > end_) break;
            assert(ev.time >= now_ && "event clock went backwards");
            now_ = ev.time;
            switch (ev.kind) {
                case EventKind::arrival: on_arrival(rate); break;
                case EventKind::departure: release(ev.server); break;
                case EventKind::break_event: on_break_event(); break;
                case EventKind::break_end:
                    if (state_[static_cast<std::size_t>(ev.server)] == ServerState::on_break) release(ev.server);
                    break;
            }
        }
        // Customers still queued whose patience ran out inside the window.
        for (const Waiting& w : queue_) {
            if (w.deadline <= end_) note_abandonment(w);
        }
        stats_.average_wait = stats_.served > 0 ? stats_.total_wait / static_cast<double>(stats_.served) : 0.0;
        return stats_;
    }

private:
    static double exponential(Rng& rng, double mean) {
        std::exponential_distribution<double> d(1.0 / mean);
        return d(rng);
    }

    double daily_rate() {
        if (!cfg_.random_arrival_rate) return cfg_.arrival_rate_mean;
        double mu = cfg_.arrival_rate_mean;
        double sigma2 = cfg_.arrival_rate_var;
        if (cfg_.rate_parameterisation == LognormalParameterisation::moments) {
            const double m2 = cfg_.arrival_rate_mean * cfg_.arrival_rate_mean;
            sigma2 = std::log(1.0 + cfg_.arrival_rate_var / m2);
            mu = std::log(m2 / std::sqrt(cfg_.arrival_rate_var + m2));
        }
        std::lognormal_distribution<double> d(mu, std::sqrt(sigma2));
        return d(rng_);
    }

    void schedule(double delay, EventKind kind, int server) {
        events_.push(Event{now_ + delay, seq_++, kind, server});
    }

    bool in_window(double t) const { return t >= cfg_.warmup && t < end_; }

    void note_abandonment(const Waiting& w) {
        if (!in_window(w.deadline)) return;
        ++stats_.abandoned;
        if (cfg_.count_abandoned) {
            stats_.total_wait += w.deadline - w.arrival;
            ++stats_.served;
        }
    }

    void start_service(int server, const Waiting& w) {
        state_[static_cast<std::size_t>(server)] = ServerState::busy;
        if (in_window(now_)) {
            stats_.total_wait += now_ - w.arrival;
            ++stats_.served;
        }
        schedule(exponential(rng_, cfg_.service_mean), EventKind::departure, server);
    }

    // Server becomes available: serve the first patient customer or go idle.
    void release(int server) {
        while (!queue_.empty() && queue_.front().deadline < now_) {
            note_abandonment(queue_.front());
            queue_.pop_front();
        }
        if (queue_.empty()) {
            state_[static_cast<std::size_t>(server)] = ServerState::idle;
            return;
        }
        const Waiting w = queue_.front();
        queue_.pop_front();
        start_service(server, w);
    }

    void on_arrival(double rate) {
        schedule(exponential(rng_, 1.0 / rate), EventKind::arrival, -1);
        const double patience = cfg_.abandonment ? exponential(rng_, cfg_.abandon_mean) : kNever;
        const Waiting w{now_, now_ + patience};
        for (std::size_t k = 0; k < state_.size(); ++k) {
            if (state_[k] == ServerState::idle) {
                start_service(static_cast<int>(k), w);
                return;
            }
        }
        queue_.push_back(w);
    }

    void on_break_event() {
        schedule(exponential(break_rng_, breaks_->interarrival_mean), EventKind::break_event, -1);
        std::vector<int> idle;
        for (std::size_t k = 0; k < state_.size(); ++k) {
            if (state_[k] == ServerState::idle) idle.push_back(static_cast<int>(k));
        }
        while (static_cast<int>(idle.size()) > breaks_->stop_trigger) {
            state_[static_cast<std::size_t>(idle.back())] = ServerState::stopped;
            idle.pop_back();
        }
        if (static_cast<int>(idle.size()) >= breaks_->break_trigger) {
            for (int k : idle) {
                state_[static_cast<std::size_t>(k)] = ServerState::on_break;
                schedule(exponential(break_rng_, breaks_->duration_mean), EventKind::break_end, k);
            }
        }
    }

    const CallCenterConfig& cfg_;
    const BreakRules* breaks_;
    Rng rng_;
    Rng break_rng_;
    std::vector<ServerState> state_;
    std::deque<Waiting> queue_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;
    double end_ = 0.0;
    ReplicationStats stats_;
};

std::vector<std::int64_t> bin_counts(const std::vector<ReplicationStats>& reps, const std::vector<double>& bins) {
    std::vector<std::int64_t> counts(bins.size() + 1, 0);
    for (const auto& r : reps) ++counts[static_cast<std::size_t>(waiting_time_bin(r.average_wait, bins))];
    return counts;
}

}  // namespace

void CallCenterConfig::validate() const {
    if (!(arrival_rate_mean > 0.0) || !(arrival_rate_var >= 0.0) || !(service_mean > 0.0) ||
        !(abandon_mean > 0.0) || !(horizon > 0.0) || !(warmup >= 0.0)) {
        throw std::invalid_argument("call centre rates and durations must be positive");
    }
    if (servers < 1) throw std::invalid_argument("call centre needs at least one server");
    if (bins.empty()) throw std::invalid_argument("at least one waiting-time cut point is required");
    for (std::size_t k = 0; k < bins.size(); ++k) {
        if (!(bins[k] > 0.0) || (k > 0 && !(bins[k] > bins[k - 1]))) {
            throw std::invalid_argument("waiting-time cut points must be positive and strictly increasing");
        }
    }
}

void TrueModelConfig::validate() const {
    base.validate();
    if (!(break_interarrival_mean > 0.0) || !(break_duration_mean > 0.0)) {
        throw std::invalid_argument("break process means must be positive");
    }
    if (break_trigger_idle < 1 || stop_trigger_idle < 1) throw std::invalid_argument("break triggers must be positive");
    if (stop_trigger_idle <= break_trigger_idle) {
        throw std::invalid_argument("stop trigger must exceed the break trigger");
    }
}

void SyntheticScheme::validate() const {
    if (!validate_distribution(pi)) throw std::invalid_argument("scheme pi rows must be valid distributions");
    if (static_cast<Eigen::Index>(xi.size()) != pi.rows()) {
        throw std::invalid_argument("scheme xi must have one entry per design");
    }
    double total = 0.0;
    for (double v : xi) {
        if (!(v >= 0.0)) throw std::invalid_argument("scheme xi must be nonnegative");
        total += v;
    }
    if (std::abs(total - 1.0) > kValidityTolerance) throw std::invalid_argument("scheme xi must sum to 1");
    if (n_total < 0) throw std::invalid_argument("n_total must be nonnegative");
}

int waiting_time_bin(double wait, const std::vector<double>& bins) {
    int k = 0;
    while (k < static_cast<int>(bins.size()) && wait >= bins[static_cast<std::size_t>(k)]) ++k;
    return k;
}

std::vector<ReplicationStats> simulate_call_center_waits(const CallCenterConfig& cfg, std::int64_t reps,
                                                         std::uint64_t seed) {
    cfg.validate();
    std::vector<ReplicationStats> out;
    out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(reps, 0)));
    for (std::int64_t r = 0; r < reps; ++r) {
        out.push_back(Queueing(cfg, nullptr, seed, static_cast<std::uint64_t>(r)).run());
    }
    return out;
}

std::vector<ReplicationStats> simulate_true_system_waits(const TrueModelConfig& cfg, std::int64_t reps,
                                                         std::uint64_t seed) {
    cfg.validate();
    const BreakRules rules{cfg.break_interarrival_mean, cfg.break_duration_mean, cfg.break_trigger_idle,
                           cfg.stop_trigger_idle};
    std::vector<ReplicationStats> out;
    out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(reps, 0)));
    for (std::int64_t r = 0; r < reps; ++r) {
        out.push_back(Queueing(cfg.base, &rules, seed, static_cast<std::uint64_t>(r)).run());
    }
    return out;
}

double pooled_mean_wait(const std::vector<ReplicationStats>& reps) {
    double total = 0.0;
    std::int64_t served = 0;
    for (const auto& r : reps) {
        total += r.total_wait;
        served += r.served;
    }
    return served > 0 ? total / static_cast<double>(served) : 0.0;
}

std::vector<std::int64_t> simulate_call_center(const CallCenterConfig& cfg, std::int64_t reps, std::uint64_t seed) {
    return bin_counts(simulate_call_center_waits(cfg, reps, seed), cfg.bins);
}

std::vector<std::int64_t> simulate_true_system(const TrueModelConfig& cfg, std::int64_t reps, std::uint64_t seed) {
    return bin_counts(simulate_true_system_waits(cfg, reps, seed), cfg.base.bins);
}

CountTable sample_multinomial_dataset(const SyntheticScheme& scheme, std::uint64_t seed) {
    scheme.validate();
    const auto s = scheme.pi.rows();
    const auto m = scheme.pi.cols();
    Rng rng = make_rng(seed, 0);
    const std::vector<std::int64_t> per_design = multinomial(scheme.n_total, scheme.xi, rng);
    CountTable counts = CountTable::Zero(s, m);
    for (Eigen::Index j = 0; j < s; ++j) {
        const std::vector<double> probs(scheme.pi.row(j).data(), scheme.pi.row(j).data() + m);
        const auto row = multinomial(per_design[static_cast<std::size_t>(j)], probs, rng);
        for (Eigen::Index i = 0; i < m; ++i) counts(j, i) = row[static_cast<std::size_t>(i)];
    }
    return counts;
}

}  // namespace simcal
