#include "simcal/random.hpp"

#include <stdexcept>

namespace simcal {

Table dirichlet_rows(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::exponential_distribution<double> unit(1.0);
    Table t(rows, cols);
    for (Eigen::Index j = 0; j < rows; ++j) {
        for (Eigen::Index i = 0; i < cols; ++i) t(j, i) = unit(rng);
        t.row(j) /= t.row(j).sum();
    }
    return t;
}

std::vector<std::int64_t> multinomial(std::int64_t trials, const std::vector<double>& probs, Rng& rng) {
    if (trials < 0) throw std::invalid_argument("multinomial trials must be nonnegative");
    std::vector<std::int64_t> out(probs.size(), 0);
    double remaining_mass = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw std::invalid_argument("multinomial probabilities must be nonnegative");
        remaining_mass += p;
    }
    std::int64_t remaining = trials;
    for (std::size_t k = 0; k + 1 < probs.size() && remaining > 0; ++k) {
        const double share = remaining_mass > 0.0 ? std::min(1.0, probs[k] / remaining_mass) : 0.0;
        std::binomial_distribution<std::int64_t> draw(remaining, share);
        out[k] = draw(rng);
        remaining -= out[k];
        remaining_mass -= probs[k];
    }
    if (!probs.empty()) out.back() += remaining;
    return out;
}

}  // namespace simcal
