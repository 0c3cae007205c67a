#include "simcal/simplex.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <vector>

namespace simcal {

// Sort-based projection (Held, Wolfe & Crowder) onto {v ≥ floor, Σ v = 1}.
void project_to_simplex(Eigen::Ref<Vector> v, double floor) {
    const auto m = v.size();
    const double mass = 1.0 - floor * static_cast<double>(m);
    if (!(mass > 0.0)) throw std::invalid_argument("simplex floor too large for the dimension");

    // Shifting by the maximum leaves the projection unchanged and keeps the
    // partial sums small when v carries a long gradient step.
    const double top = v.maxCoeff();
    std::vector<double> u(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) u[static_cast<std::size_t>(i)] = v(i) - top;
    std::vector<double> sorted = u;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());

    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        cumulative += sorted[k];
        const double candidate = (cumulative - mass) / static_cast<double>(k + 1);
        if (sorted[k] - candidate > 0.0) theta = candidate;
    }
    for (Eigen::Index i = 0; i < m; ++i) v(i) = std::max(u[static_cast<std::size_t>(i)] - theta, 0.0) + floor;
    // Rounding residue goes to the largest entry, which is at least 1/m.
    Eigen::Index largest = 0;
    v.maxCoeff(&largest);
    v(largest) -= v.sum() - 1.0;
}

void project_rows_to_simplex(Table& t, double floor) {
    Vector row(t.cols());
    for (Eigen::Index j = 0; j < t.rows(); ++j) {
        row = t.row(j).transpose();
        project_to_simplex(row, floor);
        t.row(j) = row.transpose();
    }
}

}  // namespace simcal
