#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace simcal {

// s×m tables are row-major so that flattening is design-major: all outcomes
// of design 0, then all outcomes of design 1, and so on.
using Table = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CountTable = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kValidityTolerance = 1e-9;

/// Flattened design-major view of a table.
inline Eigen::Map<const Vector> flat(const Table& t) {
    return {t.data(), t.size()};
}
inline Eigen::Map<Vector> flat(Table& t) {
    return {t.data(), t.size()};
}

}  // namespace simcal
