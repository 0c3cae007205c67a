#pragma once

#include "simcal/types.hpp"

namespace simcal {

/// Euclidean projection of each row of `t` onto {x : x ≥ floor, Σ x = 1}.
/// Requires floor · cols < 1.
void project_rows_to_simplex(Table& t, double floor = 0.0);

/// Projection of a single vector onto the shifted simplex.
void project_to_simplex(Eigen::Ref<Vector> v, double floor = 0.0);

}  // namespace simcal
