#pragma once

namespace simcal {

/// Standard normal CDF.
double normal_cdf(double x);

/// Inverse standard normal CDF (Wichura's AS241 rational approximation,
/// relative accuracy about 1e-16). Throws std::invalid_argument unless 0 < q < 1.
double normal_quantile(double q);

}  // namespace simcal
