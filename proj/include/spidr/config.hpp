#pragma once

#include <cstddef>

namespace spidr {

using Index = std::ptrdiff_t;

/// Numerical tolerances shared across the library. One instance is
/// usually enough; pass a modified copy where a caller needs tighter or
/// looser behaviour.
struct Tolerances {
    double standardize_rel = 1e-10;   ///< accepted relative error in ||x_j||^2 = n
    double constant_column = 1e-12;   ///< sd below this (relative) marks a column constant
    double cd_coef_change = 1e-7;     ///< CD stops when max |delta b| falls below this
    long cd_max_sweeps = 100000;      ///< coordinate sweeps before giving up
    double kkt = 1e-6;                ///< stationarity slack accepted by kkt checks
    double collinear_rel = 1e-10;     ///< x_j'Q x_j <= collinear_rel * n flags collinearity
    double rank_rel = 1e-10;          ///< relative pivot threshold for min-norm solves
    double dead_column = 1e-12;       ///< curvature below this excludes a column from CD
};

inline const Tolerances& default_tolerances() {
    static const Tolerances tol{};
    return tol;
}

}  // namespace spidr
