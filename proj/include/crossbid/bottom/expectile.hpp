#pragma once

#include <cmath>

#include "crossbid/core/error.hpp"

namespace crossbid::bottom {

/// Asymmetric l2 loss: L2^rho(u) = |rho - 1(u <= 0)| * u^2.
inline double expectile_loss(double u, double rho) {
    CB_REQUIRE(rho > 0.0 && rho < 1.0, "expectile_loss: rho must lie in (0,1), got ", rho);
    const double w = std::abs(rho - (u <= 0.0 ? 1.0 : 0.0));
    return w * u * u;
}

inline double expectile_weight(double u, double rho) {
    return std::abs(rho - (u <= 0.0 ? 1.0 : 0.0));
}

/// Scalar rho-expectile of an empirical sample, solved by bisection; the
/// independent oracle for value-learning tests.
template <typename It>
double scalar_expectile(It first, It last, double rho) {
    double lo = *std::min_element(first, last);
    double hi = *std::max_element(first, last);
    auto imbalance = [&](double v) {
        double s = 0.0;
        for (It it = first; it != last; ++it) {
            const double u = *it - v;
            s += std::abs(rho - (u <= 0.0 ? 1.0 : 0.0)) * u;
        }
        return s;
    };
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (imbalance(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace crossbid::bottom
