#pragma once

#include <Eigen/Core>
#include <cmath>
#include <numeric>
#include <vector>

#include "crossbid/core/error.hpp"

namespace crossbid::top {

using Vec = Eigen::VectorXd;

/// Per-channel budget fractions of an advertiser's daily budget (the
/// top-level action). Always grid-aligned and feasible after
/// discretize_and_mask.
struct AllocationAction {
    std::vector<double> fractions; // length P, each in [0,1], sum <= 1

    double sum() const { return std::accumulate(fractions.begin(), fractions.end(), 0.0); }

    std::vector<double> amounts(double daily_budget) const {
        std::vector<double> out(fractions.size());
        for (std::size_t p = 0; p < fractions.size(); ++p) out[p] = fractions[p] * daily_budget;
        return out;
    }

    Vec as_vec() const {
        return Eigen::Map<const Vec>(fractions.data(), static_cast<Eigen::Index>(fractions.size()));
    }

    static AllocationAction from_vec(const Vec& v) {
        AllocationAction a;
        a.fractions.assign(v.data(), v.data() + v.size());
        return a;
    }
};

/// Snaps a continuous allocation onto the grid and projects it into the
/// feasible set {sum <= allowed_total}: clamp to [0,1], round each coordinate
/// to the nearest grid point, then remove one grid step at a time, always
/// from the coordinate that has given up the least so far (ties toward the
/// highest index). Spreading the decrements evenly is the L2 projection of
/// the rounded point onto the feasible lattice, which matches the
/// nearest-feasible-grid-point oracle.
inline AllocationAction discretize_and_mask(const Vec& b_cont, double grid_step,
                                            double allowed_total) {
    CB_REQUIRE(grid_step > 0.0, "discretize_and_mask: grid step must be positive");
    const double inv = 1.0 / grid_step;
    CB_REQUIRE(std::abs(inv - std::round(inv)) < 1e-9,
               "discretize_and_mask: grid step must divide 1, got ", grid_step);
    const long max_units = std::lround(inv);
    const long allowed_units =
        static_cast<long>(std::floor(allowed_total / grid_step + 1e-9));

    std::vector<long> units(b_cont.size());
    for (Eigen::Index p = 0; p < b_cont.size(); ++p) {
        const double x = std::clamp(b_cont[p], 0.0, 1.0);
        units[p] = std::clamp(std::lround(x / grid_step), 0L, max_units);
    }
    long total = std::accumulate(units.begin(), units.end(), 0L);
    std::vector<long> removed(units.size(), 0);
    while (total > allowed_units) {
        int arg = -1;
        for (std::size_t p = 0; p < units.size(); ++p) {
            if (units[p] == 0) continue;
            if (arg < 0 || removed[p] <= removed[arg]) arg = static_cast<int>(p);
        }
        if (arg < 0) break; // all-zero is always feasible (allowed_total >= 0)
        --units[arg];
        ++removed[arg];
        --total;
    }

    AllocationAction a;
    a.fractions.resize(units.size());
    for (std::size_t p = 0; p < units.size(); ++p) a.fractions[p] = units[p] * grid_step;
    return a;
}

/// Realized CPC given per-channel allocated amounts (currency) and a click
/// count: sum_p b^p / g. Undefined at g = 0.
inline double cpc_real(const std::vector<double>& amounts, double clicks) {
    CB_REQUIRE(clicks > 0.0, "cpc_real: undefined at zero clicks");
    double total = 0.0;
    for (double b : amounts) total += b;
    return total / clicks;
}

/// Training-time variant: substitutes a bounded penalty (2x the target) when
/// the transition recorded no clicks, so the loss stays finite.
inline double cpc_real_or_penalty(double total_amount, double clicks, double cpc_target) {
    if (clicks <= 0.0) return 2.0 * cpc_target;
    return total_amount / clicks;
}

} // namespace crossbid::top
