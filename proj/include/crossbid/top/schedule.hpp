#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "crossbid/core/error.hpp"

namespace crossbid::top {

/// Noise-schedule constants for the conditional diffusion policy. Index i
/// runs 1..steps; abar(0) = 1 by definition.
struct DiffusionSchedule {
    int steps = 5;
    std::vector<double> beta;      // beta[i-1] for step i
    std::vector<double> alpha;     // 1 - beta
    std::vector<double> alpha_bar; // running product of alpha

    double b(int i) const { return beta[check(i)]; }
    double a(int i) const { return alpha[check(i)]; }
    double abar(int i) const { return i == 0 ? 1.0 : alpha_bar[check(i)]; }

    /// Posterior standard deviation for the reverse step at i (zero at i=1).
    double sigma(int i) const {
        check(i);
        if (i == 1) return 0.0;
        return std::sqrt(b(i) * (1.0 - abar(i - 1)) / (1.0 - abar(i)));
    }

    /// Variance-preserving schedule sized for short chains:
    /// beta_i = 1 - exp(-bmin/steps - (bmax-bmin)(2i-1)/(2*steps^2)).
    static DiffusionSchedule vp(int steps, double bmin = 0.1, double bmax = 10.0) {
        DiffusionSchedule s;
        s.steps = steps;
        for (int i = 1; i <= steps; ++i) {
            const double expo = bmin / steps + (bmax - bmin) * (2.0 * i - 1.0) / (2.0 * steps * steps);
            s.beta.push_back(1.0 - std::exp(-expo));
        }
        s.finish();
        return s;
    }

    static DiffusionSchedule linear(int steps, double lo = 1e-4, double hi = 0.2) {
        DiffusionSchedule s;
        s.steps = steps;
        for (int i = 1; i <= steps; ++i) {
            const double t = steps == 1 ? 1.0 : static_cast<double>(i - 1) / (steps - 1);
            s.beta.push_back(lo + (hi - lo) * t);
        }
        s.finish();
        return s;
    }

    static DiffusionSchedule named(const std::string& kind, int steps) {
        if (kind == "vp") return vp(steps);
        if (kind == "linear") return linear(steps);
        detail::raise("unknown diffusion schedule: ", kind);
    }

    void finish() {
        CB_REQUIRE(steps >= 1, "DiffusionSchedule: need at least one step");
        alpha.clear();
        alpha_bar.clear();
        double prod = 1.0;
        double prev_beta = 0.0;
        for (double bi : beta) {
            CB_REQUIRE(bi > 0.0 && bi < 1.0, "DiffusionSchedule: beta must lie in (0,1)");
            CB_REQUIRE(bi >= prev_beta, "DiffusionSchedule: beta must be nondecreasing");
            prev_beta = bi;
            alpha.push_back(1.0 - bi);
            prod *= 1.0 - bi;
            CB_REQUIRE(alpha_bar.empty() || prod < alpha_bar.back(),
                       "DiffusionSchedule: alpha_bar must be strictly decreasing");
            alpha_bar.push_back(prod);
        }
    }

private:
    int check(int i) const {
        CB_REQUIRE(i >= 1 && i <= steps, "DiffusionSchedule: step index ", i, " out of 1..", steps);
        return i - 1;
    }
};

} // namespace crossbid::top
