#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "crossbid/core/error.hpp"
#include "crossbid/core/rng.hpp"

namespace crossbid::baselines {

using Vec = Eigen::VectorXd;

struct CemState {
    Vec mean;
    Vec sigma;
    Vec lo, hi;            // box bounds for sampled parameters
    int population = 32;
    double elite_frac = 0.2;
    double sigma_floor = 0.01;

    int elite_count() const {
        return std::max(1, static_cast<int>(std::lround(population * elite_frac)));
    }

    void validate() const {
        CB_REQUIRE(mean.size() > 0, "CemState: empty parameter vector");
        CB_REQUIRE(sigma.size() == mean.size() && lo.size() == mean.size() && hi.size() == mean.size(),
                   "CemState: inconsistent dimensions");
        CB_REQUIRE(population >= 2 * elite_count(),
                   "CemState: population must be at least twice the elite count");
        CB_REQUIRE(sigma_floor > 0.0, "CemState: sigma floor must be positive");
    }
};

struct CemResult {
    Vec best;
    double best_value = -std::numeric_limits<double>::infinity();
    std::vector<double> best_trace; // best-ever value after each iteration
    CemState state;                 // final sampling distribution
};

/// Iterated sample -> evaluate -> refit-on-elites maximization. The standard
/// deviation is floored so the search never collapses; the best-ever
/// parameters are returned, making the trace monotone by construction.
template <typename F>
CemResult cem_optimize(F&& objective, CemState state, int iterations, Rng& rng) {
    state.validate();
    const Eigen::Index d = state.mean.size();
    const int n_elite = state.elite_count();
    CemResult result;
    result.best = state.mean;

    for (int it = 0; it < iterations; ++it) {
        std::vector<Vec> pop(state.population);
        std::vector<double> value(state.population);
        for (int i = 0; i < state.population; ++i) {
            Vec x(d);
            for (Eigen::Index k = 0; k < d; ++k)
                x[k] = std::clamp(state.mean[k] + state.sigma[k] * rng.normal(),
                                  state.lo[k], state.hi[k]);
            pop[i] = std::move(x);
            try {
                value[i] = objective(pop[i]);
            } catch (const std::exception& e) {
                detail::raise("cem_optimize: objective failed at iteration ", it, ": ", e.what());
            }
            if (value[i] > result.best_value) {
                result.best_value = value[i];
                result.best = pop[i];
            }
        }
        std::vector<int> order(state.population);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return value[a] > value[b]; });

        Vec new_mean = Vec::Zero(d), sq = Vec::Zero(d);
        for (int e = 0; e < n_elite; ++e) new_mean += pop[order[e]];
        new_mean /= n_elite;
        for (int e = 0; e < n_elite; ++e)
            sq += (pop[order[e]] - new_mean).array().square().matrix();
        state.mean = new_mean;
        state.sigma = (sq / n_elite).array().sqrt().max(state.sigma_floor).matrix();
        result.best_trace.push_back(result.best_value);
    }
    result.state = std::move(state);
    return result;
}

} // namespace crossbid::baselines
