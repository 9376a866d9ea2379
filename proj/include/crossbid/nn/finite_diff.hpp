#pragma once

#include <functional>

#include "crossbid/nn/mlp.hpp"

namespace crossbid::nn {

/// Central-difference gradient of a scalar functional of one net's flat
/// parameters. The functional is re-evaluated at perturbed parameters; any
/// stochastic loss must therefore fix its own noise draws.
template <typename F>
Vec finite_diff_grad(Mlp& net, F&& loss, double eps = 1e-4) {
    Vec theta = net.theta();
    Vec g(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Vec tp = theta, tm = theta;
        tp[i] += eps;
        tm[i] -= eps;
        net.set_theta(tp);
        const double lp = loss();
        net.set_theta(tm);
        const double lm = loss();
        g[i] = (lp - lm) / (2.0 * eps);
    }
    net.set_theta(theta);
    return g;
}

inline double rel_err(const Vec& a, const Vec& b) {
    const double denom = std::max({a.norm(), b.norm(), 1e-12});
    return (a - b).norm() / denom;
}

} // namespace crossbid::nn
