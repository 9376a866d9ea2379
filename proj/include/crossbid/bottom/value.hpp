#pragma once

#include "crossbid/bottom/expectile.hpp"
#include "crossbid/nn/adam.hpp"
#include "crossbid/nn/mlp.hpp"

namespace crossbid::bottom {

using nn::Adam;
using nn::Mat;
using nn::Mlp;
using nn::MlpSpec;
using nn::ParamGrad;
using Vec = Eigen::VectorXd;

/// Expectile-regressed state value function with a soft-updated target copy.
/// Consumes states only -- there is no action input anywhere on this path,
/// which is what keeps bottom-level learning free of out-of-distribution
/// action evaluation. Used over the joint observation for the central value
/// and over a single channel's observation for the no-central ablation.
class ValueFunction {
public:
    ValueFunction() = default;

    ValueFunction(int in_dim, const std::vector<int>& hidden, double rho, Rng& rng,
                  double tau = 0.005)
        : rho_(rho), tau_(tau) {
        CB_REQUIRE(rho > 0.0 && rho < 1.0, "ValueFunction: expectile must lie in (0,1)");
        v_ = Mlp(MlpSpec::make(in_dim, hidden, 1, nn::Act::Tanh, nn::Act::Identity));
        v_.init(rng);
        target_ = v_;
        opt_ = Adam(nn::OptimizerConfig{}, v_.num_params());
    }

    double rho() const { return rho_; }
    int input_dim() const { return v_.input_dim(); }
    void set_lr(double lr) { opt_.set_lr(lr); }

    Vec value(const Mat& s) const { return v_.forward(s).row(0).transpose(); }
    Vec target_value(const Mat& s) const { return target_.forward(s).row(0).transpose(); }

    /// Value plus the gradient of sum(V) with respect to the input states
    /// (used by the state-policy guidance term; value parameters stay fixed).
    Vec value_with_input_grad(const Mat& s, Mat& ds) const {
        Mlp::Cache cache;
        Vec v = v_.forward(s, cache).row(0).transpose();
        ParamGrad scratch = v_.zero_grad();
        ds = v_.backward(cache, Mat::Ones(1, s.cols()), scratch);
        return v;
    }

    /// Expectile TD loss and its gradient against the frozen target copy.
    double loss_and_grad(const Mat& s, const Vec& r, const Mat& s_next, const Vec& terminal,
                         double gamma, ParamGrad* g) const {
        CB_REQUIRE(gamma >= 0.0 && gamma < 1.0, "train_value: gamma must be in [0,1)");
        const Eigen::Index n = s.cols();
        CB_REQUIRE(n > 0, "train_value: empty batch");
        Vec boot = target_value(s_next);
        Mlp::Cache cache;
        Vec v = v_.forward(s, cache).row(0).transpose();
        double loss = 0.0;
        Mat dv(1, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double y = r[j] + gamma * (1.0 - terminal[j]) * boot[j];
            const double u = y - v[j];
            const double w = expectile_weight(u, rho_);
            loss += w * u * u;
            dv(0, j) = -2.0 * w * u / n;
        }
        loss /= n;
        CB_REQUIRE(std::isfinite(loss), "train_value: non-finite loss");
        if (g) v_.backward(cache, dv, *g);
        return loss;
    }

    /// One expectile TD step: minimize E[L2^rho(r + gamma V'(s') - V(s))].
    /// Terminal rows bootstrap nothing. Returns the batch loss.
    double train_step(const Mat& s, const Vec& r, const Mat& s_next, const Vec& terminal,
                      double gamma) {
        ParamGrad g = v_.zero_grad();
        const double loss = loss_and_grad(s, r, s_next, terminal, gamma, &g);
        opt_.step(v_, g);
        nn::soft_update(target_, v_, tau_);
        return loss;
    }

    /// Loss-only evaluation against the current target net (oracle support).
    double loss(const Mat& s, const Vec& r, const Mat& s_next, const Vec& terminal,
                double gamma) const {
        const Eigen::Index n = s.cols();
        Vec boot = target_value(s_next);
        Vec v = value(s);
        double total = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            total += expectile_loss(r[j] + gamma * (1.0 - terminal[j]) * boot[j] - v[j], rho_);
        return total / n;
    }

    Mlp& net() { return v_; }
    const Mlp& net() const { return v_; }
    Mlp& target_net() { return target_; }
    const Mlp& target_net() const { return target_; }
    Adam& opt() { return opt_; }
    double tau() const { return tau_; }
    void rebuild(Mlp net, Mlp target, double rho, double tau) {
        v_ = std::move(net);
        target_ = std::move(target);
        rho_ = rho;
        tau_ = tau;
    }

private:
    Mlp v_, target_;
    Adam opt_;
    double rho_ = 0.7;
    double tau_ = 0.005;
};

} // namespace crossbid::bottom
