#pragma once

#include <functional>

#include "crossbid/nn/adam.hpp"
#include "crossbid/nn/mlp.hpp"

namespace crossbid::top {

using nn::Adam;
using nn::Mat;
using nn::Mlp;
using nn::MlpSpec;
using nn::ParamGrad;
using Vec = Eigen::VectorXd;

/// One training batch of top-level transitions (columns are advertisers-days).
struct TopBatch {
    Mat s;        // state_dim x n
    Mat b;        // channels x n, logged allocation fractions
    Vec g;        // clicks reward
    Mat s_next;   // state_dim x n
    Vec terminal; // 1 at episode end (no bootstrap)
    Vec budget;   // B_m per row
    Vec cpc_target;

    Eigen::Index size() const { return s.cols(); }
};

/// Samples next-day allocations for bootstrap targets; the diffusion policy
/// and test stubs both fit this shape.
using AllocationSampler = std::function<Mat(const Mat& states, Rng& rng)>;

/// Clipped double-Q critic over (state, allocation) with target copies.
class TopCritic {
public:
    TopCritic() = default;

    TopCritic(int state_dim, int channels, const std::vector<int>& hidden, Rng& rng, double tau = 0.005)
        : S_(state_dim), P_(channels), tau_(tau) {
        MlpSpec spec = MlpSpec::make(S_ + P_, hidden, 1, nn::Act::Tanh, nn::Act::Identity);
        q1_ = Mlp(spec);
        q2_ = Mlp(spec);
        q1_.init(rng);
        q2_.init(rng);
        t1_ = q1_;
        t2_ = q2_;
        opt1_ = Adam(nn::OptimizerConfig{}, q1_.num_params());
        opt2_ = Adam(nn::OptimizerConfig{}, q2_.num_params());
    }

    int state_dim() const { return S_; }
    int channels() const { return P_; }
    double tau() const { return tau_; }
    void set_lr(double lr) {
        opt1_.set_lr(lr);
        opt2_.set_lr(lr);
    }

    Mat stack(const Mat& s, const Mat& b) const {
        CB_REQUIRE(s.rows() == S_ && b.rows() == P_ && s.cols() == b.cols(),
                   "TopCritic: bad (s, b) shapes");
        Mat x(S_ + P_, s.cols());
        x.topRows(S_) = s;
        x.bottomRows(P_) = b;
        return x;
    }

    Vec q_min(const Mat& s, const Mat& b) const {
        Mat x = stack(s, b);
        Vec a = q1_.forward(x).row(0).transpose();
        Vec c = q2_.forward(x).row(0).transpose();
        return a.cwiseMin(c);
    }

    Vec q_target_min(const Mat& s, const Mat& b) const {
        Mat x = stack(s, b);
        Vec a = t1_.forward(x).row(0).transpose();
        Vec c = t2_.forward(x).row(0).transpose();
        return a.cwiseMin(c);
    }

    /// One TD step with clipped double-Q targets; returns the mean TD loss.
    /// Targets bootstrap with next-state actions drawn from `sampler`.
    double train_step(const TopBatch& batch, const AllocationSampler& sampler, double gamma,
                      Rng& rng) {
        CB_REQUIRE(gamma >= 0.0 && gamma < 1.0, "train_critic: gamma must be in [0,1)");
        const Eigen::Index n = batch.size();
        CB_REQUIRE(n > 0, "train_critic: empty batch");
        Mat b_next = sampler(batch.s_next, rng);
        Vec boot = q_target_min(batch.s_next, b_next);
        Vec y(n);
        for (Eigen::Index j = 0; j < n; ++j)
            y[j] = batch.g[j] + gamma * (1.0 - batch.terminal[j]) * boot[j];

        Mat x = stack(batch.s, batch.b);
        double loss = 0.0;
        for (int k = 0; k < 2; ++k) {
            Mlp& net = k == 0 ? q1_ : q2_;
            Adam& opt = k == 0 ? opt1_ : opt2_;
            Mlp::Cache cache;
            Vec q = net.forward(x, cache).row(0).transpose();
            Vec diff = q - y;
            loss += diff.squaredNorm() / n;
            ParamGrad g = net.zero_grad();
            Mat dy = (2.0 / n) * diff.transpose();
            net.backward(cache, dy, g);
            opt.step(net, g);
        }
        nn::soft_update(t1_, q1_, tau_);
        nn::soft_update(t2_, q2_, tau_);
        CB_REQUIRE(std::isfinite(loss), "train_critic: non-finite TD loss");
        return loss / 2.0;
    }

    /// Policy-guidance pass: per-column min of the two online critics plus the
    /// gradient of sum(q_min) with respect to the action input.
    Vec q_min_with_action_grad(const Mat& s, const Mat& b, Mat& db) const {
        Mat x = stack(s, b);
        Mlp::Cache c1, c2;
        Vec a = q1_.forward(x, c1).row(0).transpose();
        Vec c = q2_.forward(x, c2).row(0).transpose();
        const Eigen::Index n = x.cols();
        Mat d1 = Mat::Zero(1, n), d2 = Mat::Zero(1, n);
        Vec out(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (a[j] <= c[j]) {
                out[j] = a[j];
                d1(0, j) = 1.0;
            } else {
                out[j] = c[j];
                d2(0, j) = 1.0;
            }
        }
        ParamGrad scratch1 = q1_.zero_grad(), scratch2 = q2_.zero_grad();
        Mat dx = q1_.backward(c1, d1, scratch1) + q2_.backward(c2, d2, scratch2);
        db = dx.bottomRows(P_);
        return out;
    }

    // serialization access
    Mlp& q1() { return q1_; }
    Mlp& q2() { return q2_; }
    Mlp& target1() { return t1_; }
    Mlp& target2() { return t2_; }
    const Mlp& q1() const { return q1_; }
    const Mlp& q2() const { return q2_; }
    const Mlp& target1() const { return t1_; }
    const Mlp& target2() const { return t2_; }
    Adam& opt1() { return opt1_; }
    Adam& opt2() { return opt2_; }
    void set_dims(int state_dim, int channels) {
        S_ = state_dim;
        P_ = channels;
    }

private:
    int S_ = 0, P_ = 0;
    double tau_ = 0.005;
    Mlp q1_, q2_, t1_, t2_;
    Adam opt1_, opt2_;
};

} // namespace crossbid::top
