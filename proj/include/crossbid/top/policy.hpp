#pragma once

#include <functional>

#include "crossbid/nn/mlp.hpp"
#include "crossbid/top/schedule.hpp"

namespace crossbid::top {

using nn::Mat;
using nn::Mlp;
using nn::MlpSpec;
using nn::ParamGrad;
using Vec = Eigen::VectorXd;

/// Forward noising: sqrt(abar_i) * b0 + sqrt(1 - abar_i) * eps.
inline Vec forward_noise(const Vec& b0, int i, const Vec& eps, const DiffusionSchedule& sched) {
    const double ab = sched.abar(i); // validates i
    return std::sqrt(ab) * b0 + std::sqrt(1.0 - ab) * eps;
}

/// Conditional diffusion policy over allocation fractions: the action is the
/// end sample of a reverse denoising chain conditioned on the state, with the
/// noise predictor an MLP over [b_i, s, time-embedding(i)].
class TopPolicy {
public:
    static constexpr int kTimeEmb = 3;

    TopPolicy() = default;

    TopPolicy(int channels, int state_dim, const std::vector<int>& hidden,
              DiffusionSchedule sched, Rng& rng)
        : P_(channels), S_(state_dim), sched_(std::move(sched)) {
        eps_ = Mlp(MlpSpec::make(P_ + S_ + kTimeEmb, hidden, P_, nn::Act::Tanh, nn::Act::Identity));
        eps_.init(rng);
    }

    int channels() const { return P_; }
    int state_dim() const { return S_; }
    const DiffusionSchedule& schedule() const { return sched_; }
    Mlp& net() { return eps_; }
    const Mlp& net() const { return eps_; }

    void rebuild(int channels, int state_dim, Mlp net, DiffusionSchedule sched) {
        P_ = channels;
        S_ = state_dim;
        eps_ = std::move(net);
        sched_ = std::move(sched);
    }

    Mat eps_input(const Mat& b, const Mat& s, int i) const {
        CB_REQUIRE(b.rows() == P_ && s.rows() == S_ && b.cols() == s.cols(),
                   "TopPolicy: bad eps input shapes");
        Mat x(P_ + S_ + kTimeEmb, b.cols());
        x.topRows(P_) = b;
        x.middleRows(P_, S_) = s;
        const double phase = static_cast<double>(i) / sched_.steps;
        x.row(P_ + S_).setConstant(phase);
        x.row(P_ + S_ + 1).setConstant(std::sin(2.0 * M_PI * phase));
        x.row(P_ + S_ + 2).setConstant(std::cos(2.0 * M_PI * phase));
        return x;
    }

    Mat predict_eps(const Mat& b, const Mat& s, int i) const {
        return eps_.forward(eps_input(b, s, i));
    }

    /// One reverse step b_i -> b_{i-1}; Gaussian posterior with the standard
    /// DDPM mean, no noise at i=1.
    Mat denoise_step(const Mat& b_i, const Mat& s, int i, Rng& rng) const {
        CB_REQUIRE(i >= 1 && i <= sched_.steps, "denoise_step: index ", i, " out of range");
        Mat e = predict_eps(b_i, s, i);
        CB_REQUIRE(e.allFinite(), "denoise_step: non-finite noise prediction");
        const double coef = sched_.b(i) / std::sqrt(1.0 - sched_.abar(i));
        Mat mean = (b_i - coef * e) / std::sqrt(sched_.a(i));
        const double sig = sched_.sigma(i);
        if (sig > 0.0)
            for (Eigen::Index c = 0; c < mean.cols(); ++c)
                for (Eigen::Index r = 0; r < mean.rows(); ++r) mean(r, c) += sig * rng.normal();
        return mean;
    }

    Vec denoise_step(const Vec& b_i, const Vec& s, int i, Rng& rng) const {
        return denoise_step(Mat(b_i), Mat(s), i, rng).col(0);
    }

    /// Full reverse chain from b^I ~ N(0, I); returns the continuous action
    /// sample b^0 (pre-discretization).
    Mat sample_batch(const Mat& s, Rng& rng) const {
        CB_REQUIRE(s.rows() == S_, "sample: state dimension mismatch");
        Mat b(P_, s.cols());
        for (Eigen::Index c = 0; c < b.cols(); ++c)
            for (Eigen::Index r = 0; r < b.rows(); ++r) b(r, c) = rng.normal();
        for (int i = sched_.steps; i >= 1; --i) b = denoise_step(b, s, i, rng);
        return b;
    }

    Vec sample(const Vec& s, Rng& rng) const { return sample_batch(Mat(s), rng).col(0); }

    /// Chain sample with per-step caches so policy losses can backpropagate
    /// through every reverse step into the noise predictor.
    struct ChainCache {
        std::vector<Mlp::Cache> net; // index k corresponds to step i = steps - k
        Mat b0;
    };

    Mat sample_batch_cached(const Mat& s, Rng& rng, ChainCache& cc) const {
        CB_REQUIRE(s.rows() == S_, "sample: state dimension mismatch");
        Mat b(P_, s.cols());
        for (Eigen::Index c = 0; c < b.cols(); ++c)
            for (Eigen::Index r = 0; r < b.rows(); ++r) b(r, c) = rng.normal();
        cc.net.assign(sched_.steps, {});
        for (int i = sched_.steps; i >= 1; --i) {
            Mlp::Cache& cache = cc.net[sched_.steps - i];
            Mat e = eps_.forward(eps_input(b, s, i), cache);
            CB_REQUIRE(e.allFinite(), "sample: non-finite noise prediction");
            const double coef = sched_.b(i) / std::sqrt(1.0 - sched_.abar(i));
            b = (b - coef * e) / std::sqrt(sched_.a(i));
            const double sig = sched_.sigma(i);
            if (sig > 0.0)
                for (Eigen::Index c = 0; c < b.cols(); ++c)
                    for (Eigen::Index r = 0; r < b.rows(); ++r) b(r, c) += sig * rng.normal();
        }
        cc.b0 = b;
        return b;
    }

    /// Backpropagates dL/db0 through the cached reverse chain, accumulating
    /// noise-net parameter gradients.
    void chain_backward(const ChainCache& cc, const Mat& db0, ParamGrad& g) const {
        Mat db = db0; // dL/db_{i-1}, starting at i = 1
        for (int i = 1; i <= sched_.steps; ++i) {
            const Mlp::Cache& cache = cc.net[sched_.steps - i];
            const double inv_sqrt_a = 1.0 / std::sqrt(sched_.a(i));
            const double coef = sched_.b(i) / std::sqrt(1.0 - sched_.abar(i));
            // b_{i-1} = (b_i - coef * e(b_i)) / sqrt(a_i) (+ noise, no grad)
            Mat de = (-coef * inv_sqrt_a) * db;
            Mat dx = eps_.backward(cache, de, g);
            db = inv_sqrt_a * db + dx.topRows(P_);
        }
    }

    /// Denoising objective: mean over the batch of |eps - eps_theta(...)|^2
    /// with i uniform on {1..steps} and eps standard normal. The draws can be
    /// injected for decomposition and finite-difference oracles.
    double loss_simple(const Mat& s, const Mat& b, Rng& rng, ParamGrad* g) const {
        std::vector<int> is(s.cols());
        Mat eps(P_, s.cols());
        for (Eigen::Index c = 0; c < s.cols(); ++c) {
            is[c] = 1 + rng.uniform_int(sched_.steps);
            for (int r = 0; r < P_; ++r) eps(r, c) = rng.normal();
        }
        return loss_simple_fixed(s, b, is, eps, g);
    }

    double loss_simple_fixed(const Mat& s, const Mat& b, const std::vector<int>& is,
                             const Mat& eps, ParamGrad* g) const {
        CB_REQUIRE(s.cols() > 0, "loss_simple: empty batch");
        CB_REQUIRE(static_cast<Eigen::Index>(is.size()) == s.cols() && eps.cols() == s.cols(),
                   "loss_simple: draw count mismatch");
        const Eigen::Index n = s.cols();
        double loss = 0.0;
        // group columns by diffusion step for batched net evaluation
        for (int i = 1; i <= sched_.steps; ++i) {
            std::vector<Eigen::Index> cols;
            for (Eigen::Index c = 0; c < n; ++c)
                if (is[c] == i) cols.push_back(c);
            if (cols.empty()) continue;
            Mat bs(P_, cols.size()), ss(S_, cols.size()), es(P_, cols.size());
            for (std::size_t k = 0; k < cols.size(); ++k) {
                bs.col(k) = b.col(cols[k]);
                ss.col(k) = s.col(cols[k]);
                es.col(k) = eps.col(cols[k]);
            }
            const double ab = sched_.abar(i);
            Mat noisy = std::sqrt(ab) * bs + std::sqrt(1.0 - ab) * es;
            Mlp::Cache cache;
            Mat pred = eps_.forward(eps_input(noisy, ss, i), cache);
            Mat diff = es - pred;
            loss += diff.squaredNorm();
            if (g) {
                Mat dpred = (2.0 / n) * (pred - es);
                eps_.backward(cache, dpred, *g);
            }
        }
        loss /= n;
        CB_REQUIRE(std::isfinite(loss), "loss_simple: non-finite loss");
        return loss;
    }

    /// Value-only variant over an arbitrary noise predictor
    /// (noisy, s, i, column-indices) -> prediction; lets tests teacher-force
    /// the predictor and recompute the objective independently.
    template <typename PredFn>
    static double loss_simple_over(PredFn&& pred, int channels, const DiffusionSchedule& sched,
                                   const Mat& s, const Mat& b, const std::vector<int>& is,
                                   const Mat& eps) {
        const Eigen::Index n = s.cols();
        CB_REQUIRE(n > 0, "loss_simple: empty batch");
        double loss = 0.0;
        for (int i = 1; i <= sched.steps; ++i) {
            std::vector<Eigen::Index> cols;
            for (Eigen::Index c = 0; c < n; ++c)
                if (is[c] == i) cols.push_back(c);
            if (cols.empty()) continue;
            Mat bs(channels, cols.size()), ss(s.rows(), cols.size()), es(channels, cols.size());
            for (std::size_t k = 0; k < cols.size(); ++k) {
                bs.col(k) = b.col(cols[k]);
                ss.col(k) = s.col(cols[k]);
                es.col(k) = eps.col(cols[k]);
            }
            const double ab = sched.abar(i);
            Mat noisy = std::sqrt(ab) * bs + std::sqrt(1.0 - ab) * es;
            Mat p = pred(noisy, ss, i, cols);
            loss += (es - p).squaredNorm();
        }
        return loss / n;
    }

private:
    int P_ = 0, S_ = 0;
    Mlp eps_;
    DiffusionSchedule sched_;
};

/// Unimodal control policy for the no-diffusion ablation: a direct MLP from
/// state to allocation fractions trained with mean squared error behavior
/// cloning in place of the denoising objective.
class DirectTopPolicy {
public:
    DirectTopPolicy() = default;
    DirectTopPolicy(int channels, int state_dim, const std::vector<int>& hidden, Rng& rng)
        : P_(channels), S_(state_dim) {
        net_ = Mlp(MlpSpec::make(S_, hidden, P_, nn::Act::Tanh, nn::Act::Identity));
        net_.init(rng);
    }

    int channels() const { return P_; }
    int state_dim() const { return S_; }
    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }
    void rebuild(int channels, int state_dim, Mlp net) {
        P_ = channels;
        S_ = state_dim;
        net_ = std::move(net);
    }

    Mat sample_batch(const Mat& s) const { return net_.forward(s); }
    Vec sample(const Vec& s) const { return net_.forward(Mat(s)).col(0); }

private:
    int P_ = 0, S_ = 0;
    Mlp net_;
};

} // namespace crossbid::top
