#pragma once

#include "crossbid/bottom/value.hpp"

namespace crossbid::bottom {

/// Joint bottom-level training batch over the global request index. At each
/// step exactly the channels with a real request carry mask = 1; padded
/// channels repeat their previous observation with zero reward and are
/// excluded from every policy term.
struct BottomBatch {
    int channels = 0;
    int obs_dim = 0;
    std::vector<Mat> o;      // per channel: obs_dim x n
    std::vector<Mat> o_next; // per channel: obs_dim x n
    std::vector<Vec> a;      // per channel: n (logged ratios; 0 where padded)
    std::vector<Vec> mask;   // per channel: n
    Vec r_joint;             // n, sum of per-channel rewards
    Vec terminal;            // n
    std::vector<Mat> z;      // optional CMCK context latents per channel: d_z x n

    Eigen::Index size() const { return r_joint.size(); }
    bool augmented() const { return !z.empty(); }

    Mat joint() const { return stack(o); }
    Mat joint_next() const { return stack(o_next); }

    Mat stack(const std::vector<Mat>& blocks) const {
        Mat s(channels * obs_dim, size());
        for (int p = 0; p < channels; ++p) s.middleRows(p * obs_dim, obs_dim) = blocks[p];
        return s;
    }
};

struct ChannelBounds {
    double lo = 0.5;
    double hi = 1.5;
};

/// Per-channel next-observation model: Gaussian with fixed diagonal sigma
/// over the changing observation fields; static fields pass through.
class StatePolicy {
public:
    StatePolicy() = default;

    StatePolicy(int obs_dim, int aug_dim, std::vector<int> changing,
                const std::vector<int>& hidden, double sigma, Rng& rng)
        : obs_dim_(obs_dim), aug_dim_(aug_dim), chg_(std::move(changing)), sigma_(sigma) {
        CB_REQUIRE(!chg_.empty(), "StatePolicy: need at least one predicted field");
        for (int i : chg_) CB_REQUIRE(i >= 0 && i < obs_dim, "StatePolicy: bad changing index");
        net_ = Mlp(MlpSpec::make(obs_dim + aug_dim, hidden, static_cast<int>(chg_.size()),
                                 nn::Act::Tanh, nn::Act::Identity));
        net_.init(rng);
    }

    int obs_dim() const { return obs_dim_; }
    int aug_dim() const { return aug_dim_; }
    double sigma() const { return sigma_; }
    const std::vector<int>& changing() const { return chg_; }
    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }

    Mat input(const Mat& o, const Mat* zaug) const {
        CB_REQUIRE(o.rows() == obs_dim_, "StatePolicy: observation width mismatch");
        if (aug_dim_ == 0) return o;
        CB_REQUIRE(zaug && zaug->rows() == aug_dim_ && zaug->cols() == o.cols(),
                   "StatePolicy: missing or mis-sized context latent");
        Mat x(obs_dim_ + aug_dim_, o.cols());
        x.topRows(obs_dim_) = o;
        x.bottomRows(aug_dim_) = *zaug;
        return x;
    }

    Mat mean_changing(const Mat& o, const Mat* zaug) const { return net_.forward(input(o, zaug)); }

    /// Full predicted next observation: changing fields from the net mean,
    /// static fields carried from the current observation.
    Mat predict(const Mat& o, const Mat* zaug) const {
        Mat mu = mean_changing(o, zaug);
        Mat out = o;
        for (std::size_t k = 0; k < chg_.size(); ++k) out.row(chg_[k]) = mu.row(k);
        return out;
    }

    Vec predict_one(const Vec& o, const Vec* zaug) const {
        Mat z;
        if (zaug) z = Mat(*zaug);
        return predict(Mat(o), zaug ? &z : nullptr).col(0);
    }

private:
    int obs_dim_ = 0, aug_dim_ = 0;
    std::vector<int> chg_;
    double sigma_ = 0.1;
    Mlp net_;
};

/// Per-channel action likelihood model: squashed Gaussian over the bid ratio
/// given (o_t, o_{t+1}); the execution-time action is the distribution mode.
class ActionPolicy {
public:
    ActionPolicy() = default;

    ActionPolicy(int obs_dim, ChannelBounds bounds, const std::vector<int>& hidden, double sigma,
                 Rng& rng)
        : obs_dim_(obs_dim), bounds_(bounds), sigma_(sigma) {
        CB_REQUIRE(bounds.lo < bounds.hi, "ActionPolicy: bad ratio bounds");
        net_ = Mlp(MlpSpec::make(2 * obs_dim, hidden, 1, nn::Act::Tanh, nn::Act::Identity));
        net_.init(rng);
    }

    int obs_dim() const { return obs_dim_; }
    const ChannelBounds& bounds() const { return bounds_; }
    double sigma() const { return sigma_; }
    Mlp& net() { return net_; }
    const Mlp& net() const { return net_; }

    Mat input(const Mat& o, const Mat& o_next) const {
        CB_REQUIRE(o.rows() == obs_dim_ && o_next.rows() == obs_dim_ && o.cols() == o_next.cols(),
                   "ActionPolicy: bad (o, o') shapes");
        Mat x(2 * obs_dim_, o.cols());
        x.topRows(obs_dim_) = o;
        x.bottomRows(obs_dim_) = o_next;
        return x;
    }

    /// Pre-squash coordinate of a logged ratio (clipped just inside the
    /// bounds so boundary actions stay finite).
    double u_of(double a) const {
        CB_REQUIRE(a >= bounds_.lo - 1e-9 && a <= bounds_.hi + 1e-9,
                   "ActionPolicy: logged action ", a, " outside [", bounds_.lo, ",", bounds_.hi, "]");
        const double t = std::clamp((a - bounds_.lo) / (bounds_.hi - bounds_.lo), 1e-4, 1.0 - 1e-4);
        return std::log(t / (1.0 - t));
    }

    double a_of(double u) const {
        return bounds_.lo + (bounds_.hi - bounds_.lo) / (1.0 + std::exp(-u));
    }

    /// Negative log-likelihood of a logged ratio at pre-squash mean mu,
    /// including the squash Jacobian (parameter-independent).
    double nll(double a, double mu) const {
        const double u = u_of(a);
        const double t = 1.0 / (1.0 + std::exp(-u));
        const double jac = (bounds_.hi - bounds_.lo) * t * (1.0 - t);
        const double dz = (u - mu) / sigma_;
        return 0.5 * dz * dz + std::log(sigma_) + 0.5 * std::log(2.0 * M_PI) + std::log(jac);
    }

    /// Distribution mode, always inside the channel bounds.
    double mode(const Vec& o, const Vec& o_next) const {
        Mat mu = net_.forward(input(Mat(o), Mat(o_next)));
        return a_of(mu(0, 0));
    }

private:
    int obs_dim_ = 0;
    ChannelBounds bounds_;
    double sigma_ = 0.25;
    Mlp net_;
};

struct BottomPolicyConfig {
    int channels = 0;
    int obs_dim = 0;
    int aug_dim = 0;             // CMCK latent width appended to pi_s inputs (0 = off)
    std::vector<int> changing;   // observation fields predicted by pi_s
    std::vector<ChannelBounds> bounds;
    std::vector<int> hidden = {64, 64};
    double sigma_state = 0.1;
    double sigma_action = 0.25;
    double lr = 1e-3;
};

/// The per-channel policy pair plus optimizer state.
class BottomPolicies {
public:
    BottomPolicies() = default;

    BottomPolicies(const BottomPolicyConfig& cfg, Rng& rng) : cfg_(cfg) {
        CB_REQUIRE(static_cast<int>(cfg.bounds.size()) == cfg.channels,
                   "BottomPolicies: one bounds pair per channel");
        for (int p = 0; p < cfg.channels; ++p) {
            state_.emplace_back(cfg.obs_dim, cfg.aug_dim, cfg.changing, cfg.hidden,
                                cfg.sigma_state, rng);
            action_.emplace_back(cfg.obs_dim, cfg.bounds[p], cfg.hidden, cfg.sigma_action, rng);
            nn::OptimizerConfig oc;
            oc.lr = cfg.lr;
            sopt_.emplace_back(oc, state_.back().net().num_params());
            aopt_.emplace_back(oc, action_.back().net().num_params());
        }
    }

    const BottomPolicyConfig& config() const { return cfg_; }
    int channels() const { return cfg_.channels; }
    StatePolicy& state(int p) { return state_[p]; }
    const StatePolicy& state(int p) const { return state_[p]; }
    ActionPolicy& action(int p) { return action_[p]; }
    const ActionPolicy& action(int p) const { return action_[p]; }
    Adam& state_opt(int p) { return sopt_[p]; }
    Adam& action_opt(int p) { return aopt_[p]; }
    void set_lr(double lr) {
        for (auto& o : sopt_) o.set_lr(lr);
        for (auto& o : aopt_) o.set_lr(lr);
    }

    /// Decoupled act path: predict the optimal next observation from the
    /// local observation only, then take the action-policy mode.
    double act(int p, const Vec& o, const Vec* zaug) const {
        Vec pred = state_[p].predict_one(o, zaug);
        return action_[p].mode(o, pred);
    }

private:
    BottomPolicyConfig cfg_;
    std::vector<StatePolicy> state_;
    std::vector<ActionPolicy> action_;
    std::vector<Adam> sopt_, aopt_;
};

struct StateLossParts {
    double total = 0.0;
    double nll = 0.0;
    double v_mean = 0.0;
    double lambda_hat = 0.0;
};

/// State-policy objective (multi-agent form): masked next-state behavior
/// cloning plus lambda-weighted value of the predicted joint state. Padded
/// channel-steps contribute neither likelihood nor guidance gradient (their
/// block of the predicted joint state is the carried observation). Pass a
/// null `grads` for loss-only evaluation; with `normalize_lambda` the weight
/// is lambda over the batch mean |V| (stop-gradient).
inline StateLossParts state_policy_loss(const BottomPolicies& policies, const ValueFunction& value,
                                        const BottomBatch& batch, double lambda,
                                        std::vector<ParamGrad>* grads,
                                        bool normalize_lambda = true) {
    CB_REQUIRE(lambda >= 0.0, "train_state_policy: lambda must be nonnegative");
    const Eigen::Index n = batch.size();
    CB_REQUIRE(n > 0, "train_state_policy: empty batch");
    const int P = batch.channels;
    const int D = batch.obs_dim;
    CB_REQUIRE(value.input_dim() == P * D, "train_state_policy: value expects the joint state");
    StateLossParts parts;

    std::vector<Mlp::Cache> caches(P);
    std::vector<Mat> mu(P);
    Mat s_pred(P * D, n);
    for (int p = 0; p < P; ++p) {
        const StatePolicy& sp = policies.state(p);
        const Mat* zp = batch.augmented() ? &batch.z[p] : nullptr;
        mu[p] = sp.net().forward(sp.input(batch.o[p], zp), caches[p]);
        Mat block = batch.o[p]; // padded channels carry their observation
        const auto& chg = sp.changing();
        for (Eigen::Index t = 0; t < n; ++t) {
            if (batch.mask[p][t] == 0.0) continue;
            for (std::size_t k = 0; k < chg.size(); ++k) block(chg[k], t) = mu[p](k, t);
        }
        s_pred.middleRows(p * D, D) = block;
    }

    Mat ds_pred;
    Vec v = grads ? value.value_with_input_grad(s_pred, ds_pred) : value.value(s_pred);
    parts.v_mean = v.mean();
    parts.lambda_hat = normalize_lambda ? lambda / (v.cwiseAbs().mean() + 1e-4) : lambda;

    const double sig2 = policies.state(0).sigma() * policies.state(0).sigma();
    const double log_norm =
        std::log(policies.state(0).sigma()) + 0.5 * std::log(2.0 * M_PI);
    for (int p = 0; p < P; ++p) {
        const StatePolicy& sp = policies.state(p);
        const auto& chg = sp.changing();
        Mat dmu = Mat::Zero(mu[p].rows(), n);
        for (Eigen::Index t = 0; t < n; ++t) {
            if (batch.mask[p][t] == 0.0) continue;
            for (std::size_t k = 0; k < chg.size(); ++k) {
                const double diff = mu[p](k, t) - batch.o_next[p](chg[k], t);
                parts.nll += 0.5 * diff * diff / sig2 + log_norm;
                dmu(k, t) = diff / sig2 / n;
            }
        }
        if (grads) {
            for (Eigen::Index t = 0; t < n; ++t) {
                if (batch.mask[p][t] == 0.0) continue;
                for (std::size_t k = 0; k < chg.size(); ++k)
                    dmu(k, t) += (-parts.lambda_hat / n) * ds_pred(p * D + chg[k], t);
            }
            policies.state(p).net().backward(caches[p], dmu, (*grads)[p]);
        }
    }
    parts.nll /= n;
    parts.total = parts.nll - parts.lambda_hat * parts.v_mean;
    CB_REQUIRE(std::isfinite(parts.total), "train_state_policy: non-finite loss");
    return parts;
}

/// One optimizer step per channel on the state-policy objective.
inline StateLossParts train_state_policy(BottomPolicies& policies, const ValueFunction& value,
                                         const BottomBatch& batch, double lambda) {
    std::vector<ParamGrad> grads;
    for (int p = 0; p < policies.channels(); ++p)
        grads.push_back(policies.state(p).net().zero_grad());
    StateLossParts parts = state_policy_loss(policies, value, batch, lambda, &grads);
    for (int p = 0; p < policies.channels(); ++p)
        policies.state_opt(p).step(policies.state(p).net(), grads[p]);
    return parts;
}

/// Local-value variant (no-central ablation): each channel's guidance comes
/// from its own value function over its own observation block.
inline StateLossParts state_policy_loss_local(const BottomPolicies& policies,
                                              const std::vector<ValueFunction>& values,
                                              const BottomBatch& batch, double lambda,
                                              std::vector<ParamGrad>* grads,
                                              bool normalize_lambda = true) {
    const Eigen::Index n = batch.size();
    CB_REQUIRE(n > 0, "train_state_policy: empty batch");
    const int P = batch.channels;
    CB_REQUIRE(static_cast<int>(values.size()) == P, "local values: one per channel");
    StateLossParts parts;

    const double sig2 = policies.state(0).sigma() * policies.state(0).sigma();
    const double log_norm =
        std::log(policies.state(0).sigma()) + 0.5 * std::log(2.0 * M_PI);
    for (int p = 0; p < P; ++p) {
        const StatePolicy& sp = policies.state(p);
        const auto& chg = sp.changing();
        Mlp::Cache cache;
        const Mat* zp = batch.augmented() ? &batch.z[p] : nullptr;
        Mat mu = sp.net().forward(sp.input(batch.o[p], zp), cache);
        Mat block = batch.o[p];
        for (Eigen::Index t = 0; t < n; ++t) {
            if (batch.mask[p][t] == 0.0) continue;
            for (std::size_t k = 0; k < chg.size(); ++k) block(chg[k], t) = mu(k, t);
        }
        Mat dblock;
        Vec v = grads ? values[p].value_with_input_grad(block, dblock) : values[p].value(block);
        const double lam_p = normalize_lambda ? lambda / (v.cwiseAbs().mean() + 1e-4) : lambda;
        parts.v_mean += v.mean();
        parts.lambda_hat = lam_p; // last channel's value, reported for traces
        parts.total -= lam_p * v.mean();

        Mat dmu = Mat::Zero(mu.rows(), n);
        for (Eigen::Index t = 0; t < n; ++t) {
            if (batch.mask[p][t] == 0.0) continue;
            for (std::size_t k = 0; k < chg.size(); ++k) {
                const double diff = mu(k, t) - batch.o_next[p](chg[k], t);
                parts.nll += 0.5 * diff * diff / sig2 + log_norm;
                dmu(k, t) = diff / sig2 / n;
                if (grads) dmu(k, t) += (-lam_p / n) * dblock(chg[k], t);
            }
        }
        if (grads) policies.state(p).net().backward(cache, dmu, (*grads)[p]);
    }
    parts.nll /= n;
    parts.total += parts.nll;
    CB_REQUIRE(std::isfinite(parts.total), "train_state_policy: non-finite loss");
    return parts;
}

inline StateLossParts train_state_policy_local(BottomPolicies& policies,
                                               const std::vector<ValueFunction>& values,
                                               const BottomBatch& batch, double lambda) {
    std::vector<ParamGrad> grads;
    for (int p = 0; p < policies.channels(); ++p)
        grads.push_back(policies.state(p).net().zero_grad());
    StateLossParts parts = state_policy_loss_local(policies, values, batch, lambda, &grads);
    for (int p = 0; p < policies.channels(); ++p)
        policies.state_opt(p).step(policies.state(p).net(), grads[p]);
    return parts;
}

/// Supervised action-likelihood objective: mean masked negative
/// log-likelihood of the logged ratios given (o_t, o_{t+1}). No value term.
inline double action_policy_loss(const BottomPolicies& policies, const BottomBatch& batch,
                                 std::vector<ParamGrad>* grads) {
    const Eigen::Index n = batch.size();
    CB_REQUIRE(n > 0, "train_action_policy: empty batch");
    double loss = 0.0;
    for (int p = 0; p < batch.channels; ++p) {
        const ActionPolicy& ap = policies.action(p);
        Mlp::Cache cache;
        Mat mu = ap.net().forward(ap.input(batch.o[p], batch.o_next[p]), cache);
        Mat dmu = Mat::Zero(1, n);
        const double sig2 = ap.sigma() * ap.sigma();
        for (Eigen::Index t = 0; t < n; ++t) {
            if (batch.mask[p][t] == 0.0) continue;
            loss += ap.nll(batch.a[p][t], mu(0, t));
            dmu(0, t) = (mu(0, t) - ap.u_of(batch.a[p][t])) / sig2 / n;
        }
        if (grads) policies.action(p).net().backward(cache, dmu, (*grads)[p]);
    }
    loss /= n;
    CB_REQUIRE(std::isfinite(loss), "train_action_policy: non-finite loss");
    return loss;
}

inline double train_action_policy(BottomPolicies& policies, const BottomBatch& batch) {
    std::vector<ParamGrad> grads;
    for (int p = 0; p < policies.channels(); ++p)
        grads.push_back(policies.action(p).net().zero_grad());
    const double loss = action_policy_loss(policies, batch, &grads);
    for (int p = 0; p < policies.channels(); ++p)
        policies.action_opt(p).step(policies.action(p).net(), grads[p]);
    return loss;
}

/// Central-value TD step over the joint batch (Eq. 12 in its multi-agent
/// form): the value pathway consumes states and rewards only.
inline double train_value(ValueFunction& value, const BottomBatch& batch, double gamma) {
    return value.train_step(batch.joint(), batch.r_joint, batch.joint_next(), batch.terminal,
                            gamma);
}

} // namespace crossbid::bottom
