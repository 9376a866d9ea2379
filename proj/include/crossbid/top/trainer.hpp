#pragma once

#include "crossbid/top/allocation.hpp"
#include "crossbid/top/critic.hpp"
#include "crossbid/top/policy.hpp"

namespace crossbid::top {

/// Mean squared CPC error over the advertisers in a batch, treating the
/// (possibly policy-sampled) allocation as realized spend:
/// L_CPC = mean_m (CPC^tar_m - sum_p b^p_m / g_m)^2.
/// d_b0 receives the gradient with respect to the allocation fractions when
/// requested; rows with zero logged clicks use the bounded penalty and
/// contribute no gradient.
inline double loss_cpc(const Mat& b0, const Vec& budget, const Vec& cpc_target, const Vec& g,
                       Mat* d_b0) {
    const Eigen::Index n = b0.cols();
    CB_REQUIRE(n > 0, "loss_cpc: empty batch");
    if (d_b0) d_b0->setZero(b0.rows(), n);
    double loss = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double amount = b0.col(j).sum() * budget[j];
        const double real = cpc_real_or_penalty(amount, g[j], cpc_target[j]);
        const double err = cpc_target[j] - real;
        loss += err * err;
        if (d_b0 && g[j] > 0.0)
            d_b0->col(j).setConstant(2.0 * (real - cpc_target[j]) * budget[j] / g[j] / n);
    }
    loss /= n;
    CB_REQUIRE(std::isfinite(loss), "loss_cpc: non-finite loss");
    return loss;
}

struct TopLossParts {
    double total = 0.0;
    double simple = 0.0;
    double cpc = 0.0;
    double q_mean = 0.0;
    double alpha_hat = 0.0;
};

/// Combined top-level policy objective (denoising regularization + CPC
/// constraint + Q enhancement): L_simple + w_cpc * L_CPC - alpha_hat * mean Q.
/// With `normalize_alpha` the guidance weight is alpha over the batch mean
/// |Q| (treated as a constant, not differentiated); without it alpha is used
/// raw, which keeps the objective an exact function of the parameters for
/// finite-difference checks. All noise draws derive from `seed`, so the same
/// seed re-evaluates the identical stochastic objective.
inline TopLossParts top_policy_loss(const TopPolicy& policy, const TopCritic& critic,
                                    const TopBatch& batch, double alpha, double cpc_weight,
                                    std::uint64_t seed, ParamGrad* g,
                                    bool normalize_alpha = true) {
    CB_REQUIRE(alpha >= 0.0, "train_policy_step: alpha must be nonnegative");
    CB_REQUIRE(batch.size() > 0, "train_policy_step: empty batch");
    const Eigen::Index n = batch.size();
    TopLossParts parts;

    // policy sample through the reverse chain
    Rng chain_rng(derive_seed(seed, 0xC4A1));
    TopPolicy::ChainCache cc;
    Mat b0 = policy.sample_batch_cached(batch.s, chain_rng, cc);

    // Q guidance on the continuous sample
    Mat dq_db;
    Vec q = critic.q_min_with_action_grad(batch.s, b0, dq_db);
    parts.q_mean = q.mean();
    parts.alpha_hat = normalize_alpha ? alpha / (q.cwiseAbs().mean() + 1e-4) : alpha;

    // CPC variance loss on the continuous sample
    Mat dcpc_db;
    parts.cpc = loss_cpc(b0, batch.budget, batch.cpc_target, batch.g, g ? &dcpc_db : nullptr);

    if (g) {
        Mat db0 = (-parts.alpha_hat / n) * dq_db + cpc_weight * dcpc_db;
        policy.chain_backward(cc, db0, *g);
    }

    // denoising regularization on logged actions
    Rng noise_rng(derive_seed(seed, 0x51AB));
    parts.simple = policy.loss_simple(batch.s, batch.b, noise_rng, g);

    parts.total = parts.simple + cpc_weight * parts.cpc - parts.alpha_hat * parts.q_mean;
    CB_REQUIRE(std::isfinite(parts.total), "train_policy_step: non-finite loss");
    return parts;
}

/// One optimizer step on the combined objective; returns the loss parts.
inline TopLossParts train_policy_step(TopPolicy& policy, const TopCritic& critic,
                                      const TopBatch& batch, double alpha, double cpc_weight,
                                      Adam& opt, Rng& rng) {
    ParamGrad g = policy.net().zero_grad();
    TopLossParts parts = top_policy_loss(policy, critic, batch, alpha, cpc_weight, rng.next(), &g);
    opt.step(policy.net(), g);
    return parts;
}

/// No-diffusion ablation objective: behavior-cloning MSE in place of the
/// denoising loss, same CPC and Q terms, gradients straight through the net.
inline TopLossParts direct_policy_loss(const DirectTopPolicy& policy, const TopCritic& critic,
                                       const TopBatch& batch, double alpha, double cpc_weight,
                                       ParamGrad* g, bool normalize_alpha = true) {
    const Eigen::Index n = batch.size();
    CB_REQUIRE(n > 0, "direct_policy_loss: empty batch");
    TopLossParts parts;

    Mlp::Cache cache;
    Mat b0 = policy.net().forward(batch.s, cache);

    Mat dq_db;
    Vec q = critic.q_min_with_action_grad(batch.s, b0, dq_db);
    parts.q_mean = q.mean();
    parts.alpha_hat = normalize_alpha ? alpha / (q.cwiseAbs().mean() + 1e-4) : alpha;

    Mat dcpc_db;
    parts.cpc = loss_cpc(b0, batch.budget, batch.cpc_target, batch.g, g ? &dcpc_db : nullptr);

    Mat diff = b0 - batch.b;
    parts.simple = diff.squaredNorm() / n; // behavior-cloning stand-in

    if (g) {
        Mat db0 = (2.0 / n) * diff + (-parts.alpha_hat / n) * dq_db + cpc_weight * dcpc_db;
        policy.net().backward(cache, db0, *g);
    }
    parts.total = parts.simple + cpc_weight * parts.cpc - parts.alpha_hat * parts.q_mean;
    return parts;
}

inline TopLossParts train_direct_policy_step(DirectTopPolicy& policy, const TopCritic& critic,
                                             const TopBatch& batch, double alpha,
                                             double cpc_weight, Adam& opt) {
    ParamGrad g = policy.net().zero_grad();
    TopLossParts parts = direct_policy_loss(policy, critic, batch, alpha, cpc_weight, &g);
    opt.step(policy.net(), g);
    return parts;
}

} // namespace crossbid::top
