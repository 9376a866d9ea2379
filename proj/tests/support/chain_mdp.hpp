#pragma once

// Tiny tabular world shared by the bottom-level unit tests and the
// acceptance suite: a 3-state chain with one decision state. From A the high
// ratio moves to B (which then pays 1 and ends); the low ratio moves to C
// (pays nothing and ends). The logging policy picks both actions equally, so
// dynamic-programming policy evaluation is exact by hand.

#include "crossbid/bottom/policies.hpp"

namespace crossbid::testsupport {

using bottom::BottomBatch;
using Vec = Eigen::VectorXd;

struct ChainMdp {
    BottomBatch batch;
    Vec obs_a, obs_b, obs_c;
    double a_hi = 1.4, a_lo = 0.6, a_mid = 1.0;
    double gamma = 0.9;
    // behavior-policy state values from dynamic programming
    double v_a = 0.0, v_b = 1.0, v_c = 0.0;
};

inline ChainMdp make_chain(int episodes_per_arm) {
    ChainMdp chain;
    chain.obs_a = Vec::Zero(3);
    chain.obs_b = Vec::Zero(3);
    chain.obs_c = Vec::Zero(3);
    chain.obs_a[0] = chain.obs_b[1] = chain.obs_c[2] = 1.0;
    chain.v_a = chain.gamma * 0.5 * (chain.v_b + chain.v_c);

    const int n = 4 * episodes_per_arm; // two steps per episode, two arms
    BottomBatch& b = chain.batch;
    b.channels = 1;
    b.obs_dim = 3;
    b.o.assign(1, nn::Mat(3, n));
    b.o_next.assign(1, nn::Mat(3, n));
    b.a.assign(1, Vec(n));
    b.mask.assign(1, Vec::Ones(n));
    b.r_joint = Vec(n);
    b.terminal = Vec(n);

    int c = 0;
    for (int e = 0; e < episodes_per_arm; ++e) {
        // arm 1: A --a_hi--> B (r 0), then B terminal (r 1)
        b.o[0].col(c) = chain.obs_a;
        b.o_next[0].col(c) = chain.obs_b;
        b.a[0][c] = chain.a_hi;
        b.r_joint[c] = 0.0;
        b.terminal[c] = 0.0;
        ++c;
        b.o[0].col(c) = chain.obs_b;
        b.o_next[0].col(c) = chain.obs_b;
        b.a[0][c] = chain.a_mid;
        b.r_joint[c] = 1.0;
        b.terminal[c] = 1.0;
        ++c;
        // arm 2: A --a_lo--> C (r 0), then C terminal (r 0)
        b.o[0].col(c) = chain.obs_a;
        b.o_next[0].col(c) = chain.obs_c;
        b.a[0][c] = chain.a_lo;
        b.r_joint[c] = 0.0;
        b.terminal[c] = 0.0;
        ++c;
        b.o[0].col(c) = chain.obs_c;
        b.o_next[0].col(c) = chain.obs_c;
        b.a[0][c] = chain.a_mid;
        b.r_joint[c] = 0.0;
        b.terminal[c] = 1.0;
        ++c;
    }
    return chain;
}

inline bottom::BottomPolicyConfig chain_policy_config() {
    bottom::BottomPolicyConfig cfg;
    cfg.channels = 1;
    cfg.obs_dim = 3;
    cfg.aug_dim = 0;
    cfg.changing = {0, 1, 2};
    cfg.bounds = {bottom::ChannelBounds{0.5, 1.5}};
    cfg.hidden = {32, 32};
    cfg.lr = 3e-3;
    return cfg;
}

} // namespace crossbid::testsupport
