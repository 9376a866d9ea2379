#pragma once

#include <cmath>

#include "crossbid/nn/mlp.hpp"

namespace crossbid::nn {

struct OptimizerConfig {
    double lr = 1e-3;
    double clip_norm = 10.0; // bounds the applied update to lr * clip_norm
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        CB_REQUIRE(lr >= 0.0, "OptimizerConfig: learning rate must be >= 0");
        CB_REQUIRE(clip_norm > 0.0, "OptimizerConfig: clip norm must be positive");
    }
};

/// Adam with the update direction clipped by norm, so a single step never
/// moves parameters by more than lr * clip_norm.
class Adam {
public:
    Adam() = default;
    Adam(OptimizerConfig cfg, Eigen::Index n) : cfg_(cfg), m_(Vec::Zero(n)), v_(Vec::Zero(n)) {
        cfg_.validate();
    }

    void step(Mlp& net, const ParamGrad& grad) {
        Vec g = Mlp::flatten(grad);
        CB_REQUIRE(g.allFinite(), "Adam::step: non-finite gradient");
        CB_REQUIRE(g.size() == m_.size(), "Adam::step: gradient size mismatch");
        ++t_;
        m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * g;
        v_ = cfg_.beta2 * v_.array().matrix() + (1.0 - cfg_.beta2) * g.array().square().matrix();
        const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
        Vec dir = (m_ / bc1).array() / ((v_ / bc2).array().sqrt() + cfg_.eps);
        const double n = dir.norm();
        if (n > cfg_.clip_norm) dir *= cfg_.clip_norm / n;
        net.set_theta(net.theta() - cfg_.lr * dir);
    }

    const OptimizerConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }
    long step_count() const { return t_; }

    // serialization access
    const Vec& m() const { return m_; }
    const Vec& v() const { return v_; }
    void restore(const Vec& m, const Vec& v, long t) {
        m_ = m;
        v_ = v;
        t_ = t;
    }

private:
    OptimizerConfig cfg_;
    Vec m_, v_;
    long t_ = 0;
};

} // namespace crossbid::nn
