#pragma once

#include "crossbid/bottom/policies.hpp"
#include "crossbid/cmck/cmck.hpp"
#include "crossbid/config.hpp"
#include "crossbid/nn/checkpoint.hpp"
#include "crossbid/top/policy.hpp"
#include "crossbid/top/critic.hpp"

namespace crossbid::eval {

/// The trained HMMCB bundle: top-level allocator (diffusion or the direct
/// ablation net) with its critic, per-channel bottom policies, the value
/// function(s), and the frozen context encoders.
struct TrainedModel {
    Config cfg;
    int version = 0;

    top::TopPolicy top_policy;
    top::DirectTopPolicy direct_policy;
    top::TopCritic critic;
    nn::Adam top_opt;

    bottom::BottomPolicies policies;
    bottom::ValueFunction central;
    std::vector<bottom::ValueFunction> locals;

    cmck::KnowledgeEncoders encoders;

    int top_state_dim = 0;
    int obs_dim = 0;

    bool use_diffusion() const { return cfg.use_diffusion(); }
    bool use_cmck() const { return cfg.use_cmck(); }
    bool use_central() const { return cfg.use_central_value(); }

    /// One checkpoint file holds every net plus optimizer state and the
    /// config snapshot; byte layout documented in nn/checkpoint.hpp.
    void save(const std::string& path) const {
        nn::Checkpoint ck;
        if (use_diffusion())
            ck.add("top.eps", top_policy.net(), top_opt);
        else
            ck.add("top.direct", direct_policy.net(), top_opt);
        ck.add("top.q1", critic.q1());
        ck.add("top.q2", critic.q2());
        ck.add("top.t1", critic.target1());
        ck.add("top.t2", critic.target2());
        for (int p = 0; p < policies.channels(); ++p) {
            ck.add("bottom.state." + std::to_string(p), policies.state(p).net());
            ck.add("bottom.action." + std::to_string(p), policies.action(p).net());
        }
        if (use_central()) {
            ck.add("value.central", central.net());
            ck.add("value.central.target", central.target_net());
        } else {
            for (std::size_t p = 0; p < locals.size(); ++p) {
                ck.add("value.local." + std::to_string(p), locals[p].net());
                ck.add("value.local.target." + std::to_string(p), locals[p].target_net());
            }
        }
        if (use_cmck()) {
            ck.add("cmck.com", encoders.com());
            ck.add("cmck.spec", encoders.spec());
            ck.add("cmck.dec", encoders.dec());
        }
        ck.meta()["config"] = cfg.to_json().dump();
        ck.meta()["version"] = std::to_string(version);
        ck.meta()["top_state_dim"] = std::to_string(top_state_dim);
        ck.meta()["obs_dim"] = std::to_string(obs_dim);
        ck.save(path);
    }

    static TrainedModel load(const std::string& path) {
        nn::Checkpoint ck = nn::Checkpoint::load(path);
        TrainedModel m;
        m.cfg = Config::from_json(json::parse(ck.meta().at("config")));
        m.version = std::stoi(ck.meta().at("version"));
        m.top_state_dim = std::stoi(ck.meta().at("top_state_dim"));
        m.obs_dim = std::stoi(ck.meta().at("obs_dim"));
        const int P = m.cfg.world.num_channels;

        if (m.use_diffusion()) {
            nn::Adam opt;
            nn::Mlp eps;
            ck.restore("top.eps", eps, &opt);
            m.top_opt = opt;
            m.top_policy.rebuild(P, m.top_state_dim, std::move(eps),
                                 top::DiffusionSchedule::named(m.cfg.top.schedule,
                                                               m.cfg.top.diffusion_steps));
        } else {
            nn::Adam opt;
            nn::Mlp net;
            ck.restore("top.direct", net, &opt);
            m.top_opt = opt;
            m.direct_policy.rebuild(P, m.top_state_dim, std::move(net));
        }
        Rng scratch(1);
        m.critic = top::TopCritic(m.top_state_dim, P, m.cfg.top.hidden, scratch, m.cfg.top.tau);
        m.critic.q1() = ck.restore("top.q1");
        m.critic.q2() = ck.restore("top.q2");
        m.critic.target1() = ck.restore("top.t1");
        m.critic.target2() = ck.restore("top.t2");

        bottom::BottomPolicyConfig pc = bottom_policy_config(m.cfg, m.obs_dim);
        m.policies = bottom::BottomPolicies(pc, scratch);
        for (int p = 0; p < P; ++p) {
            m.policies.state(p).net() = ck.restore("bottom.state." + std::to_string(p));
            m.policies.action(p).net() = ck.restore("bottom.action." + std::to_string(p));
        }
        if (m.use_central()) {
            m.central = bottom::ValueFunction(P * m.obs_dim, m.cfg.bottom.hidden,
                                              m.cfg.bottom.expectile, scratch, m.cfg.bottom.tau);
            m.central.rebuild(ck.restore("value.central"), ck.restore("value.central.target"),
                              m.cfg.bottom.expectile, m.cfg.bottom.tau);
        } else {
            for (int p = 0; p < P; ++p) {
                bottom::ValueFunction v(m.obs_dim, m.cfg.bottom.hidden, m.cfg.bottom.expectile,
                                        scratch, m.cfg.bottom.tau);
                v.rebuild(ck.restore("value.local." + std::to_string(p)),
                          ck.restore("value.local.target." + std::to_string(p)),
                          m.cfg.bottom.expectile, m.cfg.bottom.tau);
                m.locals.push_back(std::move(v));
            }
        }
        if (m.use_cmck()) {
            cmck::CmckConfig cc = cmck_config(m.cfg, m.obs_dim);
            m.encoders = cmck::KnowledgeEncoders(cc, scratch);
            m.encoders.com() = ck.restore("cmck.com");
            m.encoders.spec() = ck.restore("cmck.spec");
            m.encoders.dec() = ck.restore("cmck.dec");
        }
        return m;
    }

    static bottom::BottomPolicyConfig bottom_policy_config(const Config& cfg, int obs_dim) {
        bottom::BottomPolicyConfig pc;
        pc.channels = cfg.world.num_channels;
        pc.obs_dim = obs_dim;
        pc.aug_dim = cfg.use_cmck() ? cfg.cmck.latent_dim : 0;
        pc.changing = sim::ObsLayout{cfg.world.user_feature_dim}.changing_indices();
        for (const auto& ch : cfg.world.channels)
            pc.bounds.push_back(bottom::ChannelBounds{ch.xi_min, ch.xi_max});
        pc.hidden = cfg.bottom.hidden;
        pc.sigma_state = cfg.bottom.sigma_state;
        pc.sigma_action = cfg.bottom.sigma_action;
        pc.lr = cfg.bottom.lr;
        return pc;
    }

    static cmck::CmckConfig cmck_config(const Config& cfg, int obs_dim) {
        cmck::CmckConfig cc;
        cc.row_dim = 2 * obs_dim + 2;
        cc.latent_dim = cfg.cmck.latent_dim;
        cc.window = cfg.cmck.window;
        cc.eta = cfg.cmck.eta;
        cc.hidden = cfg.cmck.hidden;
        cc.policy_encoder = cfg.cmck.policy_encoder;
        cc.lr = cfg.cmck.lr;
        cc.batch_rows = std::min(cfg.cmck.batch, 256);
        cc.normalize_latents = cfg.cmck.normalize_latents;
        return cc;
    }
};

} // namespace crossbid::eval
