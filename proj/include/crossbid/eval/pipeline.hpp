#pragma once

#include <chrono>

#include "crossbid/eval/model.hpp"
#include "crossbid/logs/build.hpp"
#include "crossbid/logs/io.hpp"
#include "crossbid/top/trainer.hpp"

namespace crossbid::eval {

struct StageTrace {
    std::string stage;
    std::vector<double> loss;
};

struct TrainResult {
    TrainedModel model;
    std::vector<StageTrace> traces;
    json manifest;
};

namespace detail_pipe {

inline std::uint64_t dataset_hash(const logs::TopDataset& ds) {
    std::uint64_t h = fnv1a(logs::TopDataset::kSchema);
    for (const auto& t : ds.items) {
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(t.s.data()),
                                   t.s.size() * sizeof(double)), h);
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(t.b.data()),
                                   t.b.size() * sizeof(double)), h);
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(&t.g), sizeof(double)), h);
    }
    return h;
}

inline std::uint64_t dataset_hash(const logs::BottomDataset& ds) {
    std::uint64_t h = fnv1a(logs::BottomDataset::kSchema);
    for (const auto& t : ds.items) {
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(t.action.data()),
                                   t.action.size() * sizeof(double)), h);
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(t.reward.data()),
                                   t.reward.size() * sizeof(double)), h);
    }
    return h;
}

template <typename F>
void run_stage(const char* name, F&& body) {
    try {
        body();
    } catch (const std::exception& e) {
        detail::raise("training stage '", name, "' failed: ", e.what());
    }
}

inline int derive_steps(int epochs, std::size_t dataset_size, int batch, int floor_steps) {
    const int per_epoch = static_cast<int>((dataset_size + batch - 1) / batch);
    return std::max(epochs * std::max(1, per_epoch), floor_steps);
}

} // namespace detail_pipe

/// Fresh model skeleton with seeded initialization.
inline TrainedModel init_model(const Config& cfg, int top_state_dim, int obs_dim,
                               std::uint64_t seed) {
    TrainedModel m;
    m.cfg = cfg;
    m.top_state_dim = top_state_dim;
    m.obs_dim = obs_dim;
    const int P = cfg.world.num_channels;
    Rng rng(derive_seed(seed, 0x1217));
    if (cfg.use_diffusion()) {
        m.top_policy = top::TopPolicy(
            P, top_state_dim, cfg.top.hidden,
            top::DiffusionSchedule::named(cfg.top.schedule, cfg.top.diffusion_steps), rng);
        m.top_opt = nn::Adam(nn::OptimizerConfig{.lr = cfg.top.lr, .clip_norm = 10.0},
                             m.top_policy.net().num_params());
    } else {
        m.direct_policy = top::DirectTopPolicy(P, top_state_dim, cfg.top.hidden, rng);
        m.top_opt = nn::Adam(nn::OptimizerConfig{.lr = cfg.top.lr, .clip_norm = 10.0},
                             m.direct_policy.net().num_params());
    }
    m.critic = top::TopCritic(top_state_dim, P, cfg.top.hidden, rng, cfg.top.tau);
    m.critic.set_lr(cfg.top.lr * 3.0);

    m.policies = bottom::BottomPolicies(TrainedModel::bottom_policy_config(cfg, obs_dim), rng);
    if (cfg.use_central_value()) {
        m.central = bottom::ValueFunction(P * obs_dim, cfg.bottom.hidden, cfg.bottom.expectile,
                                          rng, cfg.bottom.tau);
        m.central.set_lr(cfg.bottom.lr);
    } else {
        for (int p = 0; p < P; ++p) {
            m.locals.emplace_back(obs_dim, cfg.bottom.hidden, cfg.bottom.expectile, rng,
                                  cfg.bottom.tau);
            m.locals.back().set_lr(cfg.bottom.lr);
        }
    }
    if (cfg.use_cmck())
        m.encoders = cmck::KnowledgeEncoders(TrainedModel::cmck_config(cfg, obs_dim), rng);
    return m;
}

/// Offline training: CMCK task inference first (phase 1), then the bottom
/// value and decoupled policies against the frozen encoders, then the top
/// critic and allocation policy. `steps_scale` shrinks every stage for
/// fine-tuning cycles; a warm start keeps parameters and optimizer state and
/// skips phase 1 (the encoders are frozen after it).
inline TrainResult train_pipeline(const Config& cfg, const logs::TopDataset& top_ds,
                                  const logs::BottomDataset& bottom_ds, std::uint64_t seed,
                                  const TrainedModel* warm_start = nullptr,
                                  double steps_scale = 1.0) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    CB_REQUIRE(!bottom_ds.items.empty(), "train_pipeline: bottom dataset (D^l) is empty");
    CB_REQUIRE(!top_ds.items.empty(), "train_pipeline: top dataset (D^h) is empty");

    TrainResult out;
    out.model = warm_start ? *warm_start
                           : init_model(cfg, top_ds.state_dim, bottom_ds.obs_dim, seed);
    TrainedModel& m = out.model;
    if (warm_start) {
        m.cfg = cfg;
        m.version = warm_start->version + 1;
    }

    logs::BottomSampler bsampler(bottom_ds);
    logs::TopSampler tsampler(top_ds);
    logs::ContextStreams streams;
    std::vector<std::vector<Vec>> ztables;

    // phase 1: meta-channel knowledge
    if (cfg.use_cmck()) {
        streams = logs::build_context_streams(bottom_ds);
        if (!warm_start) {
            detail_pipe::run_stage("cmck", [&] {
                std::vector<nn::Mat> channel_rows = streams.rows;
                Rng rng(derive_seed(seed, 0xC3C1));
                const int steps = std::max(1, static_cast<int>(cfg.cmck.steps * steps_scale));
                auto trace = cmck::train_task_infer(m.encoders, channel_rows, cfg.cmck.eta,
                                                    steps, rng);
                StageTrace st{"cmck", {}};
                for (const auto& p : trace) st.loss.push_back(p.total);
                out.traces.push_back(std::move(st));
            });
        }
        ztables = logs::build_ztables(m.encoders, streams, cfg.cmck.window);
    }

    const int bottom_batch =
        std::min<int>(cfg.bottom.batch, static_cast<int>(bsampler.size()));
    const int bottom_steps = static_cast<int>(
        detail_pipe::derive_steps(cfg.bottom.epochs, bsampler.size(), cfg.bottom.batch,
                                  cfg.bottom.min_steps) *
        steps_scale);

    // stage 2: value function(s)
    detail_pipe::run_stage("value", [&] {
        Rng rng(derive_seed(seed, 0x7A1E));
        StageTrace st{"value", {}};
        const int steps = bottom_steps * cfg.bottom.value_epochs_scale;
        for (int i = 0; i < steps; ++i) {
            auto batch = bsampler.sample(bottom_batch, rng);
            if (cfg.use_central_value()) {
                st.loss.push_back(bottom::train_value(m.central, batch, cfg.bottom.gamma));
            } else {
                double total = 0.0;
                for (int p = 0; p < cfg.world.num_channels; ++p)
                    total += m.locals[p].train_step(batch.o[p], batch.r_joint, batch.o_next[p],
                                                    batch.terminal, cfg.bottom.gamma);
                st.loss.push_back(total / cfg.world.num_channels);
            }
        }
        out.traces.push_back(std::move(st));
    });

    // stage 3: decoupled state/action policies
    detail_pipe::run_stage("policies", [&] {
        Rng rng(derive_seed(seed, 0x9011C1));
        StageTrace st{"state_policy", {}};
        StageTrace at{"action_policy", {}};
        for (int i = 0; i < bottom_steps; ++i) {
            auto batch = bsampler.sample(bottom_batch, rng,
                                         cfg.use_cmck() ? &streams : nullptr,
                                         cfg.use_cmck() ? &ztables : nullptr,
                                         cfg.use_cmck() ? cfg.cmck.latent_dim : 0);
            if (cfg.use_central_value())
                st.loss.push_back(
                    bottom::train_state_policy(m.policies, m.central, batch, cfg.bottom.lambda)
                        .total);
            else
                st.loss.push_back(bottom::train_state_policy_local(m.policies, m.locals, batch,
                                                                   cfg.bottom.lambda)
                                      .total);
            at.loss.push_back(bottom::train_action_policy(m.policies, batch));
        }
        out.traces.push_back(std::move(st));
        out.traces.push_back(std::move(at));
    });

    // stage 4: top critic + allocation policy
    detail_pipe::run_stage("top", [&] {
        Rng rng(derive_seed(seed, 0x70F));
        const int top_batch = std::min<int>(cfg.top.batch, static_cast<int>(top_ds.items.size()));
        const int steps = static_cast<int>(
            detail_pipe::derive_steps(cfg.top.epochs, top_ds.items.size(), cfg.top.batch,
                                      cfg.top.min_steps) *
            steps_scale);
        StageTrace ct{"top_critic", {}};
        StageTrace pt{"top_policy", {}};
        top::AllocationSampler sampler;
        if (cfg.use_diffusion())
            sampler = [&](const nn::Mat& s, Rng& r) { return m.top_policy.sample_batch(s, r); };
        else
            sampler = [&](const nn::Mat& s, Rng&) { return m.direct_policy.sample_batch(s); };
        for (int i = 0; i < steps; ++i) {
            auto batch = tsampler.sample(top_batch, rng);
            ct.loss.push_back(m.critic.train_step(batch, sampler, cfg.top.gamma, rng));
            if (cfg.use_diffusion()) {
                pt.loss.push_back(top::train_policy_step(m.top_policy, m.critic, batch, cfg.top.alpha,
                                                    cfg.effective_cpc_weight(), m.top_opt, rng)
                                      .total);
            } else {
                pt.loss.push_back(top::train_direct_policy_step(m.direct_policy, m.critic, batch,
                                                           cfg.top.alpha,
                                                           cfg.effective_cpc_weight(), m.top_opt)
                                      .total);
            }
        }
        out.traces.push_back(std::move(ct));
        out.traces.push_back(std::move(pt));
    });

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json manifest;
    manifest["kind"] = warm_start ? "finetune" : "train";
    manifest["version"] = m.version;
    manifest["seed"] = seed;
    manifest["config"] = cfg.to_json();
    manifest["config_hash"] = hash_hex(cfg.hash());
    manifest["world_hash"] = hash_hex(cfg.world.hash());
    manifest["datasets"] = {{"top", {{"count", top_ds.items.size()},
                                     {"hash", hash_hex(detail_pipe::dataset_hash(top_ds))}}},
                            {"bottom", {{"count", bottom_ds.items.size()},
                                        {"hash", hash_hex(detail_pipe::dataset_hash(bottom_ds))}}}};
    manifest["elapsed_sec"] = elapsed;
    json stages = json::array();
    for (const auto& t : out.traces)
        stages.push_back({{"name", t.stage},
                          {"steps", t.loss.size()},
                          {"final_loss", t.loss.empty() ? 0.0 : t.loss.back()}});
    manifest["stages"] = std::move(stages);
    if (warm_start && warm_start->cfg.hash() != cfg.hash())
        manifest["note"] = "fine-tune with a different config than the parent";
    out.manifest = std::move(manifest);
    return out;
}

/// One iterated fine-tuning cycle: merge the new logs into the datasets and
/// continue training from the previous checkpoint at reduced step counts.
/// A cycle with no new logs is a no-op (checkpoints unchanged).
inline TrainResult finetune_cycle(const TrainedModel& model, const logs::TopDataset& merged_top,
                                  const logs::BottomDataset& merged_bottom, std::uint64_t seed,
                                  double steps_scale = 0.3, bool any_new_logs = true) {
    if (!any_new_logs) {
        TrainResult out;
        out.model = model;
        out.manifest = {{"kind", "finetune"},
                        {"version", model.version},
                        {"note", "no new logs; checkpoints unchanged"}};
        return out;
    }
    return train_pipeline(model.cfg, merged_top, merged_bottom, seed, &model, steps_scale);
}

} // namespace crossbid::eval
