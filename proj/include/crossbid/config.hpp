#pragma once

#include "crossbid/baselines/cem.hpp"
#include "crossbid/core/io.hpp"
#include "crossbid/logs/behavior.hpp"
#include "crossbid/sim/config.hpp"

namespace crossbid {

using json = nlohmann::json;

/// Full experiment configuration. Defaults follow the published
/// hyperparameter table (batch sizes 7084/1024/2048, learning rates
/// 1e-5/1e-5/2e-4, discounts 0.99, repetition passes 25/8, action ranges);
/// the desk-scale reference config overrides sizes for quick runs.
struct Config {
    sim::WorldConfig world = sim::WorldConfig::reference();
    logs::BehaviorConfig behavior;

    struct Top {
        double alpha = 1.0;
        double cpc_weight = 1.0;
        int diffusion_steps = 5;
        std::string schedule = "vp"; // vp | linear
        double grid_step = 0.05;
        int batch = 7084;
        double lr = 1e-5;
        double gamma = 0.99;
        int epochs = 25; // repetition passes over the dataset
        int min_steps = 800; // floor on optimizer steps for small datasets
        std::vector<int> hidden = {256, 256};
        double tau = 0.005;
    } top;

    struct Bottom {
        double expectile = 0.7;
        double lambda = 1.0;
        int batch = 1024;
        double lr = 1e-5;
        double gamma = 0.99;
        std::string reward_mode = "hinge"; // hinge | literal
        int epochs = 8;
        int min_steps = 500; // floor on optimizer steps for small datasets
        std::vector<int> hidden = {256, 256};
        double sigma_state = 0.1;
        double sigma_action = 0.25;
        double tau = 0.005;
        int value_epochs_scale = 2; // value pass runs this multiple of policy epochs
    } bottom;

    struct Cmck {
        bool enabled = true;
        double eta = 1.0;
        int latent_dim = 16;
        int window = 64;
        std::string policy_encoder = "spec"; // spec | com | both
        int batch = 2048;
        double lr = 2e-4;
        int steps = 1500;
        bool normalize_latents = true;
        std::vector<int> hidden = {128, 128};
    } cmck;

    struct Baselines {
        baselines::PidGains pid_gains{0.3, 0.05, 0.1, 5.0};
        double pid_margin = 1.0; // the PID baseline tracks the raw target
        int cem_population = 12;
        double cem_elite_frac = 0.2;
        double cem_sigma_floor = 0.05;
        int cem_iterations = 12;
        int cem_probe_days = 2;
        double cem_violation_penalty = 10.0; // per unit of relative CPC overshoot
    } baselines;

    struct Eval {
        int train_days = 28;
        int eval_days = 7;
        int warmup_days = 2;
        double roi_threshold = 1.0;
    } eval;

    std::string ablation = "none"; // none | no-cpc | no-diffusion | no-cmck | no-central

    bool use_diffusion() const { return ablation != "no-diffusion"; }
    bool use_cmck() const { return cmck.enabled && ablation != "no-cmck"; }
    bool use_central_value() const { return ablation != "no-central"; }
    double effective_cpc_weight() const { return ablation == "no-cpc" ? 0.0 : top.cpc_weight; }

    void validate() const {
        world.validate();
        CB_REQUIRE(top.grid_step > 0.0 && top.grid_step <= 1.0, "config: bad top.grid_step");
        CB_REQUIRE(top.gamma >= 0.0 && top.gamma < 1.0, "config: top.gamma must be in [0,1)");
        CB_REQUIRE(bottom.gamma >= 0.0 && bottom.gamma < 1.0, "config: bottom.gamma must be in [0,1)");
        CB_REQUIRE(bottom.expectile > 0.0 && bottom.expectile < 1.0,
                   "config: bottom.expectile must be in (0,1)");
        CB_REQUIRE(ablation == "none" || ablation == "no-cpc" || ablation == "no-diffusion" ||
                       ablation == "no-cmck" || ablation == "no-central",
                   "config: unknown ablation '", ablation, "'");
        (void)bottom::reward_mode_from(bottom.reward_mode);
    }

    json to_json() const {
        json j;
        j["world"] = world.to_json();
        j["behavior"] = {{"mixture",
                          {{"expert", behavior.mixture.expert},
                           {"medium", behavior.mixture.medium},
                           {"random", behavior.mixture.random}}},
                         {"expert_margin", behavior.expert_margin},
                         {"medium_margin", behavior.medium_margin},
                         {"roi_threshold", behavior.roi_threshold},
                         {"seed", behavior.seed}};
        j["top"] = {{"alpha", top.alpha},
                    {"cpc_weight", top.cpc_weight},
                    {"diffusion_steps", top.diffusion_steps},
                    {"schedule", top.schedule},
                    {"grid_step", top.grid_step},
                    {"batch", top.batch},
                    {"lr", top.lr},
                    {"gamma", top.gamma},
                    {"epochs", top.epochs},
                    {"min_steps", top.min_steps},
                    {"hidden", top.hidden},
                    {"tau", top.tau}};
        j["bottom"] = {{"expectile", bottom.expectile},
                       {"lambda", bottom.lambda},
                       {"batch", bottom.batch},
                       {"lr", bottom.lr},
                       {"gamma", bottom.gamma},
                       {"reward_mode", bottom.reward_mode},
                       {"epochs", bottom.epochs},
                       {"min_steps", bottom.min_steps},
                       {"hidden", bottom.hidden},
                       {"sigma_state", bottom.sigma_state},
                       {"sigma_action", bottom.sigma_action},
                       {"tau", bottom.tau},
                       {"value_epochs_scale", bottom.value_epochs_scale}};
        j["cmck"] = {{"enabled", cmck.enabled},
                     {"eta", cmck.eta},
                     {"latent_dim", cmck.latent_dim},
                     {"window", cmck.window},
                     {"policy_encoder", cmck.policy_encoder},
                     {"batch", cmck.batch},
                     {"lr", cmck.lr},
                     {"steps", cmck.steps},
                     {"normalize_latents", cmck.normalize_latents},
                     {"hidden", cmck.hidden}};
        j["baselines"] = {{"pid_kp", baselines.pid_gains.kp},
                          {"pid_ki", baselines.pid_gains.ki},
                          {"pid_kd", baselines.pid_gains.kd},
                          {"pid_margin", baselines.pid_margin},
                          {"cem_population", baselines.cem_population},
                          {"cem_elite_frac", baselines.cem_elite_frac},
                          {"cem_sigma_floor", baselines.cem_sigma_floor},
                          {"cem_iterations", baselines.cem_iterations},
                          {"cem_probe_days", baselines.cem_probe_days},
                          {"cem_violation_penalty", baselines.cem_violation_penalty}};
        j["eval"] = {{"train_days", eval.train_days},
                     {"eval_days", eval.eval_days},
                     {"warmup_days", eval.warmup_days},
                     {"roi_threshold", eval.roi_threshold}};
        j["ablation"] = ablation;
        return j;
    }

    static Config from_json(const json& j) {
        Config c;
        if (j.contains("world")) c.world = sim::WorldConfig::from_json(j.at("world"));
        if (j.contains("behavior")) {
            const auto& b = j.at("behavior");
            if (b.contains("mixture")) {
                c.behavior.mixture.expert = b.at("mixture").value("expert", c.behavior.mixture.expert);
                c.behavior.mixture.medium = b.at("mixture").value("medium", c.behavior.mixture.medium);
                c.behavior.mixture.random = b.at("mixture").value("random", c.behavior.mixture.random);
            }
            c.behavior.expert_margin = b.value("expert_margin", c.behavior.expert_margin);
            c.behavior.medium_margin = b.value("medium_margin", c.behavior.medium_margin);
            c.behavior.roi_threshold = b.value("roi_threshold", c.behavior.roi_threshold);
            c.behavior.seed = b.value("seed", c.behavior.seed);
        }
        if (j.contains("top")) {
            const auto& t = j.at("top");
            c.top.alpha = t.value("alpha", c.top.alpha);
            c.top.cpc_weight = t.value("cpc_weight", c.top.cpc_weight);
            c.top.diffusion_steps = t.value("diffusion_steps", c.top.diffusion_steps);
            c.top.schedule = t.value("schedule", c.top.schedule);
            c.top.grid_step = t.value("grid_step", c.top.grid_step);
            c.top.batch = t.value("batch", c.top.batch);
            c.top.lr = t.value("lr", c.top.lr);
            c.top.gamma = t.value("gamma", c.top.gamma);
            c.top.epochs = t.value("epochs", c.top.epochs);
            c.top.min_steps = t.value("min_steps", c.top.min_steps);
            c.top.hidden = t.value("hidden", c.top.hidden);
            c.top.tau = t.value("tau", c.top.tau);
        }
        if (j.contains("bottom")) {
            const auto& b = j.at("bottom");
            c.bottom.expectile = b.value("expectile", c.bottom.expectile);
            c.bottom.lambda = b.value("lambda", c.bottom.lambda);
            c.bottom.batch = b.value("batch", c.bottom.batch);
            c.bottom.lr = b.value("lr", c.bottom.lr);
            c.bottom.gamma = b.value("gamma", c.bottom.gamma);
            c.bottom.reward_mode = b.value("reward_mode", c.bottom.reward_mode);
            c.bottom.epochs = b.value("epochs", c.bottom.epochs);
            c.bottom.min_steps = b.value("min_steps", c.bottom.min_steps);
            c.bottom.hidden = b.value("hidden", c.bottom.hidden);
            c.bottom.sigma_state = b.value("sigma_state", c.bottom.sigma_state);
            c.bottom.sigma_action = b.value("sigma_action", c.bottom.sigma_action);
            c.bottom.tau = b.value("tau", c.bottom.tau);
            c.bottom.value_epochs_scale = b.value("value_epochs_scale", c.bottom.value_epochs_scale);
        }
        if (j.contains("cmck")) {
            const auto& m = j.at("cmck");
            c.cmck.enabled = m.value("enabled", c.cmck.enabled);
            c.cmck.eta = m.value("eta", c.cmck.eta);
            c.cmck.latent_dim = m.value("latent_dim", c.cmck.latent_dim);
            c.cmck.window = m.value("window", c.cmck.window);
            c.cmck.policy_encoder = m.value("policy_encoder", c.cmck.policy_encoder);
            c.cmck.batch = m.value("batch", c.cmck.batch);
            c.cmck.lr = m.value("lr", c.cmck.lr);
            c.cmck.steps = m.value("steps", c.cmck.steps);
            c.cmck.normalize_latents = m.value("normalize_latents", c.cmck.normalize_latents);
            c.cmck.hidden = m.value("hidden", c.cmck.hidden);
        }
        if (j.contains("baselines")) {
            const auto& b = j.at("baselines");
            c.baselines.pid_gains.kp = b.value("pid_kp", c.baselines.pid_gains.kp);
            c.baselines.pid_gains.ki = b.value("pid_ki", c.baselines.pid_gains.ki);
            c.baselines.pid_gains.kd = b.value("pid_kd", c.baselines.pid_gains.kd);
            c.baselines.pid_margin = b.value("pid_margin", c.baselines.pid_margin);
            c.baselines.cem_population = b.value("cem_population", c.baselines.cem_population);
            c.baselines.cem_elite_frac = b.value("cem_elite_frac", c.baselines.cem_elite_frac);
            c.baselines.cem_sigma_floor = b.value("cem_sigma_floor", c.baselines.cem_sigma_floor);
            c.baselines.cem_iterations = b.value("cem_iterations", c.baselines.cem_iterations);
            c.baselines.cem_probe_days = b.value("cem_probe_days", c.baselines.cem_probe_days);
            c.baselines.cem_violation_penalty =
                b.value("cem_violation_penalty", c.baselines.cem_violation_penalty);
        }
        if (j.contains("eval")) {
            const auto& e = j.at("eval");
            c.eval.train_days = e.value("train_days", c.eval.train_days);
            c.eval.eval_days = e.value("eval_days", c.eval.eval_days);
            c.eval.warmup_days = e.value("warmup_days", c.eval.warmup_days);
            c.eval.roi_threshold = e.value("roi_threshold", c.eval.roi_threshold);
        }
        c.ablation = j.value("ablation", c.ablation);
        c.validate();
        return c;
    }

    static Config load(const std::string& path) {
        return from_json(json::parse(slurp_file(path)));
    }

    std::uint64_t hash() const { return fnv1a(to_json().dump()); }

    /// Desk-scale settings sized for minutes-not-hours runs; everything else
    /// keeps the published defaults.
    static Config desk_reference() {
        Config c;
        c.top.batch = 256;
        c.top.lr = 1e-3;
        c.top.epochs = 25;
        c.top.hidden = {64, 64};
        c.bottom.batch = 256;
        c.bottom.lr = 2e-3;
        c.bottom.epochs = 8;
        c.bottom.hidden = {64, 64};
        c.cmck.batch = 64;
        c.cmck.lr = 1e-3;
        c.cmck.steps = 1200;
        c.cmck.latent_dim = 8;
        c.cmck.hidden = {64, 64};
        return c;
    }
};

} // namespace crossbid
