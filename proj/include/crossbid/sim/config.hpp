#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "crossbid/core/hash.hpp"
#include "crossbid/sim/types.hpp"

namespace crossbid::sim {

using json = nlohmann::json;

struct AdvertiserGen {
    double budget_min = 25.0, budget_max = 60.0;
    double cpc_target_min = 0.6, cpc_target_max = 1.6;
    double value_min = 3.0, value_max = 9.0;
    double active_prob = 0.55;
    double quality_sigma = 0.3;
};

/// World configuration: market shape, traffic, hidden feedback model seed.
struct WorldConfig {
    std::uint64_t seed = 1;          // market randomness (advertisers, traffic, auctions)
    std::uint64_t feedback_seed = 7; // hidden user-response model
    int num_advertisers = 20;        // M
    int num_channels = 4;            // P
    int ticks_per_day = 24;          // K
    int episode_days = 7;            // T: top-level trajectory length
    int user_feature_dim = 4;        // F
    double reserve_price = 0.1;
    double floor_spread = 1.2; // per-request slot-quality floor: reserve + spread * u^2
    std::vector<Channel> channels;
    AdvertiserGen adv_gen;

    void validate() const {
        CB_REQUIRE(num_advertisers > 0 && num_channels > 0, "WorldConfig: M and P must be positive");
        CB_REQUIRE(static_cast<int>(channels.size()) == num_channels,
                   "WorldConfig: channel list size != num_channels");
        CB_REQUIRE(episode_days > 0, "WorldConfig: episode_days must be positive");
        CB_REQUIRE(reserve_price >= 0.0, "WorldConfig: reserve must be nonnegative");
        for (const auto& c : channels) {
            c.validate();
            CB_REQUIRE(static_cast<int>(c.arrival_profile.size()) == ticks_per_day,
                       "channel ", c.id, ": arrival profile length != ticks_per_day");
        }
    }

    /// Desk-scale reference world: four channel archetypes, 20 advertisers,
    /// roughly 2000 requests per day.
    static WorldConfig reference() {
        WorldConfig w;
        
        w.channels.resize(4);
        const char* names[4] = {"feed", "search", "brand", "recommend"};
        const double daily_total[4] = {620.0, 700.0, 190.0, 490.0};
        const double ctr[4] = {0.22, 0.32, 0.12, 0.24};
        const double cvr[4] = {0.16, 0.22, 0.30, 0.14};
        const double part[4] = {0.35, 0.42, 0.30, 0.38};
        const double amp[4] = {0.45, 0.30, 0.55, 0.40};
        const double period[4] = {3.0, 2.0, 5.0, 4.0};
        const double phase[4] = {0.0, 0.25, 0.5, 0.75};
        // time-of-day shapes peaking at different hours per channel
        const double peak[4] = {20.0, 11.0, 15.0, 18.0};
        for (int p = 0; p < 4; ++p) {
            Channel& c = w.channels[p];
            c.id = p;
            c.name = names[p];
            c.base_ctr = ctr[p];
            c.base_cvr = cvr[p];
            c.participation = part[p];
            c.comp_amp = amp[p];
            c.comp_period_days = period[p];
            c.comp_phase = phase[p];
            c.arrival_profile.resize(w.ticks_per_day);
            double mass = 0.0;
            for (int k = 0; k < w.ticks_per_day; ++k) {
                const double x = (k - peak[p]) / 5.0;
                c.arrival_profile[k] = 0.25 + std::exp(-0.5 * x * x);
                mass += c.arrival_profile[k];
            }
            for (double& r : c.arrival_profile) r *= daily_total[p] / mass;
        }
        return w;
    }

    json to_json() const {
        json j;
        j["seed"] = seed;
        j["feedback_seed"] = feedback_seed;
        j["num_advertisers"] = num_advertisers;
        j["num_channels"] = num_channels;
        j["ticks_per_day"] = ticks_per_day;
        j["episode_days"] = episode_days;
        j["user_feature_dim"] = user_feature_dim;
        j["reserve_price"] = reserve_price;
        j["floor_spread"] = floor_spread;
        j["channels"] = json::array();
        for (const auto& c : channels) {
            json jc;
            jc["name"] = c.name;
            jc["arrival_profile"] = c.arrival_profile;
            jc["xi_min"] = c.xi_min;
            jc["xi_max"] = c.xi_max;
            jc["base_ctr"] = c.base_ctr;
            jc["base_cvr"] = c.base_cvr;
            jc["participation"] = c.participation;
            jc["comp_amp"] = c.comp_amp;
            jc["comp_period_days"] = c.comp_period_days;
            jc["comp_phase"] = c.comp_phase;
            j["channels"].push_back(jc);
        }
        j["advertiser_gen"] = {{"budget_min", adv_gen.budget_min},
                               {"budget_max", adv_gen.budget_max},
                               {"cpc_target_min", adv_gen.cpc_target_min},
                               {"cpc_target_max", adv_gen.cpc_target_max},
                               {"value_min", adv_gen.value_min},
                               {"value_max", adv_gen.value_max},
                               {"active_prob", adv_gen.active_prob},
                               {"quality_sigma", adv_gen.quality_sigma}};
        return j;
    }

    static WorldConfig from_json(const json& j) {
        WorldConfig w;
        w.seed = j.value("seed", w.seed);
        w.feedback_seed = j.value("feedback_seed", w.feedback_seed);
        w.num_advertisers = j.value("num_advertisers", w.num_advertisers);
        w.num_channels = j.value("num_channels", w.num_channels);
        w.ticks_per_day = j.value("ticks_per_day", w.ticks_per_day);
        w.episode_days = j.value("episode_days", w.episode_days);
        w.user_feature_dim = j.value("user_feature_dim", w.user_feature_dim);
        w.reserve_price = j.value("reserve_price", w.reserve_price);
        w.floor_spread = j.value("floor_spread", w.floor_spread);
        if (j.contains("channels")) {
            int p = 0;
            for (const auto& jc : j.at("channels")) {
                Channel c;
                c.id = p++;
                c.name = jc.value("name", std::string("ch") + std::to_string(c.id));
                c.arrival_profile = jc.at("arrival_profile").get<std::vector<double>>();
                c.xi_min = jc.value("xi_min", c.xi_min);
                c.xi_max = jc.value("xi_max", c.xi_max);
                c.base_ctr = jc.value("base_ctr", c.base_ctr);
                c.base_cvr = jc.value("base_cvr", c.base_cvr);
                c.participation = jc.value("participation", c.participation);
                c.comp_amp = jc.value("comp_amp", c.comp_amp);
                c.comp_period_days = jc.value("comp_period_days", c.comp_period_days);
                c.comp_phase = jc.value("comp_phase", c.comp_phase);
                w.channels.push_back(std::move(c));
            }
        } else {
            w.channels = reference().channels;
            w.num_channels = static_cast<int>(w.channels.size());
        }
        if (j.contains("advertiser_gen")) {
            const auto& g = j.at("advertiser_gen");
            auto& a = w.adv_gen;
            a.budget_min = g.value("budget_min", a.budget_min);
            a.budget_max = g.value("budget_max", a.budget_max);
            a.cpc_target_min = g.value("cpc_target_min", a.cpc_target_min);
            a.cpc_target_max = g.value("cpc_target_max", a.cpc_target_max);
            a.value_min = g.value("value_min", a.value_min);
            a.value_max = g.value("value_max", a.value_max);
            a.active_prob = g.value("active_prob", a.active_prob);
            a.quality_sigma = g.value("quality_sigma", a.quality_sigma);
        }
        w.validate();
        return w;
    }

    std::uint64_t hash() const { return fnv1a(to_json().dump()); }
};

/// Deterministic advertiser population from the world seed.
inline std::vector<Advertiser> generate_advertisers(const WorldConfig& cfg) {
    std::vector<Advertiser> advs(cfg.num_advertisers);
    Rng rng(derive_seed(cfg.seed, 0xADu));
    for (int m = 0; m < cfg.num_advertisers; ++m) {
        Advertiser& a = advs[m];
        a.id = m;
        a.daily_budget = rng.uniform(cfg.adv_gen.budget_min, cfg.adv_gen.budget_max);
        a.cpc_target = rng.uniform(cfg.adv_gen.cpc_target_min, cfg.adv_gen.cpc_target_max);
        a.value_per_conversion = rng.uniform(cfg.adv_gen.value_min, cfg.adv_gen.value_max);
        a.quality.assign(cfg.num_channels, 0.0);
        for (int p = 0; p < cfg.num_channels; ++p)
            if (rng.uniform() < cfg.adv_gen.active_prob) a.active_channels.push_back(p);
        if (a.active_channels.empty())
            a.active_channels.push_back(rng.uniform_int(cfg.num_channels));
        for (int p : a.active_channels) a.quality[p] = rng.normal(0.0, cfg.adv_gen.quality_sigma);
        a.validate(cfg.num_channels);
    }
    return advs;
}

/// Channel user-feature means derive from the feedback seed so the hidden
/// response model and the user population stay coupled.
inline void attach_user_means(WorldConfig& cfg) {
    for (auto& c : cfg.channels) {
        Rng rng(derive_seed(cfg.feedback_seed, 0x5EEDu, static_cast<std::uint64_t>(c.id)));
        c.user_mean = Vec(cfg.user_feature_dim);
        for (int f = 0; f < cfg.user_feature_dim; ++f) c.user_mean[f] = rng.normal(0.0, 0.6);
    }
}

inline FeedbackModel build_feedback_model(const WorldConfig& cfg) {
    std::vector<double> ctrs, cvrs;
    for (const auto& c : cfg.channels) {
        ctrs.push_back(c.base_ctr);
        cvrs.push_back(c.base_cvr);
    }
    return FeedbackModel::create(cfg.num_channels, cfg.user_feature_dim, ctrs, cvrs,
                                 Rng(derive_seed(cfg.feedback_seed, 0xFBu)));
}

} // namespace crossbid::sim
