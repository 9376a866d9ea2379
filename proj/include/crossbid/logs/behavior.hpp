#pragma once

#include "crossbid/baselines/pid.hpp"
#include "crossbid/logs/schema.hpp"

namespace crossbid::logs {

struct MixtureWeights {
    double expert = 0.6;
    double medium = 0.2;
    double random = 0.2;

    void validate() const {
        CB_REQUIRE(expert >= 0.0 && medium >= 0.0 && random >= 0.0,
                   "mixture: weights must be nonnegative");
        CB_REQUIRE(std::abs(expert + medium + random - 1.0) < 1e-9,
                   "mixture: weights must sum to 1, got ", expert + medium + random);
    }
};

struct BehaviorConfig {
    MixtureWeights mixture;
    baselines::PidGains expert_gains{0.3, 0.05, 0.1, 5.0};
    baselines::PidGains medium_gains{0.9, 0.0, 0.0, 5.0};
    double expert_margin = 0.60; // expert tracks margin * CPC^tar
    double medium_margin = 1.30; // medium deliberately overshoots the target
    double roi_threshold = 1.0;  // outcome label: profitable means ROI >= this
    std::uint64_t seed = 1;
};

/// Assigns one tier per advertiser-day from the mixture (pure function of
/// the seed, so proportions are auditable without running the world).
inline Tier assign_tier(const MixtureWeights& mix, std::uint64_t seed, long day, int adv) {
    Rng rng(derive_seed(seed, 0x71E2, static_cast<std::uint64_t>(day),
                        static_cast<std::uint64_t>(adv)));
    const double u = rng.uniform();
    if (u < mix.expert) return Tier::Expert;
    if (u < mix.expert + mix.medium) return Tier::Medium;
    return Tier::Random;
}

/// Realized-outcome relabeling: expert meets both the CPC constraint and the
/// ROI threshold, medium exactly one, random neither.
inline Tier outcome_tier_of(double spend, double clicks, double revenue, double cpc_target,
                            double roi_threshold) {
    const bool cpc_ok = spend <= 0.0 || (clicks > 0.0 && spend / clicks <= cpc_target);
    const bool roi_ok = spend > 0.0 && revenue / spend >= roi_threshold;
    if (cpc_ok && roi_ok) return Tier::Expert;
    if (cpc_ok || roi_ok) return Tier::Medium;
    return Tier::Random;
}

/// Mixture behavior policy: per advertiser-day tier drawn from the mixture;
/// expert and medium run PID CPC tracking at different margins, random bids
/// uniformly. Allocations are tier-dependent and jittered for coverage.
class BehaviorBidder : public sim::Bidder {
public:
    BehaviorBidder(BehaviorConfig cfg, double grid_step = 0.05)
        : cfg_(std::move(cfg)), grid_(grid_step) {
        cfg_.mixture.validate();
    }

    const std::vector<int>& tiers() const { return tier_; }

    void begin_day(const sim::World& world, long day) override {
        const int M = world.num_advertisers();
        const int P = world.num_channels();
        day_ = day;
        tier_.resize(M);
        if (static_cast<int>(pid_.size()) != M) {
            pid_.assign(M, baselines::PidState{});
            for (int m = 0; m < M; ++m) {
                pid_[m].xi_min = 0.0; // clamped per channel at bid time
                pid_[m].xi_max = 10.0;
                pid_[m].scale = 0.9;
            }
            carry_cpc_.assign(M, 0.0);
        }
        for (int m = 0; m < M; ++m) {
            tier_[m] = static_cast<int>(assign_tier(cfg_.mixture, cfg_.seed, day, m));
            pid_[m].gains = tier_[m] == 1 ? cfg_.medium_gains : cfg_.expert_gains;
            pid_[m].reset_day();
        }
        (void)P;
    }

    top::AllocationAction allocate(const sim::World& world, int adv, long day) override {
        const int P = world.num_channels();
        Rng rng(derive_seed(cfg_.seed, 0xA110C, static_cast<std::uint64_t>(day),
                            static_cast<std::uint64_t>(adv)));
        const auto& a = world.advertisers()[adv];
        Vec frac = Vec::Zero(P);
        const Tier tier = static_cast<Tier>(tier_[adv]);
        // proportional-to-yield scores for the informed tiers; channels whose
        // observable CPC floor (reserve over channel CTR) cannot meet the
        // advertiser's target are skipped by the expert tier
        Vec score = Vec::Zero(P);
        for (int p = 0; p < P; ++p) {
            if (!a.active_on(p)) continue;
            double traffic = 0.0;
            for (double r : world.channels()[p].arrival_profile) traffic += r;
            const double own_ctr = world.ema_ctr(adv, p);
            score[p] = (own_ctr + 0.02) * traffic;
            if (tier == Tier::Expert) {
                const double est_ctr = own_ctr > 0.0 ? own_ctr : 0.15;
                const double floor = world.config().reserve_price / est_ctr;
                if (floor > 0.75 * a.cpc_target) score[p] = 0.0;
            }
        }
        if (score.sum() <= 0.0)
            for (int p : a.active_channels) score[p] = 1.0;
        score /= score.sum();

        Vec dirichlet = Vec::Zero(P);
        double dsum = 0.0;
        for (int p : a.active_channels) {
            dirichlet[p] = -std::log(std::max(rng.uniform(), 1e-12));
            dsum += dirichlet[p];
        }
        dirichlet /= dsum;

        double total = 0.9;
        double blend = 0.8; // weight on the informed score
        if (tier == Tier::Medium) {
            blend = 0.5;
            total = rng.uniform(0.6, 0.95);
        } else if (tier == Tier::Random) {
            blend = 0.0;
            total = rng.uniform(0.5, 1.0);
        } else {
            total = rng.uniform(0.8, 0.95);
        }
        for (int p : a.active_channels)
            frac[p] = total * (blend * score[p] + (1.0 - blend) * dirichlet[p]);
        return top::discretize_and_mask(frac, grid_, 1.0);
    }

    double bid_ratio(const sim::World& world, int adv, int channel, const sim::ImpressionRequest& req,
                     const Vec& obs) override {
        (void)req;
        (void)obs;
        const auto& ch = world.channels()[channel];
        const Tier tier = static_cast<Tier>(tier_[adv]);
        if (tier == Tier::Random) {
            Rng rng(derive_seed(cfg_.seed, 0xB1D, static_cast<std::uint64_t>(day_),
                                static_cast<std::uint64_t>(adv) * 7919 +
                                    static_cast<std::uint64_t>(req.global_index)));
            return rng.uniform(ch.xi_min, ch.xi_max);
        }
        const double margin = tier == Tier::Medium ? cfg_.medium_margin : cfg_.expert_margin;
        const double target = margin * world.advertisers()[adv].cpc_target;
        // lifetime CPC as the control signal: much smoother than the day CPC
        const double clicks = world.lifetime_clicks(adv);
        const double realized = clicks > 0.0 ? world.lifetime_spend(adv) / clicks : carry_cpc_[adv];
        pid_[adv].update(target, realized);
        if (clicks > 0.0) carry_cpc_[adv] = realized;
        return std::clamp(pid_[adv].scale, ch.xi_min, ch.xi_max);
    }

private:
    BehaviorConfig cfg_;
    double grid_;
    long day_ = 0;
    std::vector<int> tier_;
    std::vector<baselines::PidState> pid_;
    std::vector<double> carry_cpc_;
};

/// Runs the mixture behavior policy for `num_days` and returns the raw log
/// with generation and outcome tiers attached.
inline RunLog run_behavior_policy(const sim::WorldConfig& world_cfg, const BehaviorConfig& behavior,
                                  int num_days) {
    behavior.mixture.validate();
    RunLog log;
    log.world = world_cfg;
    sim::World world(world_cfg);
    BehaviorBidder bidder(behavior);
    for (long day = 0; day < num_days; ++day) {
        auto res = world.run_day(day, bidder);
        res.record.tier = bidder.tiers();
        res.record.outcome_tier.resize(world.num_advertisers());
        for (int m = 0; m < world.num_advertisers(); ++m) {
            double spend = 0.0, clicks = 0.0, revenue = 0.0;
            for (int p = 0; p < world.num_channels(); ++p) {
                const auto& st = res.record.at(m, p, world.num_channels());
                spend += st.spend;
                clicks += st.clicks;
                revenue += st.revenue;
            }
            res.record.outcome_tier[m] = static_cast<int>(
                outcome_tier_of(spend, clicks, revenue, world.advertisers()[m].cpc_target,
                                behavior.roi_threshold));
        }
        for (auto& ev : res.events) log.events.push_back(std::move(ev));
        log.days.push_back(std::move(res.record));
    }
    return log;
}

} // namespace crossbid::logs
