#pragma once

#include <map>

#include "crossbid/baselines/cem.hpp"
#include "crossbid/baselines/pid.hpp"
#include "crossbid/eval/model.hpp"
#include "crossbid/logs/build.hpp"

namespace crossbid::eval {

using sim::Vec;

/// Uniform-random evaluation policy: random grid-feasible allocations over
/// the active channels, uniform bid ratios in the channel bounds.
class RandomStrategy : public sim::Bidder {
public:
    explicit RandomStrategy(std::uint64_t seed, double grid = 0.05) : seed_(seed), grid_(grid) {}

    top::AllocationAction allocate(const sim::World& world, int adv, long day) override {
        Rng rng(derive_seed(seed_, 0xA110C, day, adv));
        const auto& a = world.advertisers()[adv];
        Vec frac = Vec::Zero(world.num_channels());
        double dsum = 0.0;
        for (int p : a.active_channels) {
            frac[p] = -std::log(std::max(rng.uniform(), 1e-12));
            dsum += frac[p];
        }
        frac *= rng.uniform(0.5, 1.0) / dsum;
        return top::discretize_and_mask(frac, grid_, 1.0);
    }

    double bid_ratio(const sim::World& world, int adv, int channel,
                     const sim::ImpressionRequest& req, const Vec&) override {
        const auto& ch = world.channels()[channel];
        Rng rng(derive_seed(seed_, 0xB1D, static_cast<std::uint64_t>(req.global_index) * 131 + adv,
                            static_cast<std::uint64_t>(channel)));
        (void)adv;
        return rng.uniform(ch.xi_min, ch.xi_max);
    }

private:
    std::uint64_t seed_;
    double grid_;
};

/// PID baseline: equal-split allocations, one CPC-tracking controller per
/// advertiser working against the raw target.
class PidStrategy : public sim::Bidder {
public:
    PidStrategy(baselines::PidGains gains, double margin, double grid = 0.05)
        : gains_(gains), margin_(margin), grid_(grid) {}

    void begin_day(const sim::World& world, long day) override {
        (void)day;
        if (static_cast<int>(pid_.size()) != world.num_advertisers()) {
            pid_.assign(world.num_advertisers(), baselines::PidState{});
            carry_.assign(world.num_advertisers(), 0.0);
            for (auto& p : pid_) {
                p.gains = gains_;
                p.xi_min = 0.0;
                p.xi_max = 10.0;
                p.scale = 0.9;
            }
        }
        for (auto& p : pid_) p.reset_day();
    }

    top::AllocationAction allocate(const sim::World& world, int adv, long) override {
        const auto& a = world.advertisers()[adv];
        Vec frac = Vec::Zero(world.num_channels());
        for (int p : a.active_channels) frac[p] = 0.95 / a.active_channels.size();
        return top::discretize_and_mask(frac, grid_, 1.0);
    }

    double bid_ratio(const sim::World& world, int adv, int channel, const sim::ImpressionRequest&,
                     const Vec&) override {
        const auto& ch = world.channels()[channel];
        const double clicks = world.lifetime_clicks(adv);
        const double realized =
            clicks > 0.0 ? world.lifetime_spend(adv) / clicks : carry_[adv];
        if (clicks > 0.0) carry_[adv] = realized;
        pid_[adv].update(margin_ * world.advertisers()[adv].cpc_target, realized);
        return std::clamp(pid_[adv].scale, ch.xi_min, ch.xi_max);
    }

private:
    baselines::PidGains gains_;
    double margin_;
    double grid_;
    std::vector<baselines::PidState> pid_;
    std::vector<double> carry_;
};

/// CEM baseline: slotwise-greedy online cross-entropy search with one
/// bid-ratio parameter per channel, shared by all advertisers
/// (equal-split allocations). Each day the channel's traffic is split
/// round-robin over a candidate population sampled from the current search
/// distribution; at day end the distribution refits on the elite candidates
/// by clicks minus a large penalty when a candidate's realized CPC exceeds
/// the mean target of its winners. The floored sigma keeps exploring, which
/// is the exploration/exploitation balance the method trades on.
class CemStrategy : public sim::Bidder {
public:
    CemStrategy(const Config& cfg, std::uint64_t seed, double grid = 0.05)
        : cfg_(&cfg), rng_(derive_seed(seed, 0xCE11)), grid_(grid) {
        const int P = cfg.world.num_channels;
        search_.resize(P);
        for (int p = 0; p < P; ++p) {
            auto& s = search_[p];
            s.lo = cfg.world.channels[p].xi_min;
            s.hi = cfg.world.channels[p].xi_max;
            s.mean = 1.0;
            s.sigma = 0.3;
        }
    }

    void begin_day(const sim::World&, long) override {
        const int pop = cfg_->baselines.cem_population;
        for (auto& s : search_) {
            refit(s);
            s.cand.resize(pop);
            for (int i = 0; i < pop; ++i)
                s.cand[i] = std::clamp(s.mean + s.sigma * rng_.normal(), s.lo, s.hi);
            s.clicks.assign(pop, 0.0);
            s.spend.assign(pop, 0.0);
            s.tar_sum.assign(pop, 0.0);
            s.wins.assign(pop, 0.0);
        }
    }

    top::AllocationAction allocate(const sim::World& world, int adv, long) override {
        const auto& a = world.advertisers()[adv];
        Vec frac = Vec::Zero(world.num_channels());
        for (int p : a.active_channels) frac[p] = 0.95 / a.active_channels.size();
        return top::discretize_and_mask(frac, grid_, 1.0);
    }

    double bid_ratio(const sim::World&, int, int channel, const sim::ImpressionRequest& req,
                     const Vec&) override {
        const auto& s = search_[channel];
        return s.cand[req.t % s.cand.size()];
    }

    void observe(const sim::World& world, const sim::EventRecord& ev) override {
        auto& s = search_[ev.pvid];
        if (s.cand.empty() || ev.winner < 0) return;
        const std::size_t c = ev.t % s.cand.size();
        s.wins[c] += 1.0;
        s.clicks[c] += ev.clicks;
        s.spend[c] += ev.price * ev.clicks;
        s.tar_sum[c] += world.advertisers()[ev.winner].cpc_target;
    }

private:
    struct Search {
        double mean = 1.0, sigma = 0.3, lo = 0.5, hi = 1.5;
        std::vector<double> cand, clicks, spend, tar_sum, wins;
    };

    void refit(Search& s) {
        if (s.cand.empty()) return;
        const int pop = static_cast<int>(s.cand.size());
        std::vector<double> score(pop);
        for (int i = 0; i < pop; ++i) {
            double penalty = 0.0;
            if (s.clicks[i] > 0.0 && s.wins[i] > 0.0) {
                const double cpc = s.spend[i] / s.clicks[i];
                const double mean_tar = s.tar_sum[i] / s.wins[i];
                penalty = cfg_->baselines.cem_violation_penalty *
                          std::max(0.0, cpc / mean_tar - 1.0);
            }
            score[i] = s.clicks[i] - penalty;
        }
        std::vector<int> order(pop);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return score[a] > score[b]; });
        const int elites = std::max(1, static_cast<int>(std::lround(
                                           pop * cfg_->baselines.cem_elite_frac)));
        double mean = 0.0;
        for (int e = 0; e < elites; ++e) mean += s.cand[order[e]];
        mean /= elites;
        double var = 0.0;
        for (int e = 0; e < elites; ++e) var += (s.cand[order[e]] - mean) * (s.cand[order[e]] - mean);
        s.mean = mean;
        s.sigma = std::max(std::sqrt(var / elites), cfg_->baselines.cem_sigma_floor);
    }

    const Config* cfg_;
    Rng rng_;
    double grid_;
    std::vector<Search> search_;
};

/// HMMCB at inference: the top policy allocates once per day through the
/// discretization mask; per request the decoupled act path bids from the
/// local observation, augmented with the channel's rolling context latent
/// when CMCK is on. Parameters are frozen; all sampling randomness derives
/// from the evaluation seed.
class HmmcbStrategy : public sim::Bidder {
public:
    HmmcbStrategy(const TrainedModel& model, std::uint64_t seed)
        : model_(&model), seed_(seed) {
        if (model.use_cmck()) {
            const int P = model.cfg.world.num_channels;
            windows_.assign(P, cmck::ContextWindow(&model.encoders, model.cfg.cmck.window));
        }
    }

    void begin_day(const sim::World& world, long day) override {
        (void)world;
        day_ = day;
    }

    top::AllocationAction allocate(const sim::World& world, int adv, long day) override {
        Rng rng(derive_seed(seed_, 0x70BA, day, adv));
        Vec s = world.top_state(adv);
        Vec b0 = model_->use_diffusion() ? model_->top_policy.sample(s, rng)
                                         : model_->direct_policy.sample(s);
        return top::discretize_and_mask(b0, model_->cfg.top.grid_step, 1.0);
    }

    double bid_ratio(const sim::World& world, int adv, int channel, const sim::ImpressionRequest&,
                     const Vec& obs) override {
        const auto& ch = world.channels()[channel];
        double a;
        if (model_->use_cmck()) {
            Vec z = windows_[channel].zstar();
            a = model_->policies.act(channel, obs, &z);
        } else {
            a = model_->policies.act(channel, obs, nullptr);
        }
        return std::clamp(a, ch.xi_min, ch.xi_max);
    }

    void observe(const sim::World&, const sim::EventRecord& ev) override {
        if (!model_->use_cmck()) return;
        for (const auto& br : ev.bids) {
            if (!br.entered) continue;
            const auto key = std::make_pair(br.advertiser, ev.pvid);
            auto it = pending_.find(key);
            if (it != pending_.end()) {
                windows_[ev.pvid].push(
                    logs::context_row(it->second.obs, it->second.ratio, it->second.reward, br.obs));
            }
            pending_[key] = Pending{br.obs, br.ratio, br.reward};
        }
    }

private:
    struct Pending {
        Vec obs;
        double ratio;
        double reward;
    };
    const TrainedModel* model_;
    std::uint64_t seed_;
    long day_ = 0;
    std::vector<cmck::ContextWindow> windows_;
    std::map<std::pair<int, int>, Pending> pending_;
};

} // namespace crossbid::eval
