#pragma once

#include <algorithm>
#include <iostream>

#include "crossbid/bottom/policies.hpp"
#include "crossbid/cmck/cmck.hpp"
#include "crossbid/logs/schema.hpp"
#include "crossbid/top/critic.hpp"

namespace crossbid::logs {

/// D^h: one transition per advertiser per day, grouped into T-day episodes.
/// A trailing partial episode is dropped (with a warning on stderr).
inline TopDataset build_top_dataset(const RunLog& log, int episode_days) {
    CB_REQUIRE(!log.days.empty(), "build_top_dataset: no days logged");
    TopDataset ds;
    ds.channels = log.world.num_channels;
    ds.state_dim = sim::ObsLayout{log.world.user_feature_dim}.top_dim(ds.channels);
    ds.episode_days = episode_days;
    ds.config_hash = log.world.hash();

    const long total_days = static_cast<long>(log.days.size());
    const long usable = (total_days / episode_days) * episode_days;
    if (usable < total_days)
        std::cerr << "build_top_dataset: dropping " << (total_days - usable)
                  << " trailing day(s) of an incomplete episode\n";

    const int M = log.world.num_advertisers;
    for (long d = 0; d < usable; ++d) {
        const auto& day = log.days[d];
        for (int m = 0; m < M; ++m) {
            TopTransition tr;
            tr.s = day.top_state[m];
            tr.b = day.alloc[m].as_vec();
            tr.g = day.day_clicks[m];
            tr.day = day.day;
            tr.advertiser = m;
            tr.day_in_episode = static_cast<int>(d % episode_days);
            tr.terminal = tr.day_in_episode == episode_days - 1;
            tr.s_next = (d + 1 < total_days) ? log.days[d + 1].top_state[m]
                                             : Vec::Zero(ds.state_dim);
            tr.gen_tier = day.tier.empty() ? -1 : day.tier[m];
            tr.outcome_tier = day.outcome_tier.empty() ? -1 : day.outcome_tier[m];
            ds.items.push_back(std::move(tr));
        }
    }
    for (auto& tr : ds.items) {
        // advertiser statics ride along for the CPC loss
        tr.budget = 0.0;
        tr.cpc_target = 0.0;
    }
    // budgets and targets from the config-derived population
    auto advs = sim::generate_advertisers(log.world);
    for (auto& tr : ds.items) {
        tr.budget = advs[tr.advertiser].daily_budget;
        tr.cpc_target = advs[tr.advertiser].cpc_target;
    }
    return ds;
}

/// D^l: per advertiser-day joint trajectories over that advertiser's entered
/// bids. Empty advertiser-days are skipped.
inline BottomDataset build_bottom_dataset(const RunLog& log) {
    CB_REQUIRE(!log.days.empty(), "build_bottom_dataset: no days logged");
    BottomDataset ds;
    const int M = log.world.num_advertisers;
    const int P = log.world.num_channels;
    ds.channels = P;
    ds.obs_dim = sim::ObsLayout{log.world.user_feature_dim}.dim();
    ds.config_hash = log.world.hash();

    // events are time-ordered within each day already
    std::size_t ev_cursor = 0;
    for (const auto& day : log.days) {
        std::vector<BottomTrajectory> per_adv(M);
        for (int m = 0; m < M; ++m) {
            per_adv[m].day = day.day;
            per_adv[m].advertiser = m;
            per_adv[m].gen_tier = day.tier.empty() ? -1 : day.tier[m];
            per_adv[m].outcome_tier = day.outcome_tier.empty() ? -1 : day.outcome_tier[m];
            per_adv[m].day_start_obs.assign(day.day_start_obs.begin() + m * P,
                                            day.day_start_obs.begin() + (m + 1) * P);
        }
        while (ev_cursor < log.events.size() && log.events[ev_cursor].day == day.day) {
            const auto& ev = log.events[ev_cursor];
            for (const auto& br : ev.bids) {
                if (!br.entered) continue;
                auto& traj = per_adv[br.advertiser];
                traj.channel.push_back(ev.pvid);
                traj.obs.push_back(br.obs);
                traj.action.push_back(br.ratio);
                traj.reward.push_back(br.reward);
                traj.global_index.push_back(ev.global_index);
            }
            ++ev_cursor;
        }
        for (auto& traj : per_adv)
            if (traj.length() > 0) ds.items.push_back(std::move(traj));
    }
    return ds;
}

/// Data-starvation protocol: keep the starved channel's steps only in a
/// `keep_ratio` fraction of advertiser-days; elsewhere they are removed as if
/// never logged.
inline void starve_channel(BottomDataset& ds, int channel, double keep_ratio, std::uint64_t seed) {
    CB_REQUIRE(keep_ratio > 0.0 && keep_ratio <= 1.0, "starve_channel: bad keep ratio");
    std::vector<BottomTrajectory> kept;
    for (auto& traj : ds.items) {
        Rng rng(derive_seed(seed, 0x57A7, static_cast<std::uint64_t>(traj.day),
                            static_cast<std::uint64_t>(traj.advertiser)));
        if (rng.uniform() < keep_ratio) {
            kept.push_back(std::move(traj));
            continue;
        }
        BottomTrajectory thin;
        thin.day = traj.day;
        thin.advertiser = traj.advertiser;
        thin.gen_tier = traj.gen_tier;
        thin.outcome_tier = traj.outcome_tier;
        thin.day_start_obs = traj.day_start_obs;
        for (std::size_t t = 0; t < traj.length(); ++t) {
            if (traj.channel[t] == channel) continue;
            thin.channel.push_back(traj.channel[t]);
            thin.obs.push_back(traj.obs[t]);
            thin.action.push_back(traj.action[t]);
            thin.reward.push_back(traj.reward[t]);
            thin.global_index.push_back(traj.global_index[t]);
        }
        if (thin.length() > 0) kept.push_back(std::move(thin));
    }
    ds.items = std::move(kept);
}

/// Context row for the meta-channel encoders: [o | a | r | o'].
inline Vec context_row(const Vec& o, double a, double r, const Vec& o_next) {
    Vec row(2 * o.size() + 2);
    row << o, a, r, o_next;
    return row;
}

/// Per-channel transition streams in completion order. A transition
/// (o_k, a, r, o_{k+1}) on channel p completes when the advertiser's next
/// event on p happens; its completion key is that event's (day, index).
struct ContextStreams {
    int row_dim = 0;
    std::vector<nn::Mat> rows;                            // per channel
    std::vector<std::vector<std::pair<long, long>>> keys; // per channel, sorted

    /// Number of rows completed strictly before (day, global_index).
    int zindex(int channel, long day, long gidx) const {
        const auto& k = keys[channel];
        return static_cast<int>(
            std::lower_bound(k.begin(), k.end(), std::make_pair(day, gidx)) - k.begin());
    }
};

inline ContextStreams build_context_streams(const BottomDataset& ds) {
    ContextStreams cs;
    cs.row_dim = 2 * ds.obs_dim + 2;
    const int P = ds.channels;
    std::vector<std::vector<std::pair<std::pair<long, long>, Vec>>> acc(P);
    for (const auto& traj : ds.items) {
        std::vector<int> last(P, -1);
        for (std::size_t t = 0; t < traj.length(); ++t) {
            const int p = traj.channel[t];
            if (last[p] >= 0) {
                const int k = last[p];
                acc[p].push_back({{traj.day, traj.global_index[t]},
                                  context_row(traj.obs[k], traj.action[k], traj.reward[k],
                                              traj.obs[t])});
            }
            last[p] = static_cast<int>(t);
        }
    }
    cs.rows.resize(P);
    cs.keys.resize(P);
    for (int p = 0; p < P; ++p) {
        std::stable_sort(acc[p].begin(), acc[p].end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        cs.rows[p] = nn::Mat(cs.row_dim, acc[p].size());
        for (std::size_t i = 0; i < acc[p].size(); ++i) {
            cs.rows[p].col(i) = acc[p][i].second;
            cs.keys[p].push_back(acc[p][i].first);
        }
    }
    return cs;
}

/// Precomputed sliding z* tables (encoders frozen in phase 2).
inline std::vector<std::vector<Vec>> build_ztables(const cmck::KnowledgeEncoders& enc,
                                                   const ContextStreams& cs, int window) {
    std::vector<std::vector<Vec>> tables;
    for (const auto& rows : cs.rows) tables.push_back(cmck::sliding_zstars(enc, rows, window));
    return tables;
}

/// Uniform sampler over joint trajectory steps, materializing the padded
/// per-channel views (carry-forward observations, zero rewards) and the
/// optional CMCK latents.
class BottomSampler {
public:
    explicit BottomSampler(const BottomDataset& ds) : ds_(&ds) {
        for (int i = 0; i < static_cast<int>(ds.items.size()); ++i)
            for (int t = 0; t < static_cast<int>(ds.items[i].length()); ++t)
                flat_.push_back({i, t});
        CB_REQUIRE(!flat_.empty(), "BottomSampler: empty dataset");
        // per-trajectory carry tables: index of the last step at or before t
        // on each channel
        carry_.resize(ds.items.size());
        for (std::size_t i = 0; i < ds.items.size(); ++i) {
            const auto& traj = ds.items[i];
            const int P = ds.channels;
            carry_[i].assign(traj.length() * P, -1);
            std::vector<int> last(P, -1);
            for (std::size_t t = 0; t < traj.length(); ++t) {
                last[traj.channel[t]] = static_cast<int>(t);
                for (int p = 0; p < P; ++p) carry_[i][t * P + p] = last[p];
            }
        }
    }

    std::size_t size() const { return flat_.size(); }

    /// Carried observation of channel p at joint step t (day-start before the
    /// channel's first event).
    const Vec& carried_obs(int traj_idx, int t, int p) const {
        const auto& traj = ds_->items[traj_idx];
        const int k = carry_[traj_idx][static_cast<std::size_t>(t) * ds_->channels + p];
        return k < 0 ? traj.day_start_obs[p] : traj.obs[k];
    }

    bottom::BottomBatch sample(int batch, Rng& rng, const ContextStreams* cs = nullptr,
                               const std::vector<std::vector<Vec>>* ztables = nullptr,
                               int latent_dim = 0) const {
        std::vector<std::pair<int, int>> picks(batch);
        for (int j = 0; j < batch; ++j)
            picks[j] = flat_[rng.uniform_int(static_cast<int>(flat_.size()))];
        return gather(picks, cs, ztables, latent_dim);
    }

    bottom::BottomBatch gather(const std::vector<std::pair<int, int>>& picks,
                               const ContextStreams* cs = nullptr,
                               const std::vector<std::vector<Vec>>* ztables = nullptr,
                               int latent_dim = 0) const {
        const int P = ds_->channels;
        const int D = ds_->obs_dim;
        const int n = static_cast<int>(picks.size());
        bottom::BottomBatch b;
        b.channels = P;
        b.obs_dim = D;
        b.o.assign(P, nn::Mat(D, n));
        b.o_next.assign(P, nn::Mat(D, n));
        b.a.assign(P, Vec::Zero(n));
        b.mask.assign(P, Vec::Zero(n));
        b.r_joint = Vec::Zero(n);
        b.terminal = Vec::Zero(n);
        if (ztables) b.z.assign(P, nn::Mat::Zero(latent_dim, n));

        for (int j = 0; j < n; ++j) {
            const auto [i, t] = picks[j];
            const auto& traj = ds_->items[i];
            const bool last = t + 1 == static_cast<int>(traj.length());
            b.terminal[j] = last ? 1.0 : 0.0;
            b.r_joint[j] = traj.reward[t];
            for (int p = 0; p < P; ++p) {
                const Vec& cur = carried_obs(i, t, p); // decision obs on the real channel
                b.o[p].col(j) = cur;
                b.o_next[p].col(j) = last ? cur : carried_obs(i, t + 1, p);
            }
            const int p_real = traj.channel[t];
            b.a[p_real][j] = traj.action[t];
            b.mask[p_real][j] = 1.0;
            if (ztables) {
                for (int p = 0; p < P; ++p) {
                    const int zi = cs->zindex(p, traj.day, traj.global_index[t]);
                    b.z[p].col(j) = (*ztables)[p][zi];
                }
            }
        }
        return b;
    }

private:
    const BottomDataset* ds_;
    std::vector<std::pair<int, int>> flat_;
    std::vector<std::vector<int>> carry_;
};

/// Uniform sampler over top-level transitions.
class TopSampler {
public:
    explicit TopSampler(const TopDataset& ds) : ds_(&ds) {
        CB_REQUIRE(!ds.items.empty(), "TopSampler: empty dataset");
    }

    top::TopBatch sample(int batch, Rng& rng) const {
        const int n = std::min<int>(batch, static_cast<int>(ds_->items.size()));
        top::TopBatch b;
        b.s = nn::Mat(ds_->state_dim, n);
        b.b = nn::Mat(ds_->channels, n);
        b.s_next = nn::Mat(ds_->state_dim, n);
        b.g = Vec(n);
        b.terminal = Vec(n);
        b.budget = Vec(n);
        b.cpc_target = Vec(n);
        for (int j = 0; j < n; ++j) {
            const auto& tr = ds_->items[rng.uniform_int(static_cast<int>(ds_->items.size()))];
            b.s.col(j) = tr.s;
            b.b.col(j) = tr.b;
            b.s_next.col(j) = tr.s_next;
            b.g[j] = tr.g;
            b.terminal[j] = tr.terminal ? 1.0 : 0.0;
            b.budget[j] = tr.budget;
            b.cpc_target[j] = tr.cpc_target;
        }
        return b;
    }

private:
    const TopDataset* ds_;
};

} // namespace crossbid::logs
