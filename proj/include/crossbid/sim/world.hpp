#pragma once

#include <array>
#include <memory>
#include <optional>
#include <vector>

#include "crossbid/bottom/reward.hpp"
#include "crossbid/sim/auction.hpp"
#include "crossbid/sim/config.hpp"
#include "crossbid/sim/traffic.hpp"
#include "crossbid/top/allocation.hpp"

namespace crossbid::sim {

/// Index map for the per-channel bottom-level observation. Fields marked
/// static stay constant within a day; the state policy predicts only the
/// changing fields and passes the static ones through.
struct ObsLayout {
    int user_dim = 4;

    int dim() const { return 8 + user_dim; }
    int alloc() const { return 0; }
    int time() const { return 1; }
    int consumption() const { return 2; }
    int cpc_ratio() const { return 3; }
    int user(int f) const { return 4 + f; }
    int budget() const { return 4 + user_dim; }
    int cpc_target() const { return 5 + user_dim; }
    int hist_ctr() const { return 6 + user_dim; }
    int total_alloc() const { return 7 + user_dim; }

    std::vector<int> changing_indices() const {
        std::vector<int> idx = {time(), consumption(), cpc_ratio()};
        for (int f = 0; f < user_dim; ++f) idx.push_back(user(f));
        return idx;
    }
    std::vector<int> static_indices() const {
        return {alloc(), budget(), cpc_target(), hist_ctr(), total_alloc()};
    }

    // top-level state: one block per channel, zero for inactive channels
    static constexpr int kTopBlock = 10;
    int top_dim(int num_channels) const { return kTopBlock * num_channels; }
};

struct BidRecord {
    int advertiser = -1;
    Vec obs;              // decision-time bottom observation
    double ratio = 0.0;   // bid ratio a
    double bid = 0.0;     // a * cpc_target
    bool clamped = false; // ratio fell outside channel bounds
    bool entered = false; // passed the allocation feasibility gate
    bool won = false;
    double final_charge = 0.0;
    int clicks = 0;
    int conversions = 0;
    double revenue = 0.0;
    double reward = 0.0;   // bottom-level reward r_t
    double cum_cost = 0.0; // channel-day spend after this event
};

/// One auction with its winner-side fields mirroring the production log
/// schema (ctr, histctr, final_charge, cpc, aimcpc, impr, clicks, revenue,
/// budget, request_time, dt, pvid, *_beforeNweek, user_pref).
struct EventRecord {
    long day = 0;          // dt
    int pvid = 0;          // channel id
    long t = 0;            // per-channel request index
    long global_index = 0; // joint per-day stream position
    double request_time = 0.0;
    Vec user_pref;
    int winner = -1;
    double price = 0.0;
    // winner context (zero when no winner)
    double ctr = 0.0;     // winner's channel CTR so far today
    double histctr = 0.0; // winner's rolling channel CTR
    double cpc = 0.0;     // winner's realized CPC so far today
    double aimcpc = 0.0;
    int impr = 0;
    int clicks = 0;
    double revenue = 0.0;
    double budget = 0.0;
    double impr_before_week[4] = {0, 0, 0, 0};
    double click_before_week[4] = {0, 0, 0, 0};
    double cpc_before_week[4] = {0, 0, 0, 0};
    std::vector<BidRecord> bids;
};

struct ChannelDayStats {
    double spend = 0.0;
    double clicks = 0.0;
    double impressions = 0.0;
    double conversions = 0.0;
    double revenue = 0.0;
    long entered = 0;
};

struct DayRecord {
    long day = 0;
    std::vector<Vec> top_state;                 // M, at day start
    std::vector<top::AllocationAction> alloc;   // M, executed (masked) actions
    std::vector<Vec> day_start_obs;             // M*P, bottom obs before any request
    std::vector<double> day_clicks;             // M  (top reward g)
    std::vector<ChannelDayStats> stats;         // M*P
    std::vector<int> tier;                      // generation tier per advertiser (set by log gen)
    std::vector<int> outcome_tier;              // realized-outcome label (set by log gen)
    const ChannelDayStats& at(int m, int p, int P) const { return stats[m * P + p]; }
};

struct DayResult {
    DayRecord record;
    std::vector<EventRecord> events;
};

/// Decision-maker interface the world drives once per day (allocation) and
/// once per retrieved advertiser per request (bid ratio).
class Bidder {
public:
    virtual ~Bidder() = default;
    virtual void begin_day(const class World& world, long day) { (void)world; (void)day; }
    virtual top::AllocationAction allocate(const class World& world, int adv, long day) = 0;
    virtual double bid_ratio(const class World& world, int adv, int channel,
                             const ImpressionRequest& req, const Vec& obs) = 0;
    /// Post-auction hook (context windows, controller feedback).
    virtual void observe(const class World& world, const EventRecord& ev) { (void)world; (void)ev; }
};

/// Deterministic multi-channel second-price auction world. All stochasticity
/// flows from the config seeds through per-(day, stream) derived substreams,
/// so identical seeds and configs replay bit-identically.
class World {
public:
    explicit World(WorldConfig cfg) : cfg_(std::move(cfg)) {
        attach_user_means(cfg_);
        cfg_.validate();
        layout_.user_dim = cfg_.user_feature_dim;
        fb_ = build_feedback_model(cfg_);
        advs_ = generate_advertisers(cfg_);
        const int M = cfg_.num_advertisers, P = cfg_.num_channels;
        alloc_frac_.assign(M, std::vector<double>(P, 0.0));
        alloc_amount_.assign(M, std::vector<double>(P, 0.0));
        day_stats_.assign(M * P, ChannelDayStats{});
        ema_ctr_.assign(M, std::vector<double>(P, 0.0));
        ema_cvr_.assign(M, std::vector<double>(P, 0.0));
        channel_ema_ctr_.assign(P, 0.0);
        prev_alloc_.assign(M, std::vector<double>(P, 0.0));
        prev_spend_ratio_.assign(M, std::vector<double>(P, 0.0));
        prev_clicks_.assign(M, std::vector<double>(P, 0.0));
        prev_cpc_ratio_.assign(M, std::vector<double>(P, 0.0));
        run_spend_.assign(M, 0.0);
        run_clicks_.assign(M, 0.0);
        run_revenue_.assign(M, 0.0);
        history_.resize(M);
    }

    const WorldConfig& config() const { return cfg_; }
    const ObsLayout& layout() const { return layout_; }
    const std::vector<Advertiser>& advertisers() const { return advs_; }
    const std::vector<Channel>& channels() const { return cfg_.channels; }
    const FeedbackModel& feedback_model() const { return fb_; }
    int num_advertisers() const { return cfg_.num_advertisers; }
    int num_channels() const { return cfg_.num_channels; }
    long auctions_run() const { return auctions_run_; }

    double remaining_allocation(int m, int p) const {
        return alloc_amount_[m][p] - day_stats_[m * num_channels() + p].spend;
    }

    double day_spend(int m) const {
        double s = 0.0;
        for (int p = 0; p < num_channels(); ++p) s += day_stats_[m * num_channels() + p].spend;
        return s;
    }
    double day_clicks(int m) const {
        double c = 0.0;
        for (int p = 0; p < num_channels(); ++p) c += day_stats_[m * num_channels() + p].clicks;
        return c;
    }
    const ChannelDayStats& day_stats(int m, int p) const { return day_stats_[m * num_channels() + p]; }
    double ema_ctr(int m, int p) const { return ema_ctr_[m][p]; }

    /// Run-lifetime accumulators including the current (unfinished) day.
    double lifetime_spend(int m) const { return run_spend_[m] + day_spend(m); }
    double lifetime_clicks(int m) const { return run_clicks_[m] + day_clicks(m); }
    double lifetime_revenue(int m) const {
        double r = run_revenue_[m];
        for (int p = 0; p < num_channels(); ++p) r += day_stats_[m * num_channels() + p].revenue;
        return r;
    }

    /// Bottom-level observation for (advertiser, channel); pass a request for
    /// decision-time features or nullptr for the day-start observation.
    Vec bottom_obs(int m, int p, const ImpressionRequest* req) const {
        const ObsLayout& L = layout_;
        Vec o = Vec::Zero(L.dim());
        const Advertiser& a = advs_[m];
        o[L.alloc()] = alloc_frac_[m][p];
        o[L.time()] = req ? req->request_time() / cfg_.ticks_per_day : 0.0;
        const double amount = alloc_amount_[m][p];
        const auto& st = day_stats_[m * num_channels() + p];
        o[L.consumption()] = amount > 1e-12 ? std::min(st.spend / amount, 1.0) : 1.0;
        const double dc = day_clicks(m);
        o[L.cpc_ratio()] =
            dc > 0.0 ? std::min(day_spend(m) / dc / a.cpc_target, 3.0) : 0.0;
        if (req)
            for (int f = 0; f < L.user_dim; ++f) o[L.user(f)] = req->user_features[f];
        o[L.budget()] = a.daily_budget / 100.0;
        o[L.cpc_target()] = a.cpc_target;
        o[L.hist_ctr()] = ema_ctr_[m][p];
        double total = 0.0;
        for (int q = 0; q < num_channels(); ++q) total += alloc_frac_[m][q];
        o[L.total_alloc()] = total;
        return o;
    }

    /// Top-level state at day start: one 10-wide block per channel
    /// (zero-filled where the advertiser is inactive).
    Vec top_state(int m) const {
        const int P = num_channels();
        Vec s = Vec::Zero(layout_.top_dim(P));
        const Advertiser& a = advs_[m];
        for (int p : a.active_channels) {
            const int o = p * ObsLayout::kTopBlock;
            s[o + 0] = 1.0;
            s[o + 1] = prev_alloc_[m][p];
            s[o + 2] = ema_ctr_[m][p];
            s[o + 3] = ema_cvr_[m][p];
            s[o + 4] = prev_spend_ratio_[m][p];
            s[o + 5] = prev_clicks_[m][p] / 10.0;
            s[o + 6] = prev_cpc_ratio_[m][p];
            s[o + 7] = channel_ema_ctr_[p];
            s[o + 8] = a.cpc_target;
            s[o + 9] = a.daily_budget / 100.0;
        }
        return s;
    }

    DayResult run_day(long day, Bidder& bidder) {
        const int M = cfg_.num_advertisers, P = cfg_.num_channels;
        DayResult out;
        DayRecord& rec = out.record;
        rec.day = day;
        rec.tier.assign(M, -1);

        bidder.begin_day(*this, day);

        rec.top_state.resize(M);
        for (int m = 0; m < M; ++m) rec.top_state[m] = top_state(m);

        // allocations: validate, mask inactive channels, apply
        std::fill(day_stats_.begin(), day_stats_.end(), ChannelDayStats{});
        rec.alloc.resize(M);
        for (int m = 0; m < M; ++m) {
            top::AllocationAction act = bidder.allocate(*this, m, day);
            CB_REQUIRE(static_cast<int>(act.fractions.size()) == P,
                       "allocation for advertiser ", m, " has wrong arity");
            double sum = 0.0;
            for (int p = 0; p < P; ++p) {
                CB_REQUIRE(act.fractions[p] >= -1e-9 && act.fractions[p] <= 1.0 + 1e-9,
                           "allocation fraction out of [0,1] for advertiser ", m);
                if (!advs_[m].active_on(p)) act.fractions[p] = 0.0;
                sum += act.fractions[p];
            }
            CB_REQUIRE(sum <= 1.0 + 1e-6, "allocation for advertiser ", m,
                       " exceeds the daily budget: sum=", sum);
            rec.alloc[m] = act;
            for (int p = 0; p < P; ++p) {
                alloc_frac_[m][p] = act.fractions[p];
                alloc_amount_[m][p] = act.fractions[p] * advs_[m].daily_budget;
            }
        }

        rec.day_start_obs.resize(M * P);
        for (int m = 0; m < M; ++m)
            for (int p = 0; p < P; ++p)
                rec.day_start_obs[m * P + p] =
                    advs_[m].active_on(p) ? bottom_obs(m, p, nullptr) : Vec::Zero(layout_.dim());

        // merged per-day request stream
        std::vector<ImpressionRequest> stream;
        for (int p = 0; p < P; ++p) {
            auto reqs = generate_requests(cfg_.channels[p], day,
                                          Rng(derive_seed(cfg_.seed, kTrafficTag, day, p)),
                                          cfg_.reserve_price, cfg_.floor_spread);
            for (auto& r : reqs) stream.push_back(std::move(r));
        }
        std::stable_sort(stream.begin(), stream.end(),
                         [](const ImpressionRequest& a, const ImpressionRequest& b) {
                             if (a.tick != b.tick) return a.tick < b.tick;
                             if (a.time_in_tick != b.time_in_tick) return a.time_in_tick < b.time_in_tick;
                             return a.channel_id < b.channel_id;
                         });
        for (std::size_t i = 0; i < stream.size(); ++i) stream[i].global_index = static_cast<long>(i);

        for (auto& req : stream) {
            const int p = req.channel_id;
            const Channel& ch = cfg_.channels[p];
            Rng rng(derive_seed(cfg_.seed, kAuctionTag, day, req.global_index));

            // retrieval: every advertiser active on the channel, thinned by the
            // time-varying participation probability
            const double prob = ch.participation_at(req.tick, cfg_.ticks_per_day, day);
            for (int m = 0; m < M; ++m) {
                if (!advs_[m].active_on(p)) continue;
                if (rng.uniform() < prob) req.eligible.push_back(m);
            }
            ++auctions_run_;
            if (req.eligible.empty()) continue;

            EventRecord ev;
            ev.day = day;
            ev.pvid = p;
            ev.t = req.t;
            ev.global_index = req.global_index;
            ev.request_time = req.request_time();
            ev.user_pref = req.user_features;

            std::vector<std::pair<int, double>> entered_bids;
            for (int m : req.eligible) {
                BidRecord br;
                br.advertiser = m;
                br.obs = bottom_obs(m, p, &req);
                br.ratio = bidder.bid_ratio(*this, m, p, req, br.obs);
                br.bid = compute_final_bid(br.ratio, advs_[m].cpc_target, ch.xi_min, ch.xi_max,
                                           &br.clamped);
                br.ratio = std::clamp(br.ratio, ch.xi_min, ch.xi_max);
                // feasibility gate: per-channel allocations are never overspent
                br.entered = br.bid <= remaining_allocation(m, p) + 1e-12;
                if (br.entered) entered_bids.emplace_back(m, br.bid);
                ev.bids.push_back(std::move(br));
            }

            AuctionResult res = run_auction(req, entered_bids, req.reserve);
            ev.winner = res.winner;
            ev.price = res.price;

            Feedback fb;
            if (res.has_winner()) fb = fb_.predict(req, advs_[res.winner], rng);

            charge_and_update(day, req, res, fb, ev);
            bidder.observe(*this, ev);
            out.events.push_back(std::move(ev));
        }

        // end of day: rewards aggregate, rolling stats
        rec.day_clicks.resize(M);
        rec.stats.resize(M * P);
        for (int m = 0; m < M; ++m) {
            rec.day_clicks[m] = day_clicks(m);
            for (int p = 0; p < P; ++p) rec.stats[m * P + p] = day_stats_[m * P + p];
        }
        finish_day(rec);
        return out;
    }

    /// Winner-side accounting for one auction. No winner: only the auction
    /// counter moves (already incremented by the caller).
    /// Pay-per-click second-price billing: the displayed advertiser is
    /// charged the second-highest bid when the impression is clicked
    /// (final_charge is the realized transaction price, zero on unclicked
    /// displays).
    void charge_and_update(long day, const ImpressionRequest& req, const AuctionResult& res,
                           const Feedback& fb, EventRecord& ev) {
        (void)day;
        const int p = req.channel_id;
        if (res.has_winner()) {
            const int m = res.winner;
            ChannelDayStats& st = day_stats_[m * num_channels() + p];
            const double charge = fb.clicked ? res.price : 0.0;
            CB_REQUIRE(charge <= alloc_amount_[m][p] - st.spend + 1e-9,
                       "charge_and_update: allocation overspend for advertiser ", m);
            st.spend += charge;
            st.impressions += 1;
            st.clicks += fb.clicked;
            st.conversions += fb.converted;
            st.revenue += fb.revenue;
        }
        for (auto& br : ev.bids) {
            if (!br.entered) continue;
            if (br.advertiser == res.winner) {
                br.won = true;
                br.final_charge = fb.clicked ? res.price : 0.0;
                br.clicks = fb.clicked;
                br.conversions = fb.converted;
                br.revenue = fb.revenue;
            }
            const auto& bst = day_stats_[br.advertiser * num_channels() + p];
            br.cum_cost = bst.spend;
            br.reward = bottom_reward_of(br.clicks, bst.spend, alloc_amount_[br.advertiser][p]);
        }
        if (!res.has_winner()) return;
        const int m = res.winner;
        const Advertiser& a = advs_[m];
        const ChannelDayStats& st = day_stats_[m * num_channels() + p];
        ev.ctr = st.impressions > 0 ? st.clicks / st.impressions : 0.0;
        ev.histctr = ema_ctr_[m][p];
        ev.cpc = day_clicks(m) > 0 ? day_spend(m) / day_clicks(m) : 0.0;
        ev.aimcpc = a.cpc_target;
        ev.impr = 1;
        ev.clicks = fb.clicked;
        ev.revenue = fb.revenue;
        ev.budget = a.daily_budget;
        for (int w = 0; w < 4; ++w) {
            const auto agg = week_aggregate(m, w + 1);
            ev.impr_before_week[w] = agg[0];
            ev.click_before_week[w] = agg[1];
            ev.cpc_before_week[w] = agg[1] > 0 ? agg[2] / agg[1] : 0.0;
        }
    }

    double bottom_reward_of(int clicked, double cum_cost, double alloc_amount) const {
        return bottom::reward(clicked, cum_cost, alloc_amount, reward_mode_);
    }

    void set_reward_mode(bottom::RewardMode mode) { reward_mode_ = mode; }
    bottom::RewardMode reward_mode() const { return reward_mode_; }

    std::array<double, 3> week_aggregate(int m, int weeks_back) const {
        std::array<double, 3> out = {0.0, 0.0, 0.0}; // impr, clicks, spend
        const auto& h = history_[static_cast<std::size_t>(m)];
        const long n = static_cast<long>(h.size());
        const long hi = n - 7L * (weeks_back - 1);
        const long lo = hi - 7;
        for (long d = std::max(0L, lo); d < std::min(n, hi); ++d) {
            out[0] += h[d][0];
            out[1] += h[d][1];
            out[2] += h[d][2];
        }
        return out;
    }

private:
    void finish_day(const DayRecord& rec) {
        const int M = cfg_.num_advertisers, P = cfg_.num_channels;
        const double w = 0.35;
        std::vector<double> ch_impr(P, 0.0), ch_clicks(P, 0.0);
        for (int m = 0; m < M; ++m) {
            double impr = 0, clicks = 0, spend = 0;
            for (int p = 0; p < P; ++p) {
                const auto& st = rec.stats[m * P + p];
                impr += st.impressions;
                clicks += st.clicks;
                spend += st.spend;
                ch_impr[p] += st.impressions;
                ch_clicks[p] += st.clicks;
                if (st.impressions > 0) {
                    const double dctr = st.clicks / st.impressions;
                    ema_ctr_[m][p] = ema_ctr_[m][p] == 0.0 ? dctr : (1 - w) * ema_ctr_[m][p] + w * dctr;
                }
                if (st.clicks > 0) {
                    const double dcvr = st.conversions / st.clicks;
                    ema_cvr_[m][p] = ema_cvr_[m][p] == 0.0 ? dcvr : (1 - w) * ema_cvr_[m][p] + w * dcvr;
                    prev_cpc_ratio_[m][p] = std::min(st.spend / st.clicks / advs_[m].cpc_target, 3.0);
                } else {
                    prev_cpc_ratio_[m][p] = 0.0;
                }
                prev_alloc_[m][p] = rec.alloc[m].fractions[p];
                const double amount = rec.alloc[m].fractions[p] * advs_[m].daily_budget;
                prev_spend_ratio_[m][p] = amount > 1e-12 ? st.spend / amount : 0.0;
                prev_clicks_[m][p] = st.clicks;
            }
            history_[m].push_back({impr, clicks, spend});
            run_spend_[m] += spend;
            run_clicks_[m] += clicks;
            double rev = 0.0;
            for (int p = 0; p < P; ++p) rev += rec.stats[m * P + p].revenue;
            run_revenue_[m] += rev;
        }
        for (int p = 0; p < P; ++p)
            if (ch_impr[p] > 0) {
                const double dctr = ch_clicks[p] / ch_impr[p];
                channel_ema_ctr_[p] =
                    channel_ema_ctr_[p] == 0.0 ? dctr : (1 - w) * channel_ema_ctr_[p] + w * dctr;
            }
    }

    static constexpr std::uint64_t kTrafficTag = 0x7124FF1C;
    static constexpr std::uint64_t kAuctionTag = 0xA0C710;

    WorldConfig cfg_;
    ObsLayout layout_;
    FeedbackModel fb_;
    std::vector<Advertiser> advs_;

    std::vector<std::vector<double>> alloc_frac_, alloc_amount_;
    std::vector<ChannelDayStats> day_stats_; // M*P, reset daily
    std::vector<std::vector<double>> ema_ctr_, ema_cvr_;
    std::vector<double> channel_ema_ctr_;
    std::vector<std::vector<double>> prev_alloc_, prev_spend_ratio_, prev_clicks_, prev_cpc_ratio_;
    std::vector<double> run_spend_, run_clicks_, run_revenue_;
    std::vector<std::vector<std::array<double, 3>>> history_; // per adv per day: impr, clicks, spend
    long auctions_run_ = 0;
    bottom::RewardMode reward_mode_ = bottom::RewardMode::Hinge;
};

} // namespace crossbid::sim
