#pragma once

#include <functional>
#include <memory>

#include "crossbid/eval/metrics.hpp"
#include "crossbid/eval/strategy.hpp"

namespace crossbid::eval {

using StrategyFactory = std::function<std::unique_ptr<sim::Bidder>(std::uint64_t eval_seed)>;

/// Runs one policy on the held-out evaluation window. Evaluation seed s uses
/// days [train_days + s*eval_days, ...), none of which appear in the training
/// logs; a short warm-up (excluded from metrics) settles the rolling
/// statistics. Accounting is asserted to close exactly: the reported cost is
/// the sum of realized charges and clicks are integer-consistent.
inline MetricsReport evaluate_run(const Config& cfg, sim::Bidder& strat, const std::string& name,
                                  std::uint64_t eval_seed) {
    sim::World world(cfg.world);
    const int M = cfg.world.num_advertisers;
    const int P = cfg.world.num_channels;
    const long start = cfg.eval.train_days +
                       static_cast<long>(eval_seed) * cfg.eval.eval_days;

    MetricsReport report;
    report.policy = name;
    report.seed = eval_seed;
    report.world_hash = cfg.world.hash();
    report.per_channel.assign(P, MetricSlice{});

    std::vector<double> adv_spend(M, 0.0), adv_clicks(M, 0.0);
    for (long day = start - cfg.eval.warmup_days; day < start + cfg.eval.eval_days; ++day) {
        auto res = world.run_day(std::max<long>(0, day), strat);
        if (day < start) continue; // warm-up
        // accounting closure: sum of realized charges equals the recorded cost
        std::vector<double> charge_sum(M * P, 0.0), click_sum(M * P, 0.0);
        for (const auto& ev : res.events)
            for (const auto& br : ev.bids)
                if (br.won) {
                    charge_sum[br.advertiser * P + ev.pvid] += br.final_charge;
                    click_sum[br.advertiser * P + ev.pvid] += br.clicks;
                }
        for (int m = 0; m < M; ++m) {
            for (int p = 0; p < P; ++p) {
                const auto& st = res.record.at(m, p, P);
                CB_REQUIRE(st.spend == charge_sum[m * P + p],
                           "metric accounting: cost mismatch for advertiser ", m);
                CB_REQUIRE(st.clicks == click_sum[m * P + p],
                           "metric accounting: click mismatch for advertiser ", m);
                report.per_channel[p].impressions += st.impressions;
                report.per_channel[p].clicks += st.clicks;
                report.per_channel[p].cost += st.spend;
                report.per_channel[p].revenue += st.revenue;
                report.per_channel[p].conversions += st.conversions;
                adv_spend[m] += st.spend;
                adv_clicks[m] += st.clicks;
            }
        }
    }
    for (const auto& c : report.per_channel) report.total += c;

    int active = 0, violating = 0;
    auto advs = sim::generate_advertisers(cfg.world);
    for (int m = 0; m < M; ++m) {
        if (adv_spend[m] <= 0.0) continue;
        ++active;
        if (adv_clicks[m] == 0.0 || adv_spend[m] / adv_clicks[m] > advs[m].cpc_target)
            ++violating;
    }
    report.cpc_violation_rate = active > 0 ? static_cast<double>(violating) / active : 0.0;
    return report;
}

inline std::vector<MetricsReport> evaluate_policy(const Config& cfg, const std::string& name,
                                                  const StrategyFactory& make,
                                                  const std::vector<std::uint64_t>& seeds) {
    std::vector<MetricsReport> out;
    for (auto s : seeds) {
        auto strat = make(s);
        out.push_back(evaluate_run(cfg, *strat, name, s));
    }
    return out;
}

} // namespace crossbid::eval
