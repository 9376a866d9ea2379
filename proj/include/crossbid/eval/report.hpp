#pragma once

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "crossbid/eval/metrics.hpp"

namespace crossbid::eval {

/// CSV contract (v1). Columns, in order:
///   policy, seed, world_hash, impr, clicks, cost, revenue, cpc, roi,
///   cpc_violation_rate[, d_impr, d_clicks, d_cpc, d_roi]
/// The delta columns appear when a baseline policy is named; cpc/roi cells
/// are empty when undefined (zero clicks / zero cost). Rows sort by
/// (policy, seed).
inline std::string reports_to_csv(std::vector<MetricsReport> reports,
                                  const std::string& baseline_policy = "") {
    std::stable_sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
        if (a.policy != b.policy) return a.policy < b.policy;
        return a.seed < b.seed;
    });

    const bool with_deltas = !baseline_policy.empty();
    std::map<std::uint64_t, const MetricsReport*> baseline_by_seed;
    if (with_deltas)
        for (const auto& r : reports)
            if (r.policy == baseline_policy) baseline_by_seed[r.seed] = &r;

    std::ostringstream os;
    os << "csv_version=1\n";
    os << "policy,seed,world_hash,impr,clicks,cost,revenue,cpc,roi,cpc_violation_rate";
    if (with_deltas) os << ",d_impr,d_clicks,d_cpc,d_roi";
    os << "\n";
    os << std::setprecision(10);
    for (const auto& r : reports) {
        os << r.policy << "," << r.seed << "," << hash_hex(r.world_hash) << ","
           << r.total.impressions << "," << r.total.clicks << "," << r.total.cost << ","
           << r.total.revenue << ",";
        if (r.total.cpc()) os << *r.total.cpc();
        os << ",";
        if (r.total.roi()) os << *r.total.roi();
        os << "," << r.cpc_violation_rate;
        if (with_deltas) {
            auto it = baseline_by_seed.find(r.seed);
            if (it != baseline_by_seed.end() && r.policy != baseline_policy) {
                Deltas d = normalized_improvement(r, *it->second);
                os << "," << d.impr << "," << d.clicks << "," << d.cpc << "," << d.roi;
            } else {
                os << ",,,,";
            }
        }
        os << "\n";
    }
    return os.str();
}

inline void write_csv(const std::vector<MetricsReport>& reports, const std::string& path,
                      const std::string& baseline_policy = "") {
    std::ofstream os(path, std::ios::binary);
    CB_REQUIRE(os.good(), "cannot open for writing: ", path);
    os << reports_to_csv(reports, baseline_policy);
    CB_REQUIRE(os.good(), "write failure on ", path);
}

/// Human-readable summary: one line per (policy, seed) plus per-policy means.
inline std::string summarize(std::vector<MetricsReport> reports) {
    std::stable_sort(reports.begin(), reports.end(), [](const auto& a, const auto& b) {
        if (a.policy != b.policy) return a.policy < b.policy;
        return a.seed < b.seed;
    });
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    std::string current;
    std::vector<MetricsReport> group;
    auto flush = [&]() {
        if (group.empty()) return;
        MetricsReport mean = mean_report(group);
        os << "  mean: impr " << mean.total.impressions << "  clicks " << mean.total.clicks
           << "  cpc " << (mean.total.cpc() ? std::to_string(*mean.total.cpc()) : "n/a")
           << "  roi " << (mean.total.roi() ? std::to_string(*mean.total.roi()) : "n/a")
           << "  viol " << mean.cpc_violation_rate << "\n";
        group.clear();
    };
    for (const auto& r : reports) {
        if (r.policy != current) {
            flush();
            current = r.policy;
            os << r.policy << "\n";
        }
        os << "  seed " << r.seed << ": impr " << r.total.impressions << "  clicks "
           << r.total.clicks << "  cpc " << (r.total.cpc() ? std::to_string(*r.total.cpc()) : "n/a")
           << "  roi " << (r.total.roi() ? std::to_string(*r.total.roi()) : "n/a") << "  viol "
           << r.cpc_violation_rate << "\n";
        group.push_back(r);
    }
    flush();
    return os.str();
}

} // namespace crossbid::eval
