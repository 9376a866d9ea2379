#pragma once

#include <json.hpp>
#include <optional>

#include "crossbid/core/error.hpp"
#include "crossbid/core/hash.hpp"

namespace crossbid::eval {

using json = nlohmann::json;

struct MetricSlice {
    double impressions = 0.0;
    double clicks = 0.0;
    double cost = 0.0;
    double revenue = 0.0;
    double conversions = 0.0;

    /// CPC is undefined at zero clicks and reported as absent, never zero.
    std::optional<double> cpc() const {
        if (clicks <= 0.0) return std::nullopt;
        return cost / clicks;
    }
    std::optional<double> roi() const {
        if (cost <= 0.0) return std::nullopt;
        return revenue / cost;
    }

    MetricSlice& operator+=(const MetricSlice& o) {
        impressions += o.impressions;
        clicks += o.clicks;
        cost += o.cost;
        revenue += o.revenue;
        conversions += o.conversions;
        return *this;
    }
};

struct MetricsReport {
    std::string policy;
    std::uint64_t seed = 0;
    std::uint64_t world_hash = 0;
    MetricSlice total;
    std::vector<MetricSlice> per_channel;
    double cpc_violation_rate = 0.0; // advertisers with CPC^real > CPC^tar over the run

    json to_json() const {
        auto slice = [](const MetricSlice& s) {
            json j;
            j["impr"] = s.impressions;
            j["clicks"] = s.clicks;
            j["cost"] = s.cost;
            j["revenue"] = s.revenue;
            j["conversions"] = s.conversions;
            if (s.cpc()) j["cpc"] = *s.cpc();
            if (s.roi()) j["roi"] = *s.roi();
            return j;
        };
        json j;
        j["policy"] = policy;
        j["seed"] = seed;
        j["world_hash"] = hash_hex(world_hash);
        j["total"] = slice(total);
        j["per_channel"] = json::array();
        for (const auto& c : per_channel) j["per_channel"].push_back(slice(c));
        j["cpc_violation_rate"] = cpc_violation_rate;
        return j;
    }
};

struct Deltas {
    double impr = 0.0;
    double clicks = 0.0;
    double cpc = 0.0; // negative means cheaper clicks (an improvement)
    double roi = 0.0;
};

/// Percentage deltas against a baseline on the same world:
/// 100 * (x - x_base) / x_base per metric. Zero or absent baseline metrics
/// are errors.
inline Deltas normalized_improvement(const MetricsReport& report, const MetricsReport& baseline) {
    CB_REQUIRE(report.world_hash == baseline.world_hash,
               "normalized_improvement: reports come from different worlds");
    auto pct = [](double x, double base, const char* name) {
        CB_REQUIRE(base != 0.0, "normalized_improvement: zero baseline ", name);
        return 100.0 * (x - base) / base;
    };
    Deltas d;
    d.impr = pct(report.total.impressions, baseline.total.impressions, "IMPR");
    d.clicks = pct(report.total.clicks, baseline.total.clicks, "CLICKS");
    CB_REQUIRE(report.total.cpc() && baseline.total.cpc(),
               "normalized_improvement: CPC undefined (zero clicks)");
    d.cpc = pct(*report.total.cpc(), *baseline.total.cpc(), "CPC");
    CB_REQUIRE(report.total.roi() && baseline.total.roi(),
               "normalized_improvement: ROI undefined (zero cost)");
    d.roi = pct(*report.total.roi(), *baseline.total.roi(), "ROI");
    return d;
}

inline MetricsReport mean_report(const std::vector<MetricsReport>& reports) {
    CB_REQUIRE(!reports.empty(), "mean_report: empty input");
    MetricsReport mean = reports.front();
    mean.seed = 0;
    for (std::size_t i = 1; i < reports.size(); ++i) {
        mean.total += reports[i].total;
        for (std::size_t p = 0; p < mean.per_channel.size(); ++p)
            mean.per_channel[p] += reports[i].per_channel[p];
        mean.cpc_violation_rate += reports[i].cpc_violation_rate;
    }
    const double n = static_cast<double>(reports.size());
    mean.total.impressions /= n;
    mean.total.clicks /= n;
    mean.total.cost /= n;
    mean.total.revenue /= n;
    mean.total.conversions /= n;
    for (auto& c : mean.per_channel) {
        c.impressions /= n;
        c.clicks /= n;
        c.cost /= n;
        c.revenue /= n;
        c.conversions /= n;
    }
    mean.cpc_violation_rate /= n;
    return mean;
}

} // namespace crossbid::eval
