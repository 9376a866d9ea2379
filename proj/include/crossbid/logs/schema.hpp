#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crossbid/sim/world.hpp"

namespace crossbid::logs {

using sim::Vec;

enum class Tier { Expert = 0, Medium = 1, Random = 2 };

inline const char* tier_name(int t) {
    switch (t) {
        case 0: return "expert";
        case 1: return "medium";
        case 2: return "random";
    }
    return "unlabeled";
}

/// One D^h record: a day of budget allocation for one advertiser.
struct TopTransition {
    Vec s;
    Vec b;             // executed allocation fractions
    double g = 0.0;    // that day's total clicks
    Vec s_next;
    long day = 0;
    int advertiser = 0;
    int day_in_episode = 0; // j, 0-based within the T-day episode
    bool terminal = false;  // j == T-1
    double budget = 0.0;
    double cpc_target = 0.0;
    int gen_tier = -1;
    int outcome_tier = -1;
};

struct TopDataset {
    static constexpr const char* kSchema = "crossbid.top.v1";
    int state_dim = 0;
    int channels = 0;
    int episode_days = 7;
    std::uint64_t config_hash = 0;
    std::vector<TopTransition> items;
};

/// One D^l trajectory: an advertiser-day over its joint request index. Each
/// step is one real request on one channel; the other channels pad (state
/// unchanged, zero reward). Padded blocks materialize at batch time from the
/// carry rule, so the stored trajectory holds only real events.
struct BottomTrajectory {
    long day = 0;
    int advertiser = 0;
    int gen_tier = -1;
    int outcome_tier = -1;
    std::vector<Vec> day_start_obs; // P entries: observation before any request
    std::vector<int> channel;       // real channel per step
    std::vector<Vec> obs;           // decision-time observation (real channel)
    std::vector<double> action;     // bid ratio
    std::vector<double> reward;     // bottom reward r^p_t
    std::vector<long> global_index; // per-day stream position (context ordering)

    std::size_t length() const { return channel.size(); }
};

struct BottomDataset {
    static constexpr const char* kSchema = "crossbid.bottom.v1";
    int channels = 0;
    int obs_dim = 0;
    std::uint64_t config_hash = 0;
    std::vector<BottomTrajectory> items;

    std::size_t total_steps() const {
        std::size_t n = 0;
        for (const auto& t : items) n += t.length();
        return n;
    }
};

/// Raw simulation output of one generation run: per-day records plus the
/// full auction event log (the production-schema surface).
struct RunLog {
    sim::WorldConfig world;
    std::vector<sim::DayRecord> days;
    std::vector<sim::EventRecord> events; // across all days, time-ordered
};

} // namespace crossbid::logs
