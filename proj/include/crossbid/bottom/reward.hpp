#pragma once

#include <algorithm>
#include <string>

#include "crossbid/core/error.hpp"

namespace crossbid::bottom {

/// Hinge (default): c_t = max(0, cumulative_cost - b^p) / b^p, keeping the
/// reward O(1). Literal: c_t = cumulative_cost - b^p, the unhinged form kept
/// for fidelity experiments.
enum class RewardMode { Hinge, Literal };

inline RewardMode reward_mode_from(const std::string& s) {
    if (s == "hinge") return RewardMode::Hinge;
    if (s == "literal") return RewardMode::Literal;
    detail::raise("unknown reward mode: ", s);
}

/// r_t = click - c_t under the configured budget-violation penalty.
inline double reward(int click, double cumulative_cost, double alloc_amount,
                     RewardMode mode = RewardMode::Hinge) {
    CB_REQUIRE(cumulative_cost >= 0.0, "reward: costs must be nonnegative");
    CB_REQUIRE(click == 0 || click == 1, "reward: click must be 0/1");
    if (alloc_amount <= 0.0) {
        CB_REQUIRE(cumulative_cost <= 0.0,
                   "reward: positive cost against a zero allocation (allocation logic fault)");
        return click;
    }
    const double c = mode == RewardMode::Literal
                         ? cumulative_cost - alloc_amount
                         : std::max(0.0, cumulative_cost - alloc_amount) / alloc_amount;
    return click - c;
}

} // namespace crossbid::bottom
