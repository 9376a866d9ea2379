#pragma once

#include <algorithm>
#include <vector>

#include "crossbid/sim/types.hpp"

namespace crossbid::sim {

/// Final bid price from a bid ratio: a * CPC^tar. Out-of-bounds ratios are
/// clamped and flagged so callers can surface policy bugs.
inline double compute_final_bid(double ratio, double cpc_target, double xi_min, double xi_max,
                                bool* clamped = nullptr) {
    CB_REQUIRE(cpc_target > 0.0, "compute_final_bid: cpc_target must be positive");
    const double a = std::clamp(ratio, xi_min, xi_max);
    if (clamped) *clamped = (a != ratio);
    return a * cpc_target;
}

/// Second-price auction: highest bid at or above the reserve wins and pays
/// max(second-highest qualifying bid, reserve). Ties go to the lowest
/// advertiser id. A single qualifying bidder pays the reserve.
inline AuctionResult run_auction(const ImpressionRequest& req,
                                 const std::vector<std::pair<int, double>>& bids,
                                 double reserve) {
    AuctionResult res;
    for (const auto& [m, bid] : bids) {
        CB_REQUIRE(bid >= 0.0, "run_auction: negative bid from advertiser ", m);
        CB_REQUIRE(std::find(req.eligible.begin(), req.eligible.end(), m) != req.eligible.end(),
                   "run_auction: advertiser ", m, " is not eligible for this request");
    }

    int best = -1;
    double best_bid = 0.0, second = 0.0;
    for (const auto& [m, bid] : bids) {
        if (bid < reserve) continue;
        const bool wins = best < 0 || bid > best_bid || (bid == best_bid && m < best);
        if (wins) {
            if (best >= 0) second = std::max(second, best_bid);
            best = m;
            best_bid = bid;
        } else {
            second = std::max(second, bid);
        }
    }

    if (best >= 0) {
        res.winner = best;
        res.price = std::max(second, reserve);
    }
    for (const auto& [m, bid] : bids)
        if (m != res.winner) res.losing_bids.emplace_back(m, bid);
    return res;
}

} // namespace crossbid::sim
