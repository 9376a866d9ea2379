#pragma once

#include <vector>

#include "crossbid/sim/types.hpp"

namespace crossbid::sim {

/// Poisson traffic for one channel-day: per-tick counts from the arrival
/// profile, user features drawn around the channel's user mean. Deterministic
/// given the rng seed; requests come out time-ordered.
inline std::vector<ImpressionRequest> generate_requests(const Channel& channel, long day, Rng rng,
                                                        double base_reserve = 0.0,
                                                        double floor_spread = 0.0) {
    (void)day; // the caller derives the rng from (seed, day, channel)
    std::vector<ImpressionRequest> out;
    const int F = static_cast<int>(channel.user_mean.size());
    long t = 0;
    for (int tick = 0; tick < static_cast<int>(channel.arrival_profile.size()); ++tick) {
        const int n = rng.poisson(channel.arrival_profile[tick]);
        for (int i = 0; i < n; ++i) {
            ImpressionRequest req;
            req.channel_id = channel.id;
            req.tick = tick;
            req.time_in_tick = rng.uniform();
            const double u = rng.uniform();
            req.reserve = base_reserve + floor_spread * u * u;
            req.user_features = Vec(F);
            for (int f = 0; f < F; ++f)
                req.user_features[f] = channel.user_mean[f] + rng.normal(0.0, 0.7);
            req.t = t++;
            out.push_back(std::move(req));
        }
    }
    // stable time order within ticks
    std::stable_sort(out.begin(), out.end(), [](const ImpressionRequest& a, const ImpressionRequest& b) {
        if (a.tick != b.tick) return a.tick < b.tick;
        return a.time_in_tick < b.time_in_tick;
    });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].t = static_cast<long>(i);
    return out;
}

} // namespace crossbid::sim
