#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <string>
#include <vector>

#include "crossbid/core/error.hpp"
#include "crossbid/core/rng.hpp"

namespace crossbid::sim {

using Vec = Eigen::VectorXd;

struct Advertiser {
    int id = 0;                    // m
    double daily_budget = 0.0;     // B_m, refreshed every day
    double cpc_target = 0.0;       // CPC^tar_m
    double value_per_conversion = 0.0;
    std::vector<double> quality;   // per-channel affinity, length P (0 where inactive)
    std::vector<int> active_channels; // sorted, non-empty

    bool active_on(int p) const {
        return std::binary_search(active_channels.begin(), active_channels.end(), p);
    }

    void validate(int num_channels) const {
        CB_REQUIRE(daily_budget > 0.0, "advertiser ", id, ": daily_budget must be positive");
        CB_REQUIRE(cpc_target > 0.0, "advertiser ", id, ": cpc_target must be positive");
        CB_REQUIRE(value_per_conversion > 0.0, "advertiser ", id, ": value_per_conversion must be positive");
        CB_REQUIRE(!active_channels.empty(), "advertiser ", id, ": active_channels must be non-empty");
        CB_REQUIRE(static_cast<int>(quality.size()) == num_channels,
                   "advertiser ", id, ": quality vector length mismatch");
        for (int p : active_channels)
            CB_REQUIRE(p >= 0 && p < num_channels, "advertiser ", id, ": bad channel index ", p);
    }
};

struct Channel {
    int id = 0;                        // p
    std::string name;
    std::vector<double> arrival_profile; // per-tick mean request count
    double xi_min = 0.5;
    double xi_max = 1.5;
    double base_ctr = 0.1;             // in (0,1)
    double base_cvr = 0.15;
    double participation = 0.1;        // base per-advertiser retrieval probability
    double comp_amp = 0.0;             // competition wave amplitude (fraction of base)
    double comp_period_days = 3.0;
    double comp_phase = 0.0;
    Vec user_mean;                     // channel-specific user feature mean

    void validate() const {
        CB_REQUIRE(xi_min > 0.0 && xi_min < xi_max, "channel ", id, ": need 0 < xi_min < xi_max");
        CB_REQUIRE(base_ctr > 0.0 && base_ctr < 1.0, "channel ", id, ": base_ctr must be in (0,1)");
        CB_REQUIRE(base_cvr > 0.0 && base_cvr < 1.0, "channel ", id, ": base_cvr must be in (0,1)");
        for (double r : arrival_profile)
            CB_REQUIRE(r >= 0.0, "channel ", id, ": arrival rates must be nonnegative");
        CB_REQUIRE(std::abs(comp_amp) < 1.0, "channel ", id, ": |comp_amp| must be < 1");
    }

    /// Time-varying retrieval probability (competitive intensity).
    double participation_at(int tick, int ticks_per_day, long day) const {
        const double phase = static_cast<double>(tick) / ticks_per_day +
                             static_cast<double>(day) / comp_period_days + comp_phase;
        const double wave = 1.0 + comp_amp * std::sin(2.0 * M_PI * phase);
        return std::clamp(participation * wave, 0.01, 0.95);
    }
};

struct ImpressionRequest {
    int channel_id = 0;
    int tick = 0;
    double time_in_tick = 0.0;  // deterministic ordering key within a tick
    double reserve = 0.0;       // slot-quality floor price for this request
    Vec user_features;
    std::vector<int> eligible;  // advertiser ids retrieved for this request
    long t = 0;                 // per-channel request index within the day
    long global_index = 0;      // position in the merged per-day stream

    double request_time() const { return tick + time_in_tick; }
};

struct AuctionResult {
    int winner = -1; // -1: no winner
    double price = 0.0;
    std::vector<std::pair<int, double>> losing_bids;

    bool has_winner() const { return winner >= 0; }
};

struct Feedback {
    int clicked = 0;
    int converted = 0;
    double revenue = 0.0;
};

/// Hidden ground-truth user response model: logistic click model over user
/// features plus a per-channel bias and the winner's channel affinity;
/// conversion is conditional on a click.
class FeedbackModel {
public:
    FeedbackModel() = default;

    static FeedbackModel create(int num_channels, int feature_dim,
                                const std::vector<double>& base_ctr,
                                const std::vector<double>& base_cvr, Rng rng) {
        FeedbackModel m;
        m.click_w_ = Vec(feature_dim);
        m.conv_w_ = Vec(feature_dim);
        const double ws = 0.5 / std::sqrt(static_cast<double>(feature_dim));
        for (int f = 0; f < feature_dim; ++f) m.click_w_[f] = rng.normal(0.0, ws);
        for (int f = 0; f < feature_dim; ++f) m.conv_w_[f] = rng.normal(0.0, ws);
        m.click_bias_.resize(num_channels);
        m.conv_bias_.resize(num_channels);
        for (int p = 0; p < num_channels; ++p) {
            m.click_bias_[p] = logit(base_ctr[p]);
            m.conv_bias_[p] = logit(base_cvr[p]);
        }
        return m;
    }

    double click_logit(const Vec& user, int channel, double quality) const {
        return click_w_.dot(user) + click_bias_[channel] + quality;
    }

    double click_prob(const Vec& user, int channel, double quality) const {
        return sigmoid(click_logit(user, channel, quality));
    }

    double conversion_prob(const Vec& user, int channel, double quality) const {
        return sigmoid(conv_w_.dot(user) + conv_bias_[channel] + quality);
    }

    Feedback predict(const ImpressionRequest& req, const Advertiser& winner, Rng& rng) const {
        CB_REQUIRE(winner.active_on(req.channel_id),
                   "predict_feedback: winner ", winner.id, " not active on channel ", req.channel_id);
        Feedback fb;
        const double q = winner.quality[req.channel_id];
        const double pc = click_prob(req.user_features, req.channel_id, q);
        fb.clicked = rng.uniform() < pc ? 1 : 0;
        if (fb.clicked) {
            const double pv = conversion_prob(req.user_features, req.channel_id, q);
            fb.converted = rng.uniform() < pv ? 1 : 0;
            fb.revenue = fb.converted * winner.value_per_conversion;
        }
        return fb;
    }

    static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
    static double logit(double p) { return std::log(p / (1.0 - p)); }

    // serialization access
    Vec& click_weights() { return click_w_; }
    Vec& conv_weights() { return conv_w_; }
    std::vector<double>& click_biases() { return click_bias_; }
    std::vector<double>& conv_biases() { return conv_bias_; }

private:
    Vec click_w_, conv_w_;
    std::vector<double> click_bias_, conv_bias_;
};

} // namespace crossbid::sim
