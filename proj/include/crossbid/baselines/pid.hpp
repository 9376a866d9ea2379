#pragma once

#include <algorithm>

#include "crossbid/core/error.hpp"

namespace crossbid::baselines {

struct PidGains {
    double kp = 0.4;
    double ki = 0.05;
    double kd = 0.1;
    double integral_clamp = 5.0; // anti-windup bound on the accumulated error
};

/// Classical feedback controller on the CPC error, driving a bid scale kept
/// inside the channel's ratio bounds.
struct PidState {
    PidGains gains;
    double xi_min = 0.5;
    double xi_max = 1.5;
    double scale = 1.0;
    double integral = 0.0;
    double prev_error = 0.0;
    bool has_prev = false;

    /// e = cpc_target - cpc_realized; scale += kp*e + ki*int(e) + kd*de.
    double update(double cpc_target, double cpc_realized) {
        CB_REQUIRE(cpc_realized >= 0.0, "pid_update: realized CPC must be nonnegative");
        const double e = cpc_target - cpc_realized;
        integral = std::clamp(integral + e, -gains.integral_clamp, gains.integral_clamp);
        const double de = has_prev ? e - prev_error : 0.0;
        prev_error = e;
        has_prev = true;
        scale += gains.kp * e + gains.ki * integral + gains.kd * de;
        scale = std::clamp(scale, xi_min, xi_max);
        return scale;
    }

    void reset_day() {
        integral = 0.0;
        prev_error = 0.0;
        has_prev = false;
    }
};

} // namespace crossbid::baselines
