#pragma once

#include <vector>

namespace diffaudit {

// Variance schedule for the forward process plus the derived quantities the
// samplers need. Arrays are stored for t = 1..T at index t-1; the *_at
// accessors take the 1-based timestep used throughout the formulas.
struct NoiseSchedule {
    int timesteps = 0;
    double beta_min = 0.0;
    double beta_max = 0.0;
    std::vector<double> beta;
    std::vector<double> alpha;          // 1 - beta
    std::vector<double> alpha_bar;      // cumulative product of alpha
    std::vector<double> posterior_var;  // fixed reverse-process variance

    double beta_at(int t) const { return beta[t - 1]; }
    double alpha_at(int t) const { return alpha[t - 1]; }
    double alpha_bar_at(int t) const { return alpha_bar[t - 1]; }
    double posterior_var_at(int t) const { return posterior_var[t - 1]; }
    // alpha_bar at t-1 with the t=1 boundary fixed to 1 (fully clean signal).
    double alpha_bar_prev(int t) const { return t <= 1 ? 1.0 : alpha_bar[t - 2]; }
};

// Linear interpolation from beta_min to beta_max inclusive over T steps.
// Requires T >= 2 and 0 < beta_min <= beta_max < 1.
NoiseSchedule make_linear_schedule(int T, double beta_min, double beta_max);

}  // namespace diffaudit
