#include "diffaudit/schedule.hpp"

#include <string>

#include "diffaudit/errors.hpp"

namespace diffaudit {

NoiseSchedule make_linear_schedule(int T, double beta_min, double beta_max) {
    if (T < 2) throw ConfigError("make_linear_schedule: T must be >= 2, got " + std::to_string(T));
    if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0)) {
        throw ConfigError("make_linear_schedule: need 0 < beta_min <= beta_max < 1");
    }

    NoiseSchedule s;
    s.timesteps = T;
    s.beta_min = beta_min;
    s.beta_max = beta_max;
    s.beta.resize(T);
    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    s.posterior_var.resize(T);

    const double step = (beta_max - beta_min) / static_cast<double>(T - 1);
    double prod = 1.0;
    for (int i = 0; i < T; ++i) {
        s.beta[i] = beta_min + step * static_cast<double>(i);
        s.alpha[i] = 1.0 - s.beta[i];
        prod *= s.alpha[i];
        s.alpha_bar[i] = prod;
    }
    s.posterior_var[0] = s.beta[0];
    for (int i = 1; i < T; ++i) {
        s.posterior_var[i] = (1.0 - s.alpha_bar[i - 1]) / (1.0 - s.alpha_bar[i]) * s.beta[i];
    }
    return s;
}

}  // namespace diffaudit
