#include "eegdm/schedule.hpp"

namespace eegdm {

NoiseSchedule NoiseSchedule::linear(int t_max, double beta_start, double beta_end) {
    if (t_max < 1) throw ConfigError("t_max must be positive");
    if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end))
        throw ConfigError("require 0 < beta_start <= beta_end < 1");
    if (t_max > 1 && !(beta_start < beta_end))
        throw ConfigError("linear schedule needs beta_start < beta_end");

    NoiseSchedule s;
    s.t_max = t_max;
    s.beta = Vec::Zero(t_max + 1);
    s.alpha = Vec::Zero(t_max + 1);
    s.alpha_bar = Vec::Zero(t_max + 1);
    s.beta_tilde = Vec::Zero(t_max + 1);
    s.log_beta = Vec::Zero(t_max + 1);
    s.log_beta_tilde_clipped = Vec::Zero(t_max + 1);

    s.alpha_bar(0) = 1.0;
    for (int t = 1; t <= t_max; ++t) {
        double frac = t_max > 1 ? double(t - 1) / double(t_max - 1) : 0.0;
        s.beta(t) = beta_start + (beta_end - beta_start) * frac;
        s.alpha(t) = 1.0 - s.beta(t);
        s.alpha_bar(t) = s.alpha_bar(t - 1) * s.alpha(t);
        s.beta_tilde(t) = (1.0 - s.alpha_bar(t - 1)) / (1.0 - s.alpha_bar(t)) * s.beta(t);
        s.log_beta(t) = std::log(s.beta(t));
    }
    for (int t = 1; t <= t_max; ++t) {
        double bt = s.beta_tilde(t);
        if (t == 1) bt = t_max >= 2 ? s.beta_tilde(2) : s.beta(1);
        s.log_beta_tilde_clipped(t) = std::log(bt);
    }
    s.validate();
    return s;
}

void NoiseSchedule::validate() const {
    if (t_max < 1) throw ConfigError("t_max must be positive");
    if (alpha_bar(0) != 1.0) throw NumericError("alpha_bar(0) must be 1");
    double cum = 1.0;
    for (int t = 1; t <= t_max; ++t) {
        if (!(beta(t) > 0.0 && beta(t) < 1.0)) throw NumericError("beta out of (0,1)");
        if (t > 1 && !(beta(t) > beta(t - 1))) throw NumericError("beta must be strictly increasing");
        if (!(alpha_bar(t) < alpha_bar(t - 1))) throw NumericError("alpha_bar must be strictly decreasing");
        if (std::abs(alpha(t) - (1.0 - beta(t))) > 1e-12) throw NumericError("alpha table inconsistent");
        cum *= 1.0 - beta(t);
        if (std::abs(alpha_bar(t) - cum) > 1e-12) throw NumericError("alpha_bar table inconsistent");
        double bt = (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t)) * beta(t);
        if (std::abs(beta_tilde(t) - bt) > 1e-12) throw NumericError("beta_tilde table inconsistent");
    }
}

}  // namespace eegdm
