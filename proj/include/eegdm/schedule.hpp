#ifndef EEGDM_SCHEDULE_HPP
#define EEGDM_SCHEDULE_HPP

#include "eegdm/common.hpp"

namespace eegdm {

// Linear beta schedule with derived tables. All vectors are indexed by
// timestep 1..t_max; index 0 is a sentinel (alpha_bar(0) == 1).
struct NoiseSchedule {
    int t_max = 0;
    Vec beta;
    Vec alpha;
    Vec alpha_bar;
    Vec beta_tilde;                // posterior variance; beta_tilde(1) == 0
    Vec log_beta;
    Vec log_beta_tilde_clipped;    // t = 1 entry patched to beta_tilde(2)

    static NoiseSchedule linear(int t_max, double beta_start, double beta_end);

    void validate() const;

    double abar(int t) const { return alpha_bar(t); }
};

}  // namespace eegdm

#endif
