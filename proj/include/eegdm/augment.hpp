#ifndef EEGDM_AUGMENT_HPP
#define EEGDM_AUGMENT_HPP

#include <string>
#include <vector>

#include "eegdm/recording.hpp"

namespace eegdm {

enum class AugmentKind { Identity, ZeroMask, AmplitudeScale };

struct AugmentSpec {
    AugmentKind kind = AugmentKind::Identity;
    double mask_fraction = 0.1;  // zero_mask: contiguous fraction per channel
    double scale_low = 0.5;      // amplitude_scale: per-channel draw range
    double scale_high = 2.0;
    uint64_t seed = 0;

    AugmentSpec with_seed(uint64_t s) const {
        AugmentSpec out = *this;
        out.seed = s;
        return out;
    }
};

AugmentKind augment_kind_from_string(const std::string& s);
std::string augment_kind_to_string(AugmentKind k);

// View 1 is always the unaugmented original.
struct ViewSet {
    std::vector<Sample> views;
    int count() const { return int(views.size()); }
};

Sample apply(const Sample& sample, const AugmentSpec& spec);
ViewSet make_views(const Sample& sample, const std::vector<AugmentSpec>& specs);

}  // namespace eegdm

#endif
