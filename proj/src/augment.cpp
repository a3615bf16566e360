#include "eegdm/augment.hpp"

namespace eegdm {

AugmentKind augment_kind_from_string(const std::string& s) {
    if (s == "identity") return AugmentKind::Identity;
    if (s == "zero_mask") return AugmentKind::ZeroMask;
    if (s == "amplitude_scale") return AugmentKind::AmplitudeScale;
    throw ConfigError("unknown augmentation kind: " + s);
}

std::string augment_kind_to_string(AugmentKind k) {
    switch (k) {
        case AugmentKind::Identity: return "identity";
        case AugmentKind::ZeroMask: return "zero_mask";
        case AugmentKind::AmplitudeScale: return "amplitude_scale";
    }
    return "identity";
}

Sample apply(const Sample& sample, const AugmentSpec& spec) {
    Sample out = sample;
    const int C = sample.channels();
    const int T = sample.length();

    switch (spec.kind) {
        case AugmentKind::Identity:
            break;
        case AugmentKind::ZeroMask: {
            if (spec.mask_fraction < 0.0 || spec.mask_fraction >= 1.0)
                throw ConfigError("mask_fraction must be in [0, 1)");
            const int len = int(std::floor(spec.mask_fraction * T));
            if (len == 0) break;
            Rng rng(spec.seed);
            for (int c = 0; c < C; ++c) {
                int start = rng.uniform_int(0, T - len);
                out.data.row(c).segment(start, len).setZero();
            }
            break;
        }
        case AugmentKind::AmplitudeScale: {
            if (spec.scale_low <= 0.0 || spec.scale_low > spec.scale_high)
                throw ConfigError("scale_range requires 0 < low <= high");
            Rng rng(spec.seed);
            for (int c = 0; c < C; ++c) {
                float factor = float(rng.uniform(spec.scale_low, spec.scale_high));
                out.data.row(c) *= factor;
            }
            break;
        }
    }
    return out;
}

ViewSet make_views(const Sample& sample, const std::vector<AugmentSpec>& specs) {
    if (specs.empty()) throw ConfigError("augmentation spec list must be nonempty");
    ViewSet vs;
    vs.views.push_back(sample);
    for (const auto& spec : specs) vs.views.push_back(apply(sample, spec));
    return vs;
}

}  // namespace eegdm
