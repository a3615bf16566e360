#ifndef EEGDM_CHECKPOINT_HPP
#define EEGDM_CHECKPOINT_HPP

#include <optional>
#include <string>

#include "json.hpp"

#include "eegdm/diffusion.hpp"

namespace eegdm {

struct LinearHead {
    Mat w;  // n_classes x d
    Mat b;  // 1 x n_classes
    int n_classes() const { return int(w.rows()); }
};

// Versioned archive of named float64 tensors plus a JSON manifest holding the
// resolved config echo, step count and seed. Loading validates every tensor
// shape against the manifest.
struct Checkpoint {
    int version = 1;
    uint64_t seed = 0;
    int64_t step = 0;
    nlohmann::ordered_json config;
    EncoderParams encoder;
    DiTParams dit;
    PcaBasis pca;
    NoiseSchedule schedule;
    std::optional<LinearHead> head;  // present after fine-tuning
};

void save_checkpoint(Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace eegdm

#endif
