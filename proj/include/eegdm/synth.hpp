#ifndef EEGDM_SYNTH_HPP
#define EEGDM_SYNTH_HPP

#include <optional>
#include <vector>

#include "eegdm/recording.hpp"

namespace eegdm {

// Deterministic synthetic EEG: each class is a fixed mixture of band-limited
// sinusoids plus 1/f-shaped noise scaled to the requested SNR.
struct SynthConfig {
    int channels = 2;
    int duration = 1024;
    double sampling_rate = 128.0;
    int classes = 2;
    int recordings_per_class = 16;
    int test_recordings_per_class = 4;
    int subjects = 4;
    std::vector<std::vector<double>> class_freqs;  // Hz; one set per class
    double amplitude = 1.0;                        // per sinusoid
    std::optional<double> snr_db;                  // empty -> noiseless

    void validate() const;
};

// Canonical-band frequency sets (alpha, beta, theta, delta cycling) for the
// given class count; kept fixed so oracle tests can target them.
std::vector<std::vector<double>> default_class_freqs(int classes);

std::vector<Recording> synth_generate(const SynthConfig& cfg, uint64_t seed);

// Fixed-split role of a recording in the synthetic corpus: the last
// test_recordings_per_class recordings of each class are the test portion.
bool synth_is_test_recording(const SynthConfig& cfg, int index_within_class);

}  // namespace eegdm

#endif
