#ifndef EEGDM_RECORDING_HPP
#define EEGDM_RECORDING_HPP

#include <optional>
#include <string>
#include <vector>

#include "eegdm/common.hpp"

namespace eegdm {

// Multi-channel EEG recording, data is C x T (channel-major, float32 so that
// on-disk round trips are bit exact).
struct Recording {
    std::string id;
    std::string subject_id;
    double sampling_rate = 0.0;
    std::vector<std::string> channel_names;
    std::optional<int> label;
    MatF data;

    int channels() const { return int(data.rows()); }
    int duration() const { return int(data.cols()); }
    void validate() const;
};

struct Sample {
    MatF data;  // C x sample_length
    std::string source_recording;
    std::string subject_id;
    int offset = 0;
    std::optional<int> label;

    int channels() const { return int(data.rows()); }
    int length() const { return int(data.cols()); }
};

// Slices a recording into floor((T - sample_length) / stride) + 1 samples,
// sample i starting at offset i * stride. Labels are inherited.
std::vector<Sample> segment(const Recording& rec, int sample_length, int stride);

// Linear-interpolation resampling to target_rate.
Recording resample_linear(const Recording& rec, double target_rate);

// Per-channel z-scoring in place (mean 0, variance 1; constant channels are
// left centered at zero).
void zscore_channels(Recording& rec);

enum class SplitMode { FixedTrainTest, Loso, Fraction };

struct SplitSpec {
    SplitMode mode = SplitMode::FixedTrainTest;
    double fraction = 1.0;
    std::string held_out_subject;
    uint64_t seed = 0;
};

// Class-stratified selection of ceil(fraction * N) sample indices. Quotas per
// class are apportioned by largest remainder so proportions hold within one
// sample per class; deterministic per seed.
std::vector<int> stratified_fraction_indices(const std::vector<Sample>& samples, double fraction,
                                             uint64_t seed);

std::vector<std::string> subject_ids(const std::vector<Sample>& samples);

}  // namespace eegdm

#endif
