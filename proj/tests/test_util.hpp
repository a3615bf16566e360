#ifndef EEGDM_TEST_UTIL_HPP
#define EEGDM_TEST_UTIL_HPP

#include <cmath>
#include <vector>

#include "eegdm/dit.hpp"
#include "eegdm/encoder.hpp"
#include "eegdm/recording.hpp"
#include "eegdm/synth.hpp"

namespace eegdm::test {

// Goertzel-style bandpower: mean squared DFT magnitude over bins inside
// [lo_hz, hi_hz). Independent of any product code paths.
inline double bandpower(const MatF& data, int channel, double fs, double lo_hz, double hi_hz) {
    const int n = int(data.cols());
    double power = 0.0;
    int bins = 0;
    for (int k = 1; k <= n / 2; ++k) {
        double f = double(k) * fs / double(n);
        if (f < lo_hz || f >= hi_hz) continue;
        double re = 0.0, im = 0.0;
        for (int t = 0; t < n; ++t) {
            double arg = -2.0 * M_PI * double(k) * double(t) / double(n);
            re += data(channel, t) * std::cos(arg);
            im += data(channel, t) * std::sin(arg);
        }
        power += re * re + im * im;
        ++bins;
    }
    return bins > 0 ? power / bins : 0.0;
}

// Brute-force two-band threshold classifier used as the separability oracle.
inline int bandpower_classify(const MatF& data, double fs, double lo0, double hi0, double lo1,
                              double hi1) {
    double p0 = 0.0, p1 = 0.0;
    for (int c = 0; c < data.rows(); ++c) {
        p0 += bandpower(data, c, fs, lo0, hi0);
        p1 += bandpower(data, c, fs, lo1, hi1);
    }
    return p1 > p0 ? 1 : 0;
}

// Independently coded KL between two diagonal Gaussians (per element).
inline double gaussian_kl(double mu1, double var1, double mu2, double var2) {
    return std::log(std::sqrt(var2) / std::sqrt(var1)) +
           (var1 + (mu1 - mu2) * (mu1 - mu2)) / (2.0 * var2) - 0.5;
}

// Draw every parameter tensor from N(0, sigma) so gradients are generic
// (zero-initialized gates otherwise block most paths at init).
inline void randomize_params(EncoderParams& p, uint64_t seed, double sigma = 0.3) {
    Rng rng(seed);
    for_each_tensor(p, [&](const std::string&, Mat& m) {
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) m(i, j) = sigma * rng.normal();
    });
}

inline void randomize_params(DiTParams& p, uint64_t seed, double sigma = 0.3) {
    Rng rng(seed);
    for_each_tensor(p, [&](const std::string&, Mat& m) {
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) m(i, j) = sigma * rng.normal();
    });
}

inline Sample make_sample(const MatF& data, int label = 0, const std::string& subject = "s0") {
    Sample s;
    s.data = data;
    s.label = label;
    s.subject_id = subject;
    s.source_recording = "test";
    return s;
}

inline Sample random_sample(int channels, int length, uint64_t seed, int label = 0) {
    Rng rng(seed);
    MatF data(channels, length);
    for (int c = 0; c < channels; ++c)
        for (int t = 0; t < length; ++t) data(c, t) = float(rng.normal());
    return make_sample(data, label);
}

// Two-class synthetic config with well-separated bands, the workhorse of the
// downstream tests.
inline SynthConfig separable_synth(int channels = 2, int duration = 512,
                                   int recordings_per_class = 12, int test_per_class = 4) {
    SynthConfig cfg;
    cfg.channels = channels;
    cfg.duration = duration;
    cfg.sampling_rate = 128.0;
    cfg.classes = 2;
    cfg.recordings_per_class = recordings_per_class;
    cfg.test_recordings_per_class = test_per_class;
    cfg.subjects = 4;
    cfg.class_freqs = {{9.0, 11.0}, {21.0, 27.0}};
    cfg.snr_db = 6.0;
    return cfg;
}

}  // namespace eegdm::test

#endif
