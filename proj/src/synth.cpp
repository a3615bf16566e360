#include "eegdm/synth.hpp"

#include <cmath>

namespace eegdm {

void SynthConfig::validate() const {
    if (channels < 1 || duration < 1) throw ConfigError("synth dimensions must be positive");
    if (sampling_rate <= 0.0) throw ConfigError("synth sampling_rate must be positive");
    if (classes < 1 || recordings_per_class < 1) throw ConfigError("synth dimensions must be positive");
    if (test_recordings_per_class < 0 || test_recordings_per_class >= recordings_per_class)
        throw ConfigError("test_recordings_per_class must be in [0, recordings_per_class)");
    if (subjects < 1) throw ConfigError("synth subjects must be positive");
    if (int(class_freqs.size()) != classes) throw ConfigError("class_freqs must list one set per class");
    for (const auto& fs : class_freqs)
        for (double f : fs)
            if (f <= 0.0 || f >= sampling_rate / 2.0)
                throw ConfigError("class frequency outside (0, nyquist)");
    if (amplitude <= 0.0) throw ConfigError("synth amplitude must be positive");
}

std::vector<std::vector<double>> default_class_freqs(int classes) {
    // delta 1-4, theta 4-8, alpha 8-13, beta 13-30; alpha/beta first so the
    // two-class default is maximally separated.
    static const std::vector<std::vector<double>> bands = {
        {9.0, 11.0},   // alpha
        {18.0, 24.0},  // beta
        {5.0, 6.5},    // theta
        {1.5, 3.0},    // delta
    };
    std::vector<std::vector<double>> out;
    for (int c = 0; c < classes; ++c) {
        auto fs = bands[c % bands.size()];
        double shift = 0.3 * double(c / int(bands.size()));
        for (double& f : fs) f += shift;
        out.push_back(fs);
    }
    return out;
}

bool synth_is_test_recording(const SynthConfig& cfg, int index_within_class) {
    return index_within_class >= cfg.recordings_per_class - cfg.test_recordings_per_class;
}

static void add_pink_noise(std::vector<double>& x, double target_var, double duration_s, Rng& rng) {
    const int T = int(x.size());
    const int bins = T / 2;
    if (bins < 1 || target_var <= 0.0) return;

    // random-phase spectral synthesis with power ~ 1/f, rescaled afterwards
    // so the per-channel noise variance matches the requested SNR exactly
    std::vector<double> noise(T, 0.0);
    for (int k = 1; k <= bins; ++k) {
        double f = double(k) / duration_s;
        double amp = 1.0 / std::sqrt(f);
        double phase = rng.uniform(0.0, 2.0 * M_PI);
        double w = 2.0 * M_PI * double(k) / double(T);
        for (int t = 0; t < T; ++t) noise[t] += amp * std::cos(w * t + phase);
    }
    double mean = 0.0;
    for (double v : noise) mean += v;
    mean /= T;
    double var = 0.0;
    for (double v : noise) var += (v - mean) * (v - mean);
    var /= T;
    if (var <= 1e-30) return;
    double scale = std::sqrt(target_var / var);
    for (int t = 0; t < T; ++t) x[t] += (noise[t] - mean) * scale;
}

std::vector<Recording> synth_generate(const SynthConfig& cfg, uint64_t seed) {
    cfg.validate();

    std::vector<Recording> out;
    const double duration_s = double(cfg.duration) / cfg.sampling_rate;
    int global = 0;
    for (int c = 0; c < cfg.classes; ++c) {
        for (int r = 0; r < cfg.recordings_per_class; ++r, ++global) {
            Recording rec;
            rec.id = "synth_c" + std::to_string(c) + "_r" + std::to_string(r);
            rec.subject_id = "subj_" + std::to_string(global % cfg.subjects);
            rec.sampling_rate = cfg.sampling_rate;
            rec.label = c;
            rec.data = MatF(cfg.channels, cfg.duration);
            for (int ch = 0; ch < cfg.channels; ++ch)
                rec.channel_names.push_back("ch" + std::to_string(ch));

            for (int ch = 0; ch < cfg.channels; ++ch) {
                Rng rng(mix_seed(seed, uint64_t(c), uint64_t(r), uint64_t(ch)));
                std::vector<double> x(cfg.duration, 0.0);
                for (double f : cfg.class_freqs[c]) {
                    double phase = rng.uniform(0.0, 2.0 * M_PI);
                    double w = 2.0 * M_PI * f / cfg.sampling_rate;
                    for (int t = 0; t < cfg.duration; ++t)
                        x[t] += cfg.amplitude * std::sin(w * t + phase);
                }
                if (cfg.snr_db) {
                    double sig_var = 0.0, sig_mean = 0.0;
                    for (double v : x) sig_mean += v;
                    sig_mean /= cfg.duration;
                    for (double v : x) sig_var += (v - sig_mean) * (v - sig_mean);
                    sig_var /= cfg.duration;
                    double base = sig_var > 1e-30 ? sig_var : 1.0;
                    double noise_var = base / std::pow(10.0, *cfg.snr_db / 10.0);
                    add_pink_noise(x, noise_var, duration_s, rng);
                }
                for (int t = 0; t < cfg.duration; ++t) rec.data(ch, t) = float(x[t]);
            }
            out.push_back(std::move(rec));
        }
    }
    return out;
}

}  // namespace eegdm
