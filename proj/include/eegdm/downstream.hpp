#ifndef EEGDM_DOWNSTREAM_HPP
#define EEGDM_DOWNSTREAM_HPP

#include <map>

#include "eegdm/checkpoint.hpp"
#include "eegdm/metrics.hpp"

namespace eegdm {

struct FinetuneConfig {
    int n_classes = 0;  // 0 -> inferred from labels
    int epochs = 50;
    double lr = 1e-3;
    int batch_size = 32;
    bool freeze_encoder = false;
    std::vector<AugmentSpec> view_specs;  // nonempty -> multi-view encoding (m > 1)
    uint64_t seed = 0;
};

struct FinetuneResult {
    EncoderParams encoder;
    LinearHead head;
    std::vector<double> loss_curve;  // mean cross-entropy per epoch
    int n_classes = 0;
};

// Cross-entropy fine-tuning of the encoder plus a linear head; the frozen
// mode trains the head on cached representations and leaves the encoder
// tensors untouched.
FinetuneResult finetune(const EncoderParams& pretrained, const std::vector<Sample>& train,
                        const FinetuneConfig& cfg);

MetricsReport evaluate(EncoderParams& encoder, const LinearHead& head,
                       const std::vector<Sample>& eval_set);

struct LosoResult {
    std::vector<std::string> subjects;
    std::vector<std::vector<MetricsReport>> reports;  // [subject][seed]
    std::map<std::string, std::pair<double, double>> aggregate;  // metric -> (mean, std)
};

LosoResult run_loso(const EncoderParams& pretrained, const std::vector<Sample>& dataset,
                    const FinetuneConfig& cfg, const std::vector<uint64_t>& seeds);

// CSV with columns sample_id,label,e_1..e_d. per_class_limit > 0 enables
// class-balanced subsampling.
void export_embeddings(EncoderParams& encoder, const std::vector<Sample>& dataset,
                       const std::string& path, int per_class_limit = 0, uint64_t seed = 0);

struct GenerationQuality {
    double pearson_time = 0.0;
    double pearson_freq = 0.0;
    int skipped_channels = 0;
    int n_samples = 0;
};

// Generates one signal per eval sample conditioned on its view-set
// representation and reports mean Pearson correlation in the time domain and
// between magnitude spectra.
GenerationQuality generation_quality(EncoderParams& encoder, DiTParams& dit,
                                     const PcaBasis& basis, const NoiseSchedule& sched,
                                     const std::vector<Sample>& eval_samples,
                                     const std::vector<AugmentSpec>& view_specs,
                                     double guidance_scale, uint64_t seed, int stride = 1,
                                     std::vector<Sample>* out_generated = nullptr);

double pearson(const Vec& a, const Vec& b);

// Magnitude of the positive-frequency DFT bins (DC excluded).
Vec magnitude_spectrum(const Vec& x);

}  // namespace eegdm

#endif
