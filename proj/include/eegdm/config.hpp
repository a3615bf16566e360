#ifndef EEGDM_CONFIG_HPP
#define EEGDM_CONFIG_HPP

#include <string>
#include <vector>

#include "json.hpp"

#include "eegdm/augment.hpp"
#include "eegdm/dit.hpp"
#include "eegdm/encoder.hpp"
#include "eegdm/synth.hpp"

namespace eegdm {

struct DataConfig {
    std::string source = "synth";  // synth | dir
    std::string dir;
    SynthConfig synth;
    uint64_t synth_seed = 0;
    int sample_length = 256;  // t^s
    int stride = 128;         // s^t
    std::optional<double> target_rate;
    bool normalize = true;
};

struct PcaSection {
    int window = 64;  // omega
    int components = 20;
    bool scale_coeffs = true;
    bool enabled = true;
};

struct DiffusionSection {
    int t_max = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;
    double lambda_vlb = 1e-3;
    double p_uncond = 0.1;
    double guidance_scale = 2.0;
    int sample_stride = 1;
};

struct TrainSection {
    int batch_size = 16;
    int steps = 2000;
    double lr = 1e-3;
    std::vector<uint64_t> seeds = {0};
};

struct DownstreamSection {
    std::string task = "classification";
    std::string split = "fixed";  // fixed | loso | fraction
    double fraction = 1.0;
    int epochs = 50;
    double lr = 1e-3;
    int batch_size = 32;
    bool freeze_encoder = false;
    bool finetune_views = false;
};

struct OutputSection {
    std::string dir = "runs/out";
};

struct RunConfig {
    DataConfig data;
    PcaSection pca;
    std::vector<AugmentSpec> augment_views;
    EncoderConfig encoder;
    DiTConfig dit;
    DiffusionSection diffusion;
    TrainSection train;
    DownstreamSection downstream;
    OutputSection output;

    void validate() const;
};

// Strict parser: unknown keys anywhere are rejected. Defaults fill every
// field left unset, and the resolved config is what gets echoed next to the
// run outputs.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);

}  // namespace eegdm

#endif
