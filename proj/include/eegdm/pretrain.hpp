#ifndef EEGDM_PRETRAIN_HPP
#define EEGDM_PRETRAIN_HPP

#include "eegdm/checkpoint.hpp"
#include "eegdm/config.hpp"

namespace eegdm {

struct DatasetBundle {
    std::vector<Sample> train;  // doubles as the pre-training corpus
    std::vector<Sample> test;
    int channels = 0;
};

// Synth or directory ingestion -> resample -> z-score -> segment. The split
// is fixed by the config (synthetic corpora reserve the last
// test_recordings_per_class recordings of each class; directories provide
// train/ and test/ subdirectories).
DatasetBundle assemble_dataset(const RunConfig& cfg);

struct CurvePoint {
    int step = 0;
    double total = 0, simple = 0, vlb = 0;
};

struct PretrainResult {
    Checkpoint checkpoint;
    std::vector<CurvePoint> curve;
};

// Fits the PCA basis on the pre-training split and trains encoder + DiT
// jointly with the hybrid diffusion objective. Deterministic given seed.
PretrainResult pretrain(const RunConfig& cfg, uint64_t seed);

// pretrain + artifacts: checkpoint.eegc, training_curve.csv, manifest.json.
std::string pretrain_run(const RunConfig& cfg, uint64_t seed, const std::string& out_dir);

void write_manifest(const RunConfig& cfg, uint64_t seed, const std::string& command,
                    const std::string& out_dir);

}  // namespace eegdm

#endif
