#include "eegdm/pretrain.hpp"

#include <filesystem>
#include <fstream>

#include "eegdm/eegb.hpp"

namespace fs = std::filesystem;

namespace eegdm {

namespace {

void ingest(Recording& rec, const RunConfig& cfg) {
    if (cfg.data.target_rate && *cfg.data.target_rate != rec.sampling_rate)
        rec = resample_linear(rec, *cfg.data.target_rate);
    if (cfg.data.normalize) zscore_channels(rec);
}

}  // namespace

DatasetBundle assemble_dataset(const RunConfig& cfg) {
    DatasetBundle bundle;
    std::vector<Recording> train_recs, test_recs;

    if (cfg.data.source == "synth") {
        std::vector<Recording> recs = synth_generate(cfg.data.synth, cfg.data.synth_seed);
        for (size_t i = 0; i < recs.size(); ++i) {
            int within = int(i) % cfg.data.synth.recordings_per_class;
            (synth_is_test_recording(cfg.data.synth, within) ? test_recs : train_recs)
                .push_back(std::move(recs[i]));
        }
    } else {
        fs::path root(cfg.data.dir);
        if (!fs::is_directory(root / "train"))
            throw ConfigError("data.dir must contain a train/ directory");
        train_recs = load_dataset((root / "train").string());
        if (fs::is_directory(root / "test")) test_recs = load_dataset((root / "test").string());
    }
    if (train_recs.empty()) throw ConfigError("no training recordings");

    for (auto& rec : train_recs) {
        ingest(rec, cfg);
        auto segs = segment(rec, cfg.data.sample_length, cfg.data.stride);
        bundle.train.insert(bundle.train.end(), segs.begin(), segs.end());
    }
    for (auto& rec : test_recs) {
        ingest(rec, cfg);
        auto segs = segment(rec, cfg.data.sample_length, cfg.data.stride);
        bundle.test.insert(bundle.test.end(), segs.begin(), segs.end());
    }

    bundle.channels = bundle.train.front().channels();
    for (const auto& s : bundle.train)
        if (s.channels() != bundle.channels) throw ConfigError("inconsistent channel counts");
    for (const auto& s : bundle.test)
        if (s.channels() != bundle.channels) throw ConfigError("inconsistent channel counts");
    return bundle;
}

PretrainResult pretrain(const RunConfig& cfg, uint64_t seed) {
    DatasetBundle bundle = assemble_dataset(cfg);
    const int C = bundle.channels;
    const int enc_tokens = C * (cfg.data.sample_length / cfg.encoder.patch_window);
    if (enc_tokens > cfg.encoder.max_tokens)
        throw ConfigError("geometry exceeds max_tokens");

    Mat windows = collect_windows(bundle.train, cfg.pca.window);
    PcaBasis basis = cfg.pca.enabled
                         ? pca_fit(windows, cfg.pca.components, cfg.pca.scale_coeffs)
                         : pca_identity(windows, cfg.pca.window, cfg.pca.scale_coeffs);

    NoiseSchedule sched =
        NoiseSchedule::linear(cfg.diffusion.t_max, cfg.diffusion.beta_start, cfg.diffusion.beta_end);

    EncoderParams encoder = init_encoder(cfg.encoder, mix_seed(seed, 1));
    DiTParams dit = init_dit(cfg.dit, basis.components, mix_seed(seed, 2));

    // latents are fixed by the basis; project the corpus once
    std::vector<LatentBlock> z0_cache;
    z0_cache.reserve(bundle.train.size());
    for (const auto& s : bundle.train) z0_cache.push_back(pca_project(s, basis));

    const int N = int(bundle.train.size());
    const int S = z0_cache.front().tokens();
    const int k = z0_cache.front().k;

    Adam opt(cfg.train.lr);
    PretrainResult result;
    for (int step = 1; step <= cfg.train.steps; ++step) {
        Rng batch_rng(mix_seed(seed, 0xba7c4, uint64_t(step)));
        TrainBatch batch;
        for (int slot = 0; slot < cfg.train.batch_size; ++slot) {
            int idx = batch_rng.uniform_int(0, N - 1);
            uint64_t item_seed = mix_seed(seed, uint64_t(step), uint64_t(slot));
            Rng item_rng(item_seed);

            TrainItem item;
            item.z0 = z0_cache[idx];
            item.t = item_rng.uniform_int(1, sched.t_max);
            item.eps = item.z0;
            item.eps.data = item_rng.normal_mat(S, k);
            item.drop = item_rng.bernoulli(cfg.diffusion.p_uncond);

            std::vector<AugmentSpec> seeded;
            for (size_t v = 0; v < cfg.augment_views.size(); ++v)
                seeded.push_back(
                    cfg.augment_views[v].with_seed(mix_seed(item_seed, 0xa06, uint64_t(v))));
            item.views = make_views(bundle.train[idx], seeded);
            batch.items.push_back(std::move(item));
        }

        ad::Graph g;
        Bindings bindings;
        LossVars loss =
            diffusion_loss_graph(g, batch, encoder, dit, sched, cfg.diffusion.lambda_vlb, bindings);
        g.backward(loss.total);
        opt.step(bindings.grads());

        result.curve.push_back(
            {step, loss.total->val(0, 0), loss.simple->val(0, 0), loss.vlb->val(0, 0)});
    }

    Checkpoint& ckpt = result.checkpoint;
    ckpt.seed = seed;
    ckpt.step = cfg.train.steps;
    ckpt.config = run_config_to_json(cfg);
    ckpt.encoder = std::move(encoder);
    ckpt.dit = std::move(dit);
    ckpt.pca = std::move(basis);
    ckpt.schedule = std::move(sched);
    return result;
}

void write_manifest(const RunConfig& cfg, uint64_t seed, const std::string& command,
                    const std::string& out_dir) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["seed"] = seed;
    j["version"] = "0.1.0";
    j["config"] = run_config_to_json(cfg);
    std::ofstream out(fs::path(out_dir) / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + out_dir);
    out << j.dump(2) << "\n";
}

std::string pretrain_run(const RunConfig& cfg, uint64_t seed, const std::string& out_dir) {
    fs::create_directories(out_dir);
    PretrainResult result = pretrain(cfg, seed);

    std::ofstream curve(fs::path(out_dir) / "training_curve.csv");
    if (!curve) throw IoError("cannot write training curve in " + out_dir);
    curve << "step,total,simple,vlb\n";
    curve.precision(17);
    for (const auto& p : result.curve)
        curve << p.step << "," << p.total << "," << p.simple << "," << p.vlb << "\n";

    write_manifest(cfg, seed, "pretrain", out_dir);
    std::string path = (fs::path(out_dir) / "checkpoint.eegc").string();
    save_checkpoint(result.checkpoint, path);
    return path;
}

}  // namespace eegdm
