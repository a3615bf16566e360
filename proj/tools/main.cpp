#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "eegdm/downstream.hpp"
#include "eegdm/eegb.hpp"
#include "eegdm/pretrain.hpp"

namespace fs = std::filesystem;
using namespace eegdm;

namespace {

std::string resolve_out(const std::string& flag_out, const RunConfig& cfg) {
    if (!flag_out.empty()) return flag_out;
    const char* env = std::getenv("EEGDM_OUT");
    if (env && *env) return (fs::path(env) / cfg.output.dir).string();
    return cfg.output.dir;
}

uint64_t resolve_seed(bool seed_set, uint64_t seed_flag, const RunConfig& cfg) {
    return seed_set ? seed_flag : cfg.train.seeds.front();
}

std::vector<Sample> finetune_train_split(const RunConfig& cfg, const DatasetBundle& bundle,
                                         uint64_t seed) {
    if (cfg.downstream.split == "fraction") {
        std::vector<int> idx =
            stratified_fraction_indices(bundle.train, cfg.downstream.fraction, seed);
        std::vector<Sample> out;
        for (int i : idx) out.push_back(bundle.train[i]);
        return out;
    }
    return bundle.train;
}

FinetuneConfig make_finetune_config(const RunConfig& cfg, uint64_t seed) {
    FinetuneConfig f;
    f.epochs = cfg.downstream.epochs;
    f.lr = cfg.downstream.lr;
    f.batch_size = cfg.downstream.batch_size;
    f.freeze_encoder = cfg.downstream.freeze_encoder;
    if (cfg.downstream.finetune_views) f.view_specs = cfg.augment_views;
    f.seed = seed;
    return f;
}

int cmd_pretrain(const std::string& config_path, bool seed_set, uint64_t seed_flag,
                 const std::string& out_flag) {
    RunConfig cfg = load_run_config(config_path);
    uint64_t seed = resolve_seed(seed_set, seed_flag, cfg);
    std::string out = resolve_out(out_flag, cfg);
    std::string path = pretrain_run(cfg, seed, out);
    std::cout << "checkpoint: " << path << "\n";
    return 0;
}

int cmd_generate(const std::string& config_path, const std::string& ckpt_path, bool seed_set,
                 uint64_t seed_flag, const std::string& out_flag, bool scale_set,
                 double scale_flag, int count) {
    RunConfig cfg = load_run_config(config_path);
    uint64_t seed = resolve_seed(seed_set, seed_flag, cfg);
    double scale = scale_set ? scale_flag : cfg.diffusion.guidance_scale;
    std::string out = resolve_out(out_flag, cfg);
    fs::create_directories(out);

    Checkpoint ckpt = load_checkpoint(ckpt_path);
    DatasetBundle bundle = assemble_dataset(cfg);
    const std::vector<Sample>& pool = bundle.test.empty() ? bundle.train : bundle.test;
    std::vector<Sample> sources(pool.begin(), pool.begin() + std::min<size_t>(count, pool.size()));
    if (sources.empty()) throw ConfigError("no samples available for conditioning");

    std::vector<Sample> generated;
    GenerationQuality q = generation_quality(ckpt.encoder, ckpt.dit, ckpt.pca, ckpt.schedule,
                                             sources, cfg.augment_views, scale, seed,
                                             cfg.diffusion.sample_stride, &generated);

    double rate = cfg.data.target_rate ? *cfg.data.target_rate
                  : cfg.data.source == "synth" ? cfg.data.synth.sampling_rate
                                               : 0.0;
    for (size_t i = 0; i < generated.size(); ++i) {
        Recording rec;
        rec.id = "gen_" + std::to_string(i);
        rec.subject_id = "generated";
        rec.sampling_rate = rate > 0.0 ? rate : 1.0;
        rec.label = sources[i].label;
        rec.data = generated[i].data;
        for (int c = 0; c < rec.channels(); ++c)
            rec.channel_names.push_back("ch" + std::to_string(c));
        save_recording(rec, (fs::path(out) / (rec.id + ".eegb")).string());
    }

    nlohmann::ordered_json j;
    j["pearson_time"] = q.pearson_time;
    j["pearson_freq"] = q.pearson_freq;
    j["n_samples"] = q.n_samples;
    j["skipped_channels"] = q.skipped_channels;
    j["guidance_scale"] = scale;
    j["seed"] = seed;
    std::ofstream qf(fs::path(out) / "quality.json");
    qf << j.dump(2) << "\n";
    write_manifest(cfg, seed, "generate", out);
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_finetune(const std::string& config_path, const std::string& ckpt_path, bool seed_set,
                 uint64_t seed_flag, const std::string& out_flag) {
    RunConfig cfg = load_run_config(config_path);
    if (cfg.downstream.split == "loso")
        throw ConfigError("downstream.split is loso; use the loso command");
    uint64_t seed = resolve_seed(seed_set, seed_flag, cfg);
    std::string out = resolve_out(out_flag, cfg);
    fs::create_directories(out);

    Checkpoint ckpt = load_checkpoint(ckpt_path);
    DatasetBundle bundle = assemble_dataset(cfg);
    std::vector<Sample> train = finetune_train_split(cfg, bundle, seed);

    FinetuneResult ft = finetune(ckpt.encoder, train, make_finetune_config(cfg, seed));

    std::ofstream curve(fs::path(out) / "finetune_curve.csv");
    curve << "epoch,loss\n";
    curve.precision(17);
    for (size_t i = 0; i < ft.loss_curve.size(); ++i)
        curve << i + 1 << "," << ft.loss_curve[i] << "\n";

    Checkpoint tuned = std::move(ckpt);
    tuned.encoder = std::move(ft.encoder);
    tuned.head = std::move(ft.head);
    tuned.seed = seed;
    std::string path = (fs::path(out) / "finetuned.eegc").string();
    save_checkpoint(tuned, path);
    write_manifest(cfg, seed, "finetune", out);
    std::cout << "checkpoint: " << path << "\n";
    std::cout << "train samples: " << train.size() << ", final loss: "
              << (ft.loss_curve.empty() ? 0.0 : ft.loss_curve.back()) << "\n";
    return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& ckpt_path, bool seed_set,
                 uint64_t seed_flag, const std::string& out_flag) {
    RunConfig cfg = load_run_config(config_path);
    uint64_t seed = resolve_seed(seed_set, seed_flag, cfg);
    std::string out = resolve_out(out_flag, cfg);
    fs::create_directories(out);

    Checkpoint ckpt = load_checkpoint(ckpt_path);
    if (!ckpt.head) throw ConfigError("checkpoint has no prediction head; run finetune first");
    DatasetBundle bundle = assemble_dataset(cfg);
    if (bundle.test.empty()) throw ConfigError("dataset has no test split");

    MetricsReport rep = evaluate(ckpt.encoder, *ckpt.head, bundle.test);
    std::ofstream mf(fs::path(out) / "metrics.json");
    mf << rep.to_json_string() << "\n";
    write_manifest(cfg, seed, "evaluate", out);
    std::cout << rep.to_json_string() << "\n";
    return 0;
}

int cmd_loso(const std::string& config_path, const std::string& ckpt_path,
             const std::string& out_flag) {
    RunConfig cfg = load_run_config(config_path);
    std::string out = resolve_out(out_flag, cfg);
    fs::create_directories(out);

    Checkpoint ckpt = load_checkpoint(ckpt_path);
    DatasetBundle bundle = assemble_dataset(cfg);
    std::vector<Sample> all = bundle.train;
    all.insert(all.end(), bundle.test.begin(), bundle.test.end());

    LosoResult res =
        run_loso(ckpt.encoder, all, make_finetune_config(cfg, 0), cfg.train.seeds);

    nlohmann::ordered_json j;
    j["subjects"] = nlohmann::ordered_json::array();
    for (size_t i = 0; i < res.subjects.size(); ++i) {
        nlohmann::ordered_json sj;
        sj["subject"] = res.subjects[i];
        sj["reports"] = nlohmann::ordered_json::array();
        for (const auto& rep : res.reports[i])
            sj["reports"].push_back(nlohmann::ordered_json::parse(rep.to_json_string()));
        j["subjects"].push_back(sj);
    }
    for (const auto& [name, ms] : res.aggregate)
        j["aggregate"][name] = {{"mean", ms.first}, {"std", ms.second}};
    std::ofstream lf(fs::path(out) / "loso.json");
    lf << j.dump(2) << "\n";
    write_manifest(cfg, cfg.train.seeds.front(), "loso", out);
    std::cout << j["aggregate"].dump(2) << "\n";
    return 0;
}

int cmd_export(const std::string& config_path, const std::string& ckpt_path, bool seed_set,
               uint64_t seed_flag, const std::string& out_flag, int limit) {
    RunConfig cfg = load_run_config(config_path);
    uint64_t seed = resolve_seed(seed_set, seed_flag, cfg);
    std::string out = resolve_out(out_flag, cfg);
    fs::create_directories(out);

    Checkpoint ckpt = load_checkpoint(ckpt_path);
    DatasetBundle bundle = assemble_dataset(cfg);
    std::vector<Sample> all = bundle.train;
    all.insert(all.end(), bundle.test.begin(), bundle.test.end());

    std::string path = (fs::path(out) / "embeddings.csv").string();
    export_embeddings(ckpt.encoder, all, path, limit, seed);
    write_manifest(cfg, seed, "export-embeddings", out);
    std::cout << "embeddings: " << path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EEGDM: self-supervised EEG representation learning via latent diffusion"};
    app.require_subcommand(1);

    std::string config_path, ckpt_path, out_flag;
    uint64_t seed_flag = 0;
    double scale_flag = 0.0;
    int count = 8, limit = 0;

    auto add_common = [&](CLI::App* sub, bool needs_ckpt) {
        sub->add_option("--config", config_path, "run configuration file")->required();
        auto* o = sub->add_option("--out", out_flag, "output directory (overrides config)");
        (void)o;
        if (needs_ckpt)
            sub->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
        return sub->add_option("--seed", seed_flag, "seed (overrides train.seeds[0])");
    };

    auto* sp = app.add_subcommand("pretrain", "fit PCA and train encoder + denoiser");
    auto* sp_seed = add_common(sp, false);

    auto* sg = app.add_subcommand("generate", "sample signals and report generation quality");
    auto* sg_seed = add_common(sg, true);
    auto* sg_scale = sg->add_option("--scale", scale_flag, "guidance scale");
    sg->add_option("--count", count, "number of signals to generate");

    auto* sf = app.add_subcommand("finetune", "fine-tune the encoder with a linear head");
    auto* sf_seed = add_common(sf, true);

    auto* se = app.add_subcommand("evaluate", "evaluate a fine-tuned checkpoint");
    auto* se_seed = add_common(se, true);

    auto* sl = app.add_subcommand("loso", "leave-one-subject-out protocol");
    add_common(sl, true);

    auto* sx = app.add_subcommand("export-embeddings", "write representation CSV");
    auto* sx_seed = add_common(sx, true);
    sx->add_option("--limit", limit, "class-balanced per-class sample limit");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sp->parsed()) return cmd_pretrain(config_path, !sp_seed->empty(), seed_flag, out_flag);
        if (sg->parsed())
            return cmd_generate(config_path, ckpt_path, !sg_seed->empty(), seed_flag, out_flag,
                                !sg_scale->empty(), scale_flag, count);
        if (sf->parsed())
            return cmd_finetune(config_path, ckpt_path, !sf_seed->empty(), seed_flag, out_flag);
        if (se->parsed())
            return cmd_evaluate(config_path, ckpt_path, !se_seed->empty(), seed_flag, out_flag);
        if (sl->parsed()) return cmd_loso(config_path, ckpt_path, out_flag);
        if (sx->parsed())
            return cmd_export(config_path, ckpt_path, !sx_seed->empty(), seed_flag, out_flag,
                              limit);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
