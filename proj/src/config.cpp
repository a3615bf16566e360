#include "eegdm/config.hpp"

#include <fstream>
#include <set>

using json = nlohmann::json;

namespace eegdm {

namespace {

void check_keys(const json& j, const std::string& section, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError("section '" + section + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in section '" + section + "'");
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            j.at(key).get_to(out);
        } catch (const json::exception&) {
            throw ConfigError(std::string("invalid value for key '") + key + "'");
        }
    }
}

AugmentSpec parse_augment_spec(const json& j) {
    check_keys(j, "augment.views[]", {"kind", "mask_fraction", "scale_low", "scale_high", "seed"});
    AugmentSpec spec;
    std::string kind = "identity";
    get_to(j, "kind", kind);
    spec.kind = augment_kind_from_string(kind);
    get_to(j, "mask_fraction", spec.mask_fraction);
    get_to(j, "scale_low", spec.scale_low);
    get_to(j, "scale_high", spec.scale_high);
    get_to(j, "seed", spec.seed);
    return spec;
}

}  // namespace

RunConfig parse_run_config(const json& j) {
    check_keys(j, "<root>", {"data", "pca", "augment", "encoder", "dit", "diffusion", "train",
                             "downstream", "output"});
    RunConfig cfg;

    if (j.contains("data")) {
        const json& d = j.at("data");
        check_keys(d, "data",
                   {"source", "dir", "synth", "sample_length", "stride", "target_rate",
                    "normalize"});
        get_to(d, "source", cfg.data.source);
        get_to(d, "dir", cfg.data.dir);
        get_to(d, "sample_length", cfg.data.sample_length);
        get_to(d, "stride", cfg.data.stride);
        get_to(d, "normalize", cfg.data.normalize);
        if (d.contains("target_rate") && !d.at("target_rate").is_null()) {
            double r = 0;
            d.at("target_rate").get_to(r);
            cfg.data.target_rate = r;
        }
        if (d.contains("synth")) {
            const json& s = d.at("synth");
            check_keys(s, "data.synth",
                       {"channels", "duration", "sampling_rate", "classes",
                        "recordings_per_class", "test_recordings_per_class", "subjects",
                        "class_freqs", "amplitude", "snr_db", "seed"});
            get_to(s, "channels", cfg.data.synth.channels);
            get_to(s, "duration", cfg.data.synth.duration);
            get_to(s, "sampling_rate", cfg.data.synth.sampling_rate);
            get_to(s, "classes", cfg.data.synth.classes);
            get_to(s, "recordings_per_class", cfg.data.synth.recordings_per_class);
            get_to(s, "test_recordings_per_class", cfg.data.synth.test_recordings_per_class);
            get_to(s, "subjects", cfg.data.synth.subjects);
            get_to(s, "amplitude", cfg.data.synth.amplitude);
            get_to(s, "seed", cfg.data.synth_seed);
            if (s.contains("snr_db") && !s.at("snr_db").is_null()) {
                double v = 0;
                s.at("snr_db").get_to(v);
                cfg.data.synth.snr_db = v;
            }
            if (s.contains("class_freqs"))
                s.at("class_freqs").get_to(cfg.data.synth.class_freqs);
        }
    }
    if (cfg.data.synth.class_freqs.empty())
        cfg.data.synth.class_freqs = default_class_freqs(cfg.data.synth.classes);

    if (j.contains("pca")) {
        const json& p = j.at("pca");
        check_keys(p, "pca", {"window", "components", "scale_coeffs", "enabled"});
        get_to(p, "window", cfg.pca.window);
        get_to(p, "components", cfg.pca.components);
        get_to(p, "scale_coeffs", cfg.pca.scale_coeffs);
        get_to(p, "enabled", cfg.pca.enabled);
    }

    // default views: original + zero-mask + amplitude-scale (m = 3)
    cfg.augment_views = {AugmentSpec{AugmentKind::ZeroMask, 0.1, 0.5, 2.0, 0},
                         AugmentSpec{AugmentKind::AmplitudeScale, 0.1, 0.5, 2.0, 0}};
    if (j.contains("augment")) {
        const json& a = j.at("augment");
        check_keys(a, "augment", {"views"});
        if (a.contains("views")) {
            cfg.augment_views.clear();
            for (const auto& v : a.at("views")) cfg.augment_views.push_back(parse_augment_spec(v));
        }
    }

    cfg.encoder.patch_window = 0;  // 0 -> follow pca.window
    if (j.contains("encoder")) {
        const json& e = j.at("encoder");
        check_keys(e, "encoder",
                   {"patch_window", "embed_dim", "depth", "heads", "mlp_ratio", "max_tokens",
                    "conv_kernel"});
        get_to(e, "patch_window", cfg.encoder.patch_window);
        get_to(e, "embed_dim", cfg.encoder.embed_dim);
        get_to(e, "depth", cfg.encoder.depth);
        get_to(e, "heads", cfg.encoder.heads);
        get_to(e, "mlp_ratio", cfg.encoder.mlp_ratio);
        get_to(e, "max_tokens", cfg.encoder.max_tokens);
        get_to(e, "conv_kernel", cfg.encoder.conv_kernel);
    }
    if (cfg.encoder.patch_window == 0) cfg.encoder.patch_window = cfg.pca.window;

    cfg.dit.token_dim = 0;  // 0 -> follow encoder.embed_dim
    if (j.contains("dit")) {
        const json& d = j.at("dit");
        check_keys(d, "dit", {"token_dim", "depth", "heads", "mlp_ratio", "residual_cond"});
        get_to(d, "token_dim", cfg.dit.token_dim);
        get_to(d, "depth", cfg.dit.depth);
        get_to(d, "heads", cfg.dit.heads);
        get_to(d, "mlp_ratio", cfg.dit.mlp_ratio);
        get_to(d, "residual_cond", cfg.dit.residual_cond);
    }
    if (cfg.dit.token_dim == 0) cfg.dit.token_dim = cfg.encoder.embed_dim;

    if (j.contains("diffusion")) {
        const json& d = j.at("diffusion");
        check_keys(d, "diffusion",
                   {"t_max", "beta_start", "beta_end", "lambda_vlb", "p_uncond", "guidance_scale",
                    "sample_stride"});
        get_to(d, "t_max", cfg.diffusion.t_max);
        get_to(d, "beta_start", cfg.diffusion.beta_start);
        get_to(d, "beta_end", cfg.diffusion.beta_end);
        get_to(d, "lambda_vlb", cfg.diffusion.lambda_vlb);
        get_to(d, "p_uncond", cfg.diffusion.p_uncond);
        get_to(d, "guidance_scale", cfg.diffusion.guidance_scale);
        get_to(d, "sample_stride", cfg.diffusion.sample_stride);
    }

    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, "train", {"batch_size", "steps", "lr", "seeds"});
        get_to(t, "batch_size", cfg.train.batch_size);
        get_to(t, "steps", cfg.train.steps);
        get_to(t, "lr", cfg.train.lr);
        get_to(t, "seeds", cfg.train.seeds);
    }

    if (j.contains("downstream")) {
        const json& d = j.at("downstream");
        check_keys(d, "downstream",
                   {"task", "split", "fraction", "epochs", "lr", "batch_size", "freeze_encoder",
                    "finetune_views"});
        get_to(d, "task", cfg.downstream.task);
        get_to(d, "split", cfg.downstream.split);
        get_to(d, "fraction", cfg.downstream.fraction);
        get_to(d, "epochs", cfg.downstream.epochs);
        get_to(d, "lr", cfg.downstream.lr);
        get_to(d, "batch_size", cfg.downstream.batch_size);
        get_to(d, "freeze_encoder", cfg.downstream.freeze_encoder);
        get_to(d, "finetune_views", cfg.downstream.finetune_views);
    }

    if (j.contains("output")) {
        const json& o = j.at("output");
        check_keys(o, "output", {"dir"});
        get_to(o, "dir", cfg.output.dir);
    }

    cfg.validate();
    return cfg;
}

void RunConfig::validate() const {
    if (data.source != "synth" && data.source != "dir")
        throw ConfigError("data.source must be 'synth' or 'dir'");
    if (data.source == "dir" && data.dir.empty()) throw ConfigError("data.dir is required");
    if (data.source == "synth") data.synth.validate();
    if (data.sample_length < 1 || data.stride < 1)
        throw ConfigError("sample_length and stride must be positive");
    if (data.target_rate && *data.target_rate <= 0.0)
        throw ConfigError("target_rate must be positive");

    if (pca.window < 1 || pca.components < 1) throw ConfigError("invalid PCA geometry");
    if (pca.enabled && pca.components > pca.window)
        throw ConfigError("pca.components must not exceed pca.window");
    if (data.sample_length % pca.window != 0)
        throw ConfigError("pca.window must tile data.sample_length");

    encoder.validate();
    if (data.sample_length % encoder.patch_window != 0)
        throw ConfigError("encoder.patch_window must tile data.sample_length");
    dit.validate();
    if (dit.token_dim != encoder.embed_dim)
        throw ConfigError("dit.token_dim must equal encoder.embed_dim");

    if (diffusion.t_max < 1) throw ConfigError("t_max must be positive");
    if (!(diffusion.beta_start > 0.0 && diffusion.beta_end < 1.0 &&
          diffusion.beta_start <= diffusion.beta_end))
        throw ConfigError("require 0 < beta_start <= beta_end < 1");
    if (diffusion.lambda_vlb < 0.0) throw ConfigError("lambda_vlb must be >= 0");
    if (diffusion.p_uncond < 0.0 || diffusion.p_uncond > 1.0)
        throw ConfigError("p_uncond must be in [0, 1]");
    if (diffusion.guidance_scale < 0.0) throw ConfigError("guidance_scale must be >= 0");
    if (diffusion.sample_stride < 1) throw ConfigError("sample_stride must be >= 1");

    if (train.batch_size < 1 || train.steps < 1) throw ConfigError("invalid train section");
    if (train.lr <= 0.0) throw ConfigError("train.lr must be positive");
    if (train.seeds.empty()) throw ConfigError("train.seeds must be nonempty");

    if (downstream.split != "fixed" && downstream.split != "loso" &&
        downstream.split != "fraction")
        throw ConfigError("downstream.split must be fixed, loso, or fraction");
    if (downstream.fraction <= 0.0 || downstream.fraction > 1.0)
        throw ConfigError("downstream.fraction must be in (0, 1]");
    if (downstream.epochs < 1 || downstream.batch_size < 1 || downstream.lr <= 0.0)
        throw ConfigError("invalid downstream section");

    if (augment_views.empty()) throw ConfigError("augment.views must be nonempty");
    for (const auto& v : augment_views) {
        if (v.kind == AugmentKind::ZeroMask && (v.mask_fraction < 0.0 || v.mask_fraction >= 1.0))
            throw ConfigError("mask_fraction must be in [0, 1)");
        if (v.kind == AugmentKind::AmplitudeScale && (v.scale_low <= 0.0 || v.scale_low > v.scale_high))
            throw ConfigError("scale_range requires 0 < low <= high");
    }

    if (output.dir.empty()) throw ConfigError("output.dir must be nonempty");
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return parse_run_config(j);
}

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    auto& d = j["data"];
    d["source"] = cfg.data.source;
    d["dir"] = cfg.data.dir;
    auto& s = d["synth"];
    s["channels"] = cfg.data.synth.channels;
    s["duration"] = cfg.data.synth.duration;
    s["sampling_rate"] = cfg.data.synth.sampling_rate;
    s["classes"] = cfg.data.synth.classes;
    s["recordings_per_class"] = cfg.data.synth.recordings_per_class;
    s["test_recordings_per_class"] = cfg.data.synth.test_recordings_per_class;
    s["subjects"] = cfg.data.synth.subjects;
    s["class_freqs"] = cfg.data.synth.class_freqs;
    s["amplitude"] = cfg.data.synth.amplitude;
    if (cfg.data.synth.snr_db)
        s["snr_db"] = *cfg.data.synth.snr_db;
    else
        s["snr_db"] = nullptr;
    s["seed"] = cfg.data.synth_seed;
    d["sample_length"] = cfg.data.sample_length;
    d["stride"] = cfg.data.stride;
    if (cfg.data.target_rate)
        d["target_rate"] = *cfg.data.target_rate;
    else
        d["target_rate"] = nullptr;
    d["normalize"] = cfg.data.normalize;

    auto& p = j["pca"];
    p["window"] = cfg.pca.window;
    p["components"] = cfg.pca.components;
    p["scale_coeffs"] = cfg.pca.scale_coeffs;
    p["enabled"] = cfg.pca.enabled;

    auto& a = j["augment"];
    a["views"] = nlohmann::ordered_json::array();
    for (const auto& v : cfg.augment_views) {
        nlohmann::ordered_json vj;
        vj["kind"] = augment_kind_to_string(v.kind);
        if (v.kind == AugmentKind::ZeroMask) vj["mask_fraction"] = v.mask_fraction;
        if (v.kind == AugmentKind::AmplitudeScale) {
            vj["scale_low"] = v.scale_low;
            vj["scale_high"] = v.scale_high;
        }
        vj["seed"] = v.seed;
        a["views"].push_back(vj);
    }

    auto& e = j["encoder"];
    e["patch_window"] = cfg.encoder.patch_window;
    e["embed_dim"] = cfg.encoder.embed_dim;
    e["depth"] = cfg.encoder.depth;
    e["heads"] = cfg.encoder.heads;
    e["mlp_ratio"] = cfg.encoder.mlp_ratio;
    e["max_tokens"] = cfg.encoder.max_tokens;
    e["conv_kernel"] = cfg.encoder.conv_kernel;

    auto& t = j["dit"];
    t["token_dim"] = cfg.dit.token_dim;
    t["depth"] = cfg.dit.depth;
    t["heads"] = cfg.dit.heads;
    t["mlp_ratio"] = cfg.dit.mlp_ratio;
    t["residual_cond"] = cfg.dit.residual_cond;

    auto& f = j["diffusion"];
    f["t_max"] = cfg.diffusion.t_max;
    f["beta_start"] = cfg.diffusion.beta_start;
    f["beta_end"] = cfg.diffusion.beta_end;
    f["lambda_vlb"] = cfg.diffusion.lambda_vlb;
    f["p_uncond"] = cfg.diffusion.p_uncond;
    f["guidance_scale"] = cfg.diffusion.guidance_scale;
    f["sample_stride"] = cfg.diffusion.sample_stride;

    auto& tr = j["train"];
    tr["batch_size"] = cfg.train.batch_size;
    tr["steps"] = cfg.train.steps;
    tr["lr"] = cfg.train.lr;
    tr["seeds"] = cfg.train.seeds;

    auto& ds = j["downstream"];
    ds["task"] = cfg.downstream.task;
    ds["split"] = cfg.downstream.split;
    ds["fraction"] = cfg.downstream.fraction;
    ds["epochs"] = cfg.downstream.epochs;
    ds["lr"] = cfg.downstream.lr;
    ds["batch_size"] = cfg.downstream.batch_size;
    ds["freeze_encoder"] = cfg.downstream.freeze_encoder;
    ds["finetune_views"] = cfg.downstream.finetune_views;

    j["output"]["dir"] = cfg.output.dir;
    return j;
}

}  // namespace eegdm
