#include "eegdm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

using json = nlohmann::ordered_json;

namespace eegdm {

namespace {

const char kMagic[6] = {'E', 'E', 'G', 'C', '1', '\n'};

Mat vec_to_mat(const Vec& v) {
    Mat m(v.size(), 1);
    m.col(0) = v;
    return m;
}

}  // namespace

void save_checkpoint(Checkpoint& c, const std::string& path) {
    std::vector<std::pair<std::string, Mat>> tensors;
    for_each_tensor(c.encoder, [&](const std::string& n, Mat& m) { tensors.push_back({n, m}); });
    for_each_tensor(c.dit, [&](const std::string& n, Mat& m) { tensors.push_back({n, m}); });
    tensors.push_back({"pca.basis", c.pca.basis});
    tensors.push_back({"pca.mean", vec_to_mat(c.pca.mean)});
    tensors.push_back({"pca.eigenvalues", vec_to_mat(c.pca.eigenvalues)});
    tensors.push_back({"pca.coeff_scale", vec_to_mat(c.pca.coeff_scale)});
    tensors.push_back({"schedule.beta", vec_to_mat(c.schedule.beta.segment(1, c.schedule.t_max))});
    if (c.head) {
        tensors.push_back({"head.w", c.head->w});
        tensors.push_back({"head.b", c.head->b});
    }

    json manifest;
    manifest["version"] = c.version;
    manifest["seed"] = c.seed;
    manifest["step"] = c.step;
    manifest["config"] = c.config;
    manifest["encoder_cfg"] = {{"patch_window", c.encoder.cfg.patch_window},
                               {"embed_dim", c.encoder.cfg.embed_dim},
                               {"depth", c.encoder.cfg.depth},
                               {"heads", c.encoder.cfg.heads},
                               {"mlp_ratio", c.encoder.cfg.mlp_ratio},
                               {"max_tokens", c.encoder.cfg.max_tokens},
                               {"conv_kernel", c.encoder.cfg.conv_kernel}};
    manifest["dit_cfg"] = {{"token_dim", c.dit.cfg.token_dim},
                           {"depth", c.dit.cfg.depth},
                           {"heads", c.dit.cfg.heads},
                           {"mlp_ratio", c.dit.cfg.mlp_ratio},
                           {"residual_cond", c.dit.cfg.residual_cond},
                           {"latent_dim", c.dit.latent_dim}};
    manifest["pca_meta"] = {{"window", c.pca.window},
                            {"components", c.pca.components},
                            {"scale_coeffs", c.pca.scale_coeffs}};
    manifest["schedule_meta"] = {{"t_max", c.schedule.t_max}};
    manifest["has_head"] = c.head.has_value();

    json tlist = json::array();
    for (const auto& [name, m] : tensors)
        tlist.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    manifest["tensors"] = tlist;

    std::string mstr = manifest.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open file for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    uint64_t len = mstr.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(mstr.data(), std::streamsize(mstr.size()));
    for (const auto& [name, m] : tensors)
        for (int r = 0; r < m.rows(); ++r)
            for (int cidx = 0; cidx < m.cols(); ++cidx) {
                double v = m(r, cidx);
                out.write(reinterpret_cast<const char*>(&v), sizeof(double));
            }
    if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);

    char magic[6];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("malformed checkpoint header");
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!in) throw IoError("malformed checkpoint header");
    std::string mstr(len, '\0');
    in.read(mstr.data(), std::streamsize(len));
    if (!in) throw IoError("malformed checkpoint header");

    json manifest;
    try {
        manifest = json::parse(mstr);
    } catch (const json::exception&) {
        throw IoError("malformed checkpoint header");
    }

    Checkpoint c;
    try {
        c.version = manifest.at("version").get<int>();
        c.seed = manifest.at("seed").get<uint64_t>();
        c.step = manifest.at("step").get<int64_t>();
        c.config = manifest.at("config");

        const auto& ec = manifest.at("encoder_cfg");
        EncoderConfig enc_cfg;
        enc_cfg.patch_window = ec.at("patch_window").get<int>();
        enc_cfg.embed_dim = ec.at("embed_dim").get<int>();
        enc_cfg.depth = ec.at("depth").get<int>();
        enc_cfg.heads = ec.at("heads").get<int>();
        enc_cfg.mlp_ratio = ec.at("mlp_ratio").get<double>();
        enc_cfg.max_tokens = ec.at("max_tokens").get<int>();
        enc_cfg.conv_kernel = ec.at("conv_kernel").get<int>();
        c.encoder = init_encoder(enc_cfg, 0);

        const auto& dc = manifest.at("dit_cfg");
        DiTConfig dit_cfg;
        dit_cfg.token_dim = dc.at("token_dim").get<int>();
        dit_cfg.depth = dc.at("depth").get<int>();
        dit_cfg.heads = dc.at("heads").get<int>();
        dit_cfg.mlp_ratio = dc.at("mlp_ratio").get<double>();
        dit_cfg.residual_cond = dc.at("residual_cond").get<bool>();
        c.dit = init_dit(dit_cfg, dc.at("latent_dim").get<int>(), 0);

        const auto& pm = manifest.at("pca_meta");
        c.pca.window = pm.at("window").get<int>();
        c.pca.components = pm.at("components").get<int>();
        c.pca.scale_coeffs = pm.at("scale_coeffs").get<bool>();
    } catch (const json::exception&) {
        throw IoError("malformed checkpoint header");
    }

    std::map<std::string, Mat*> slots;
    for_each_tensor(c.encoder, [&](const std::string& n, Mat& m) { slots[n] = &m; });
    for_each_tensor(c.dit, [&](const std::string& n, Mat& m) { slots[n] = &m; });

    Mat pca_mean, pca_eig, pca_scale, sched_beta, head_w, head_b;
    slots["pca.basis"] = &c.pca.basis;
    slots["pca.mean"] = &pca_mean;
    slots["pca.eigenvalues"] = &pca_eig;
    slots["pca.coeff_scale"] = &pca_scale;
    slots["schedule.beta"] = &sched_beta;
    bool has_head = manifest.value("has_head", false);
    if (has_head) {
        slots["head.w"] = &head_w;
        slots["head.b"] = &head_b;
    }

    c.pca.basis = Mat();  // shape comes from the manifest

    std::map<std::string, bool> filled;
    for (const auto& [name, ptr] : slots) filled[name] = false;

    for (const auto& tj : manifest.at("tensors")) {
        std::string name = tj.at("name").get<std::string>();
        long rows = tj.at("rows").get<long>();
        long cols = tj.at("cols").get<long>();
        auto it = slots.find(name);
        if (it == slots.end()) throw IoError("unexpected tensor in checkpoint: " + name);
        filled[name] = true;

        Mat* dst = it->second;
        if (dst->size() != 0 && (dst->rows() != rows || dst->cols() != cols))
            throw IoError("checkpoint shape mismatch for " + name);
        Mat m(rows, cols);
        for (long r = 0; r < rows; ++r)
            for (long cc = 0; cc < cols; ++cc) {
                double v;
                in.read(reinterpret_cast<char*>(&v), sizeof(double));
                if (!in) throw IoError("truncated checkpoint payload");
                m(r, cc) = v;
            }
        *dst = std::move(m);
    }

    for (const auto& [name, got] : filled)
        if (!got) throw IoError("checkpoint is missing tensor: " + name);

    c.pca.mean = pca_mean.col(0);
    c.pca.eigenvalues = pca_eig.col(0);
    c.pca.coeff_scale = pca_scale.col(0);
    if (c.pca.basis.rows() != c.pca.components || c.pca.basis.cols() != c.pca.window)
        throw IoError("checkpoint shape mismatch for pca.basis");
    c.pca.validate();

    // rebuild the derived schedule tables from the stored betas
    int t_max = manifest.at("schedule_meta").at("t_max").get<int>();
    if (sched_beta.rows() != t_max) throw IoError("checkpoint shape mismatch for schedule.beta");
    NoiseSchedule s;
    s.t_max = t_max;
    s.beta = Vec::Zero(t_max + 1);
    s.alpha = Vec::Zero(t_max + 1);
    s.alpha_bar = Vec::Zero(t_max + 1);
    s.beta_tilde = Vec::Zero(t_max + 1);
    s.log_beta = Vec::Zero(t_max + 1);
    s.log_beta_tilde_clipped = Vec::Zero(t_max + 1);
    s.alpha_bar(0) = 1.0;
    for (int t = 1; t <= t_max; ++t) {
        s.beta(t) = sched_beta(t - 1, 0);
        s.alpha(t) = 1.0 - s.beta(t);
        s.alpha_bar(t) = s.alpha_bar(t - 1) * s.alpha(t);
        s.beta_tilde(t) = (1.0 - s.alpha_bar(t - 1)) / (1.0 - s.alpha_bar(t)) * s.beta(t);
        s.log_beta(t) = std::log(s.beta(t));
    }
    for (int t = 1; t <= t_max; ++t) {
        double bt = t == 1 ? (t_max >= 2 ? s.beta_tilde(2) : s.beta(1)) : s.beta_tilde(t);
        s.log_beta_tilde_clipped(t) = std::log(bt);
    }
    s.validate();
    c.schedule = s;

    if (has_head) {
        LinearHead h;
        h.w = head_w;
        h.b = head_b;
        c.head = h;
    }
    return c;
}

}  // namespace eegdm
