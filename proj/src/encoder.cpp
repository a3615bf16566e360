#include "eegdm/encoder.hpp"

namespace eegdm {

void EncoderConfig::validate() const {
    if (patch_window < 1) throw ConfigError("patch_window must be positive");
    if (embed_dim < 2 || embed_dim % 2 != 0) throw ConfigError("embed_dim must be even and >= 2");
    if (heads < 1 || embed_dim % heads != 0)
        throw ConfigError("embed_dim must be divisible by heads");
    if (depth < 1) throw ConfigError("depth must be positive");
    if (mlp_ratio <= 0.0) throw ConfigError("mlp_ratio must be positive");
    if (max_tokens < 1) throw ConfigError("max_tokens must be positive");
    if (conv_kernel < 1 || conv_kernel % 2 == 0) throw ConfigError("conv_kernel must be odd");
}

EncoderParams init_encoder(const EncoderConfig& cfg, uint64_t seed) {
    cfg.validate();
    Rng rng(mix_seed(seed, 0xe20c0de));
    EncoderParams p;
    p.cfg = cfg;
    const int d = cfg.embed_dim;

    // temporal filter starts near identity so the projection sees the raw patch
    p.conv_w = Mat::Zero(1, cfg.conv_kernel);
    p.conv_w(0, cfg.conv_kernel / 2) = 1.0;
    p.conv_w += rng.normal_mat(1, cfg.conv_kernel, 0.02);
    p.conv_b = Mat::Zero(1, 1);
    p.patch_w = xavier_uniform(cfg.patch_window, d, rng);
    p.patch_b = Mat::Zero(1, d);
    p.pos_table = Mat::Zero(cfg.max_tokens, d);

    for (int i = 0; i < cfg.depth; ++i) {
        EncoderBlockParams b;
        b.ln1_g = Mat::Ones(1, d);
        b.ln1_b = Mat::Zero(1, d);
        b.w_qkv = xavier_uniform(d, 3 * d, rng);
        b.b_qkv = Mat::Zero(1, 3 * d);
        b.w_out = xavier_uniform(d, d, rng);
        b.b_out = Mat::Zero(1, d);
        b.ln2_g = Mat::Ones(1, d);
        b.ln2_b = Mat::Zero(1, d);
        b.w_fc1 = xavier_uniform(d, cfg.mlp_dim(), rng);
        b.b_fc1 = Mat::Zero(1, cfg.mlp_dim());
        b.w_fc2 = xavier_uniform(cfg.mlp_dim(), d, rng);
        b.b_fc2 = Mat::Zero(1, d);
        p.blocks.push_back(std::move(b));
    }
    p.ln_f_g = Mat::Ones(1, d);
    p.ln_f_b = Mat::Zero(1, d);
    return p;
}

void for_each_tensor(EncoderParams& p,
                     const std::function<void(const std::string&, Mat&)>& fn) {
    fn("encoder.conv_w", p.conv_w);
    fn("encoder.conv_b", p.conv_b);
    fn("encoder.patch_w", p.patch_w);
    fn("encoder.patch_b", p.patch_b);
    fn("encoder.pos_table", p.pos_table);
    for (size_t i = 0; i < p.blocks.size(); ++i) {
        auto& b = p.blocks[i];
        std::string pre = "encoder.block" + std::to_string(i) + ".";
        fn(pre + "ln1_g", b.ln1_g);
        fn(pre + "ln1_b", b.ln1_b);
        fn(pre + "w_qkv", b.w_qkv);
        fn(pre + "b_qkv", b.b_qkv);
        fn(pre + "w_out", b.w_out);
        fn(pre + "b_out", b.b_out);
        fn(pre + "ln2_g", b.ln2_g);
        fn(pre + "ln2_b", b.ln2_b);
        fn(pre + "w_fc1", b.w_fc1);
        fn(pre + "b_fc1", b.b_fc1);
        fn(pre + "w_fc2", b.w_fc2);
        fn(pre + "b_fc2", b.b_fc2);
    }
    fn("encoder.ln_f_g", p.ln_f_g);
    fn("encoder.ln_f_b", p.ln_f_b);
}

Mat patchify(const MatF& data, int window) {
    const int C = int(data.rows());
    const int T = int(data.cols());
    if (T % window != 0) throw ConfigError("window does not tile sample");
    const int nw = T / window;
    Mat out(C * nw, window);
    for (int c = 0; c < C; ++c)
        for (int w = 0; w < nw; ++w)
            for (int j = 0; j < window; ++j) out(c * nw + w, j) = data(c, w * window + j);
    return out;
}

EncoderVars bind_encoder(ad::Graph& g, EncoderParams& p, Bindings& bindings) {
    EncoderVars v;
    v.cfg = &p.cfg;
    v.conv_w = bindings.bind(g, p.conv_w);
    v.conv_b = bindings.bind(g, p.conv_b);
    v.patch_w = bindings.bind(g, p.patch_w);
    v.patch_b = bindings.bind(g, p.patch_b);
    v.pos_table = bindings.bind(g, p.pos_table);
    for (auto& b : p.blocks) {
        EncoderVars::Block bv;
        bv.ln1_g = bindings.bind(g, b.ln1_g);
        bv.ln1_b = bindings.bind(g, b.ln1_b);
        bv.w_qkv = bindings.bind(g, b.w_qkv);
        bv.b_qkv = bindings.bind(g, b.b_qkv);
        bv.w_out = bindings.bind(g, b.w_out);
        bv.b_out = bindings.bind(g, b.b_out);
        bv.ln2_g = bindings.bind(g, b.ln2_g);
        bv.ln2_b = bindings.bind(g, b.ln2_b);
        bv.w_fc1 = bindings.bind(g, b.w_fc1);
        bv.b_fc1 = bindings.bind(g, b.b_fc1);
        bv.w_fc2 = bindings.bind(g, b.w_fc2);
        bv.b_fc2 = bindings.bind(g, b.b_fc2);
        v.blocks.push_back(std::move(bv));
    }
    v.ln_f_g = bindings.bind(g, p.ln_f_g);
    v.ln_f_b = bindings.bind(g, p.ln_f_b);
    return v;
}

ad::Var encoder_embed(ad::Graph& g, const EncoderVars& p, const ad::Var& patches, int seq_len) {
    if (seq_len > p.cfg->max_tokens) throw ConfigError("geometry exceeds max_tokens");
    if (patches->val.rows() % seq_len != 0) throw ConfigError("patch rows not divisible by seq_len");

    ad::Var h = ad::conv1d_same(g, patches, p.conv_w, p.conv_b);
    h = ad::gelu(g, h);
    h = ad::linear(g, h, p.patch_w, p.patch_b);

    std::vector<int> idx(h->val.rows());
    for (size_t r = 0; r < idx.size(); ++r) idx[r] = int(r % size_t(seq_len));
    return ad::add_table_rows(g, h, p.pos_table, idx);
}

ad::Var encoder_pooled(ad::Graph& g, const EncoderVars& p, const ad::Var& patches, int seq_len) {
    ad::Var x = encoder_embed(g, p, patches, seq_len);
    const int heads = p.cfg->heads;
    for (const auto& b : p.blocks) {
        ad::Var h = ad::layernorm_affine(g, x, b.ln1_g, b.ln1_b);
        ad::Var a = ad::mha(g, h, b.w_qkv, b.b_qkv, b.w_out, b.b_out, heads, seq_len);
        x = ad::add(g, x, a);
        ad::Var h2 = ad::layernorm_affine(g, x, b.ln2_g, b.ln2_b);
        ad::Var m = ad::linear(g, h2, b.w_fc1, b.b_fc1);
        m = ad::gelu(g, m);
        m = ad::linear(g, m, b.w_fc2, b.b_fc2);
        x = ad::add(g, x, m);
    }
    x = ad::layernorm_affine(g, x, p.ln_f_g, p.ln_f_b);
    return ad::mean_pool_rows(g, x, seq_len);
}

Mat encode_samples(EncoderParams& params, const std::vector<const Sample*>& samples) {
    if (samples.empty()) throw ConfigError("empty sample list");
    const int C = samples[0]->channels();
    const int T = samples[0]->length();
    const int window = params.cfg.patch_window;
    if (T % window != 0) throw ConfigError("window does not tile sample");
    const int seq_len = C * (T / window);

    Mat patches(seq_len * int(samples.size()), window);
    for (size_t i = 0; i < samples.size(); ++i) {
        if (samples[i]->channels() != C || samples[i]->length() != T)
            throw ConfigError("samples must share geometry");
        patches.middleRows(int(i) * seq_len, seq_len) = patchify(samples[i]->data, window);
    }

    ad::Graph g(false);
    Bindings bindings;
    EncoderVars vars = bind_encoder(g, params, bindings);
    ad::Var pooled = encoder_pooled(g, vars, g.constant(std::move(patches)), seq_len);
    return pooled->val;
}

Vec encode(const ViewSet& views, EncoderParams& params) {
    if (views.views.empty()) throw ConfigError("empty view set");
    std::vector<const Sample*> ptrs;
    for (const auto& v : views.views) ptrs.push_back(&v);
    Mat per_view = encode_samples(params, ptrs);
    return per_view.colwise().mean().transpose();
}

}  // namespace eegdm
