#include "eegdm/dit.hpp"

namespace eegdm {

void DiTConfig::validate() const {
    if (token_dim < 2 || token_dim % 2 != 0) throw ConfigError("token_dim must be even and >= 2");
    if (heads < 1 || token_dim % heads != 0)
        throw ConfigError("token_dim must be divisible by heads");
    if (depth < 1) throw ConfigError("depth must be positive");
    if (mlp_ratio <= 0.0) throw ConfigError("mlp_ratio must be positive");
}

DiTParams init_dit(const DiTConfig& cfg, int latent_dim, uint64_t seed) {
    cfg.validate();
    if (latent_dim < 1) throw ConfigError("latent_dim must be positive");
    Rng rng(mix_seed(seed, 0xd17));
    DiTParams p;
    p.cfg = cfg;
    p.latent_dim = latent_dim;
    const int d = cfg.token_dim;

    p.w_embed = xavier_uniform(latent_dim, d, rng);
    p.b_embed = Mat::Zero(1, d);

    for (int i = 0; i < cfg.depth; ++i) {
        DiTBlockParams b;
        b.w_mod = Mat::Zero(d, 6 * d);
        b.b_mod = Mat::Zero(1, 6 * d);
        // gamma slots start at one so the branches see LN(x) while the
        // alpha gates stay closed
        b.b_mod.block(0, 0, 1, d).setOnes();
        b.b_mod.block(0, 3 * d, 1, d).setOnes();
        b.w_qkv = xavier_uniform(d, 3 * d, rng);
        b.b_qkv = Mat::Zero(1, 3 * d);
        b.w_out = xavier_uniform(d, d, rng);
        b.b_out = Mat::Zero(1, d);
        b.w_fc1 = xavier_uniform(d, cfg.mlp_dim(), rng);
        b.b_fc1 = Mat::Zero(1, cfg.mlp_dim());
        b.w_fc2 = xavier_uniform(cfg.mlp_dim(), d, rng);
        b.b_fc2 = Mat::Zero(1, d);
        b.w_res1 = Mat::Zero(d, d);
        b.b_res1 = Mat::Zero(1, d);
        b.w_res2 = Mat::Zero(d, d);
        b.b_res2 = Mat::Zero(1, d);
        p.blocks.push_back(std::move(b));
    }

    p.w_dec_eps = Mat::Zero(d, latent_dim);
    p.b_dec_eps = Mat::Zero(1, latent_dim);
    p.w_dec_v = Mat::Zero(d, latent_dim);
    p.b_dec_v = Mat::Zero(1, latent_dim);

    p.w_t1 = xavier_uniform(d, d, rng);
    p.b_t1 = Mat::Zero(1, d);
    p.w_t2 = xavier_uniform(d, d, rng);
    p.b_t2 = Mat::Zero(1, d);
    p.null_embed = rng.normal_mat(1, d, 0.02);
    return p;
}

void for_each_tensor(DiTParams& p, const std::function<void(const std::string&, Mat&)>& fn) {
    fn("dit.w_embed", p.w_embed);
    fn("dit.b_embed", p.b_embed);
    for (size_t i = 0; i < p.blocks.size(); ++i) {
        auto& b = p.blocks[i];
        std::string pre = "dit.block" + std::to_string(i) + ".";
        fn(pre + "w_mod", b.w_mod);
        fn(pre + "b_mod", b.b_mod);
        fn(pre + "w_qkv", b.w_qkv);
        fn(pre + "b_qkv", b.b_qkv);
        fn(pre + "w_out", b.w_out);
        fn(pre + "b_out", b.b_out);
        fn(pre + "w_fc1", b.w_fc1);
        fn(pre + "b_fc1", b.b_fc1);
        fn(pre + "w_fc2", b.w_fc2);
        fn(pre + "b_fc2", b.b_fc2);
        fn(pre + "w_res1", b.w_res1);
        fn(pre + "b_res1", b.b_res1);
        fn(pre + "w_res2", b.w_res2);
        fn(pre + "b_res2", b.b_res2);
    }
    fn("dit.w_dec_eps", p.w_dec_eps);
    fn("dit.b_dec_eps", p.b_dec_eps);
    fn("dit.w_dec_v", p.w_dec_v);
    fn("dit.b_dec_v", p.b_dec_v);
    fn("dit.w_t1", p.w_t1);
    fn("dit.b_t1", p.b_t1);
    fn("dit.w_t2", p.w_t2);
    fn("dit.b_t2", p.b_t2);
    fn("dit.null_embed", p.null_embed);
}

Mat sincos_positions(int seq_len, int dim) {
    const int half = dim / 2;
    Mat out(seq_len, dim);
    for (int p = 0; p < seq_len; ++p) {
        for (int i = 0; i < half; ++i) {
            double freq = 1.0 / std::pow(10000.0, double(i) / double(half));
            out(p, i) = std::sin(p * freq);
            out(p, half + i) = std::cos(p * freq);
        }
    }
    return out;
}

Mat timestep_features(const std::vector<int>& t, int dim) {
    const int half = dim / 2;
    Mat out(int(t.size()), dim);
    for (size_t r = 0; r < t.size(); ++r) {
        for (int i = 0; i < half; ++i) {
            double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
            double arg = double(t[r]) * freq;
            out(int(r), i) = std::cos(arg);
            out(int(r), half + i) = std::sin(arg);
        }
    }
    return out;
}

DiTVars bind_dit(ad::Graph& g, DiTParams& p, Bindings& bindings) {
    DiTVars v;
    v.cfg = &p.cfg;
    v.w_embed = bindings.bind(g, p.w_embed);
    v.b_embed = bindings.bind(g, p.b_embed);
    for (auto& b : p.blocks) {
        DiTVars::Block bv;
        bv.w_mod = bindings.bind(g, b.w_mod);
        bv.b_mod = bindings.bind(g, b.b_mod);
        bv.w_qkv = bindings.bind(g, b.w_qkv);
        bv.b_qkv = bindings.bind(g, b.b_qkv);
        bv.w_out = bindings.bind(g, b.w_out);
        bv.b_out = bindings.bind(g, b.b_out);
        bv.w_fc1 = bindings.bind(g, b.w_fc1);
        bv.b_fc1 = bindings.bind(g, b.b_fc1);
        bv.w_fc2 = bindings.bind(g, b.w_fc2);
        bv.b_fc2 = bindings.bind(g, b.b_fc2);
        bv.w_res1 = bindings.bind(g, b.w_res1);
        bv.b_res1 = bindings.bind(g, b.b_res1);
        bv.w_res2 = bindings.bind(g, b.w_res2);
        bv.b_res2 = bindings.bind(g, b.b_res2);
        v.blocks.push_back(std::move(bv));
    }
    v.w_dec_eps = bindings.bind(g, p.w_dec_eps);
    v.b_dec_eps = bindings.bind(g, p.b_dec_eps);
    v.w_dec_v = bindings.bind(g, p.w_dec_v);
    v.b_dec_v = bindings.bind(g, p.b_dec_v);
    v.w_t1 = bindings.bind(g, p.w_t1);
    v.b_t1 = bindings.bind(g, p.b_t1);
    v.w_t2 = bindings.bind(g, p.w_t2);
    v.b_t2 = bindings.bind(g, p.b_t2);
    v.null_embed = bindings.bind(g, p.null_embed);
    return v;
}

ad::Var dit_condition(ad::Graph& g, const DiTVars& p, const ad::Var& e_rows,
                      const std::vector<int>& t, int t_max) {
    for (int tv : t)
        if (tv < 1 || tv > t_max) throw ConfigError("timestep out of range");
    ad::Var feats = g.constant(timestep_features(t, p.cfg->token_dim));
    ad::Var h = ad::linear(g, feats, p.w_t1, p.b_t1);
    h = ad::silu(g, h);
    ad::Var t_embed = ad::linear(g, h, p.w_t2, p.b_t2);
    return ad::add(g, e_rows, t_embed);
}

ad::Var dit_blocks(ad::Graph& g, const DiTVars& p, ad::Var x, const ad::Var& combined,
                   int seq_len) {
    const int d = p.cfg->token_dim;
    for (const auto& b : p.blocks) {
        ad::Var mod_in = ad::silu(g, combined);
        ad::Var mod = ad::linear(g, mod_in, b.w_mod, b.b_mod);
        ad::Var g1 = ad::broadcast_rows(g, ad::slice_cols(g, mod, 0, d), seq_len);
        ad::Var b1 = ad::broadcast_rows(g, ad::slice_cols(g, mod, d, d), seq_len);
        ad::Var a1 = ad::broadcast_rows(g, ad::slice_cols(g, mod, 2 * d, d), seq_len);
        ad::Var g2 = ad::broadcast_rows(g, ad::slice_cols(g, mod, 3 * d, d), seq_len);
        ad::Var b2 = ad::broadcast_rows(g, ad::slice_cols(g, mod, 4 * d, d), seq_len);
        ad::Var a2 = ad::broadcast_rows(g, ad::slice_cols(g, mod, 5 * d, d), seq_len);

        ad::Var h = ad::layernorm(g, x);
        h = ad::add(g, ad::mul(g, h, g1), b1);
        ad::Var attn = ad::mha(g, h, b.w_qkv, b.b_qkv, b.w_out, b.b_out, p.cfg->heads, seq_len);
        ad::Var branch1 = ad::mul(g, attn, a1);
        if (p.cfg->residual_cond) {
            ad::Var r1 = ad::broadcast_rows(g, ad::linear(g, combined, b.w_res1, b.b_res1), seq_len);
            x = ad::add(g, x, r1);
        }
        x = ad::add(g, x, branch1);

        ad::Var h2 = ad::layernorm(g, x);
        h2 = ad::add(g, ad::mul(g, h2, g2), b2);
        ad::Var m = ad::linear(g, h2, b.w_fc1, b.b_fc1);
        m = ad::gelu(g, m);
        m = ad::linear(g, m, b.w_fc2, b.b_fc2);
        ad::Var branch2 = ad::mul(g, m, a2);
        if (p.cfg->residual_cond) {
            ad::Var r2 = ad::broadcast_rows(g, ad::linear(g, combined, b.w_res2, b.b_res2), seq_len);
            x = ad::add(g, x, r2);
        }
        x = ad::add(g, x, branch2);
    }
    return x;
}

std::pair<ad::Var, ad::Var> dit_apply(ad::Graph& g, const DiTVars& p, const Mat& z_rows,
                                      const ad::Var& combined, int seq_len) {
    if (z_rows.rows() % seq_len != 0) throw ConfigError("latent rows not divisible by seq_len");
    const int batch = int(z_rows.rows()) / seq_len;
    if (combined->val.rows() != batch) throw ConfigError("conditioning batch mismatch");

    ad::Var tok = ad::linear(g, g.constant(z_rows), p.w_embed, p.b_embed);
    Mat pos = sincos_positions(seq_len, p.cfg->token_dim);
    Mat pos_tiled(z_rows.rows(), p.cfg->token_dim);
    for (int b = 0; b < batch; ++b) pos_tiled.middleRows(b * seq_len, seq_len) = pos;
    ad::Var x = ad::add(g, tok, g.constant(std::move(pos_tiled)));

    x = dit_blocks(g, p, x, combined, seq_len);

    ad::Var eps = ad::linear(g, x, p.w_dec_eps, p.b_dec_eps);
    ad::Var v = ad::linear(g, x, p.w_dec_v, p.b_dec_v);
    return {eps, v};
}

Conditioning condition_combine(const std::optional<Vec>& e, int t, DiTParams& params, int t_max) {
    if (t < 1 || t > t_max) throw ConfigError("timestep out of range");
    const int d = params.cfg.token_dim;
    if (e && e->size() != d) throw ConfigError("conditioning width mismatch");

    ad::Graph g(false);
    Bindings bindings;
    DiTVars vars = bind_dit(g, params, bindings);
    Mat e_row = e ? Mat(e->transpose()) : Mat(params.null_embed);
    ad::Var t_embed = dit_condition(g, vars, g.constant(Mat::Zero(1, d)), {t}, t_max);

    Conditioning out;
    out.e_used = e_row.row(0).transpose();
    out.t_embed = t_embed->val.row(0).transpose();
    out.combined = out.e_used + out.t_embed;
    return out;
}

std::pair<LatentBlock, LatentBlock> denoise(const LatentBlock& z_t, const Conditioning& cond,
                                            DiTParams& params) {
    if (!all_finite(z_t.data)) throw NumericError("non-finite latent input");
    if (z_t.k != params.latent_dim) throw ConfigError("latent width mismatch");
    if (cond.combined.size() != params.cfg.token_dim) throw ConfigError("conditioning width mismatch");

    ad::Graph g(false);
    Bindings bindings;
    DiTVars vars = bind_dit(g, params, bindings);
    // conditioning is already combined; feed it directly as the modulation input
    ad::Var combined = g.constant(Mat(cond.combined.transpose()));
    auto [eps, v] = dit_apply(g, vars, z_t.data, combined, z_t.tokens());

    LatentBlock eps_block = z_t, v_block = z_t;
    eps_block.data = eps->val;
    v_block.data = v->val;
    return {eps_block, v_block};
}

}  // namespace eegdm
