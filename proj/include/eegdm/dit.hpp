#ifndef EEGDM_DIT_HPP
#define EEGDM_DIT_HPP

#include <functional>
#include <optional>

#include "eegdm/nn.hpp"
#include "eegdm/pca.hpp"

namespace eegdm {

struct DiTConfig {
    int token_dim = 64;  // d, shared with the conditioning vector width
    int depth = 4;
    int heads = 4;
    double mlp_ratio = 4.0;
    bool residual_cond = true;  // project `combined` into each residual stream

    void validate() const;
    int mlp_dim() const { return int(mlp_ratio * token_dim); }
};

// adaLN-Zero block: gamma/beta/alpha for both branches come from one
// perceptron over the conditioning vector. Alpha outputs (and the residual
// injections) start at zero so the whole block is the identity at init.
struct DiTBlockParams {
    Mat w_mod, b_mod;  // d x 6d; bias layout gamma1 beta1 alpha1 gamma2 beta2 alpha2
    Mat w_qkv, b_qkv, w_out, b_out;
    Mat w_fc1, b_fc1, w_fc2, b_fc2;
    Mat w_res1, b_res1, w_res2, b_res2;
};

struct DiTParams {
    DiTConfig cfg;
    int latent_dim = 0;  // k
    Mat w_embed, b_embed;
    std::vector<DiTBlockParams> blocks;
    Mat w_dec_eps, b_dec_eps;  // zero-init linear decoders
    Mat w_dec_v, b_dec_v;
    Mat w_t1, b_t1, w_t2, b_t2;  // timestep feature perceptron
    Mat null_embed;              // 1 x d learned null conditioning
};

DiTParams init_dit(const DiTConfig& cfg, int latent_dim, uint64_t seed);

void for_each_tensor(DiTParams& p, const std::function<void(const std::string&, Mat&)>& fn);

// Fixed sine-cosine token positions, seq_len x dim.
Mat sincos_positions(int seq_len, int dim);

// Sinusoidal timestep features, one row per timestep value.
Mat timestep_features(const std::vector<int>& t, int dim);

struct Conditioning {
    Vec e_used;    // the representation actually used (null embedding when dropped)
    Vec t_embed;
    Vec combined;  // e_used + t_embed
};

// e empty -> learned null embedding. Requires 1 <= t <= t_max.
Conditioning condition_combine(const std::optional<Vec>& e, int t, DiTParams& params, int t_max);

struct DiTVars {
    ad::Var w_embed, b_embed;
    struct Block {
        ad::Var w_mod, b_mod, w_qkv, b_qkv, w_out, b_out, w_fc1, b_fc1, w_fc2, b_fc2, w_res1,
            b_res1, w_res2, b_res2;
    };
    std::vector<Block> blocks;
    ad::Var w_dec_eps, b_dec_eps, w_dec_v, b_dec_v;
    ad::Var w_t1, b_t1, w_t2, b_t2, null_embed;
    const DiTConfig* cfg = nullptr;
};

DiTVars bind_dit(ad::Graph& g, DiTParams& p, Bindings& bindings);

// combined = e_rows + perceptron(sinusoidal(t)); one row per batch item.
ad::Var dit_condition(ad::Graph& g, const DiTVars& p, const ad::Var& e_rows,
                      const std::vector<int>& t, int t_max);

// The adaLN-Zero block stack alone (token stream in, token stream out).
ad::Var dit_blocks(ad::Graph& g, const DiTVars& p, ad::Var x, const ad::Var& combined,
                   int seq_len);

// Full denoiser: embed latent tokens, add sincos positions, run the block
// stack, decode into (eps_pred, v_pred) shaped like the input.
std::pair<ad::Var, ad::Var> dit_apply(ad::Graph& g, const DiTVars& p, const Mat& z_rows,
                                      const ad::Var& combined, int seq_len);

// Inference wrapper over one latent block.
std::pair<LatentBlock, LatentBlock> denoise(const LatentBlock& z_t, const Conditioning& cond,
                                            DiTParams& params);

}  // namespace eegdm

#endif
