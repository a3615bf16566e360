#ifndef EEGDM_ENCODER_HPP
#define EEGDM_ENCODER_HPP

#include <functional>

#include "eegdm/augment.hpp"
#include "eegdm/nn.hpp"

namespace eegdm {

struct EncoderConfig {
    int patch_window = 64;  // omega
    int embed_dim = 64;     // d
    int depth = 4;
    int heads = 4;
    double mlp_ratio = 4.0;
    int max_tokens = 512;
    int conv_kernel = 15;

    void validate() const;
    int mlp_dim() const { return int(mlp_ratio * embed_dim); }
};

struct EncoderBlockParams {
    Mat ln1_g, ln1_b;
    Mat w_qkv, b_qkv, w_out, b_out;
    Mat ln2_g, ln2_b;
    Mat w_fc1, b_fc1, w_fc2, b_fc2;
};

struct EncoderParams {
    EncoderConfig cfg;
    Mat conv_w, conv_b;    // temporal convolution, shared across patches
    Mat patch_w, patch_b;  // omega -> d
    Mat pos_table;         // max_tokens x d, zero-init learnable positions
    std::vector<EncoderBlockParams> blocks;
    Mat ln_f_g, ln_f_b;
};

EncoderParams init_encoder(const EncoderConfig& cfg, uint64_t seed);

void for_each_tensor(EncoderParams& p,
                     const std::function<void(const std::string&, Mat&)>& fn);

// Non-overlapping omega-windows of every channel, one patch per row in
// channel-major order; concatenating the rows back inverts it.
Mat patchify(const MatF& data, int window);

struct EncoderVars {
    ad::Var conv_w, conv_b, patch_w, patch_b, pos_table;
    struct Block {
        ad::Var ln1_g, ln1_b, w_qkv, b_qkv, w_out, b_out, ln2_g, ln2_b, w_fc1, b_fc1, w_fc2,
            b_fc2;
    };
    std::vector<Block> blocks;
    ad::Var ln_f_g, ln_f_b;
    const EncoderConfig* cfg = nullptr;
};

EncoderVars bind_encoder(ad::Graph& g, EncoderParams& p, Bindings& bindings);

// Patch embedding stage only: temporal convolution + projection + positions.
ad::Var encoder_embed(ad::Graph& g, const EncoderVars& p, const ad::Var& patches, int seq_len);

// Full trunk; patches holds n_seqs blocks of seq_len rows, the result is one
// average-pooled d-vector per sequence (n_seqs x d).
ad::Var encoder_pooled(ad::Graph& g, const EncoderVars& p, const ad::Var& patches, int seq_len);

// Inference: one representation row per sample (single view each).
Mat encode_samples(EncoderParams& params, const std::vector<const Sample*>& samples);

// Inference: per-view representations averaged into e.
Vec encode(const ViewSet& views, EncoderParams& params);

}  // namespace eegdm

#endif
