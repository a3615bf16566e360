#ifndef EEGDM_DIFFUSION_HPP
#define EEGDM_DIFFUSION_HPP

#include "eegdm/dit.hpp"
#include "eegdm/encoder.hpp"
#include "eegdm/schedule.hpp"

namespace eegdm {

struct TrainItem {
    LatentBlock z0;
    int t = 1;
    LatentBlock eps;
    ViewSet views;
    bool drop = false;  // condition dropped -> learned null embedding
};

struct TrainBatch {
    std::vector<TrainItem> items;
};

// z_t = sqrt(abar_t) z_0 + sqrt(1 - abar_t) eps
Mat forward_sample_rows(const Mat& z0, int t, const Mat& eps, const NoiseSchedule& sched);
LatentBlock forward_sample(const LatentBlock& z0, int t, const LatentBlock& eps,
                           const NoiseSchedule& sched);

// Constant tensors shared by the loss formulas, expanded to full batch shape
// (one block of seq_len rows per item).
struct BatchArrays {
    int batch = 0, seq_len = 0, k = 0;
    std::vector<int> t;
    Mat z0, zt, eps;
    Mat c_rec1, c_rec2;      // mu_theta = rec1 .* (zt - rec2 .* eps_pred)
    Mat c_mu_tilde;          // forward-posterior mean (constant wrt parameters)
    Mat c_beta_tilde;        // true posterior variance (0 at t=1)
    Mat c_log_beta_tilde;    // clipped log posterior variance
    Mat c_log_beta_diff;     // log beta - clipped log beta_tilde
    Mat c_is_t1, c_not_t1;   // masks for the t=1 likelihood term
};

BatchArrays assemble_batch_arrays(const TrainBatch& batch, const NoiseSchedule& sched);

struct LossVars {
    ad::Var total, simple, vlb;
};

// L_simple = mean((eps_pred - eps)^2); L_vlb = improved-DDPM variational term
// with a stop-gradient on eps_pred inside the posterior mean, so the
// covariance head cannot perturb the noise head.
LossVars loss_from_predictions(ad::Graph& g, const ad::Var& eps_pred, const ad::Var& v_pred,
                               const BatchArrays& arrays, double lambda_vlb);

LossVars diffusion_loss_graph(ad::Graph& g, const TrainBatch& batch, EncoderParams& encoder,
                              DiTParams& dit, const NoiseSchedule& sched, double lambda_vlb,
                              Bindings& bindings);

struct LossTerms {
    double total = 0, simple = 0, vlb = 0;
};

LossTerms diffusion_loss(const TrainBatch& batch, EncoderParams& encoder, DiTParams& dit,
                         const NoiseSchedule& sched, double lambda_vlb);

// eps_tilde = eps_null + s * (eps_cond - eps_null); s = 1 and s = 0 short
// circuit so the guidance algebra holds bit-exactly.
Mat cfg_combine(const Mat& uncond, const Mat& cond, double s);

struct LatentGeometry {
    int channels = 0, n_windows = 0, k = 0;
    int tokens() const { return channels * n_windows; }
};

// Respaced (possibly strided) sampler tables; with stride 1 they match the
// original schedule up to rounding.
struct SamplerSteps {
    std::vector<int> timesteps;  // ascending original timesteps
    Vec beta, alpha, alpha_bar, log_beta, log_beta_tilde_clipped;
};

SamplerSteps build_sampler_steps(const NoiseSchedule& sched, int stride);

struct SampleOptions {
    int count = 1;
    std::optional<Vec> cond;
    double guidance_scale = 2.0;
    uint64_t seed = 0;
    int stride = 1;
};

// Ancestral DDPM sampling with classifier-free guidance and learned
// covariance; the final step adds no noise. Deterministic given seed.
std::vector<LatentBlock> sample_latents(const SampleOptions& opt, const LatentGeometry& geom,
                                        DiTParams& dit, const NoiseSchedule& sched);

// One chain per conditioning entry; an empty optional makes that chain
// unconditional.
std::vector<LatentBlock> sample_latents_each(const std::vector<std::optional<Vec>>& conds,
                                             double guidance_scale, uint64_t seed, int stride,
                                             const LatentGeometry& geom, DiTParams& dit,
                                             const NoiseSchedule& sched);

// Inverse of the latent pipeline (coefficient unscaling + transpose basis).
std::vector<Sample> reconstruct_signal(const std::vector<LatentBlock>& latents,
                                       const PcaBasis& basis);

}  // namespace eegdm

#endif
