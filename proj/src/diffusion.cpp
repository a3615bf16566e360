#include "eegdm/diffusion.hpp"

#include <algorithm>

namespace eegdm {

Mat forward_sample_rows(const Mat& z0, int t, const Mat& eps, const NoiseSchedule& sched) {
    if (t < 1 || t > sched.t_max) throw ConfigError("timestep out of range");
    if (z0.rows() != eps.rows() || z0.cols() != eps.cols())
        throw ConfigError("noise shape mismatch");
    double abar = sched.abar(t);
    return std::sqrt(abar) * z0 + std::sqrt(1.0 - abar) * eps;
}

LatentBlock forward_sample(const LatentBlock& z0, int t, const LatentBlock& eps,
                           const NoiseSchedule& sched) {
    LatentBlock out = z0;
    out.data = forward_sample_rows(z0.data, t, eps.data, sched);
    return out;
}

BatchArrays assemble_batch_arrays(const TrainBatch& batch, const NoiseSchedule& sched) {
    if (batch.items.empty()) throw ConfigError("empty batch");
    const auto& first = batch.items.front();
    BatchArrays a;
    a.batch = int(batch.items.size());
    a.seq_len = first.z0.tokens();
    a.k = first.z0.k;

    const int rows = a.batch * a.seq_len;
    a.z0 = Mat(rows, a.k);
    a.zt = Mat(rows, a.k);
    a.eps = Mat(rows, a.k);
    a.c_rec1 = Mat(rows, a.k);
    a.c_rec2 = Mat(rows, a.k);
    a.c_mu_tilde = Mat(rows, a.k);
    a.c_beta_tilde = Mat(rows, a.k);
    a.c_log_beta_tilde = Mat(rows, a.k);
    a.c_log_beta_diff = Mat(rows, a.k);
    a.c_is_t1 = Mat(rows, a.k);
    a.c_not_t1 = Mat(rows, a.k);

    for (int i = 0; i < a.batch; ++i) {
        const auto& item = batch.items[i];
        if (item.z0.tokens() != a.seq_len || item.z0.k != a.k)
            throw ConfigError("batch latent geometry mismatch");
        if (item.t < 1 || item.t > sched.t_max) throw ConfigError("timestep out of range");
        a.t.push_back(item.t);

        const int t = item.t;
        const double beta = sched.beta(t);
        const double alpha = sched.alpha(t);
        const double abar = sched.alpha_bar(t);
        const double abar_prev = sched.alpha_bar(t - 1);
        const double rec1 = 1.0 / std::sqrt(alpha);
        const double rec2 = beta / std::sqrt(1.0 - abar);
        const double pm1 = std::sqrt(abar_prev) * beta / (1.0 - abar);
        const double pm2 = std::sqrt(alpha) * (1.0 - abar_prev) / (1.0 - abar);

        Mat zt = forward_sample_rows(item.z0.data, t, item.eps.data, sched);
        const int r0 = i * a.seq_len;
        a.z0.middleRows(r0, a.seq_len) = item.z0.data;
        a.zt.middleRows(r0, a.seq_len) = zt;
        a.eps.middleRows(r0, a.seq_len) = item.eps.data;
        a.c_rec1.middleRows(r0, a.seq_len).setConstant(rec1);
        a.c_rec2.middleRows(r0, a.seq_len).setConstant(rec2);
        a.c_mu_tilde.middleRows(r0, a.seq_len) = pm1 * item.z0.data + pm2 * zt;
        a.c_beta_tilde.middleRows(r0, a.seq_len).setConstant(sched.beta_tilde(t));
        a.c_log_beta_tilde.middleRows(r0, a.seq_len).setConstant(sched.log_beta_tilde_clipped(t));
        a.c_log_beta_diff.middleRows(r0, a.seq_len)
            .setConstant(sched.log_beta(t) - sched.log_beta_tilde_clipped(t));
        a.c_is_t1.middleRows(r0, a.seq_len).setConstant(t == 1 ? 1.0 : 0.0);
        a.c_not_t1.middleRows(r0, a.seq_len).setConstant(t == 1 ? 0.0 : 1.0);
    }
    return a;
}

LossVars loss_from_predictions(ad::Graph& g, const ad::Var& eps_pred, const ad::Var& v_pred,
                               const BatchArrays& arrays, double lambda_vlb) {
    ad::Var eps_c = g.constant(arrays.eps);
    ad::Var simple = ad::mean_all(g, ad::square(g, ad::sub(g, eps_pred, eps_c)));

    // posterior mean from the frozen noise prediction
    ad::Var sg = ad::stop_grad(g, eps_pred);
    ad::Var zt_c = g.constant(arrays.zt);
    ad::Var mu_theta =
        ad::mul(g, g.constant(arrays.c_rec1),
                ad::sub(g, zt_c, ad::mul(g, g.constant(arrays.c_rec2), sg)));

    // Sigma = exp(v log beta + (1 - v) log beta_tilde), as an offset from the
    // clipped posterior log-variance
    ad::Var term =
        ad::add(g, g.constant(arrays.c_log_beta_tilde),
                ad::mul(g, v_pred, g.constant(arrays.c_log_beta_diff)));
    ad::Var inv_sigma = ad::exp(g, ad::scalar_mul(g, term, -1.0));

    // KL(q(z_{t-1} | z_t, z_0) || p_theta) per element, t > 1
    ad::Var diff2 = ad::square(g, ad::sub(g, g.constant(arrays.c_mu_tilde), mu_theta));
    ad::Var e1 = ad::sub(g, term, g.constant(arrays.c_log_beta_tilde));
    ad::Var e2 = ad::mul(g, ad::add(g, g.constant(arrays.c_beta_tilde), diff2), inv_sigma);
    ad::Var kl = ad::scalar_mul(g, ad::add(g, e1, ad::add_scalar(g, e2, -1.0)), 0.5);

    // Gaussian negative log-likelihood of z_0 at t = 1
    ad::Var diff2_0 = ad::square(g, ad::sub(g, g.constant(arrays.z0), mu_theta));
    ad::Var nll = ad::scalar_mul(
        g,
        ad::add(g, ad::add_scalar(g, term, std::log(2.0 * M_PI)), ad::mul(g, diff2_0, inv_sigma)),
        0.5);

    ad::Var vlb_el = ad::add(g, ad::mul(g, g.constant(arrays.c_is_t1), nll),
                             ad::mul(g, g.constant(arrays.c_not_t1), kl));
    ad::Var vlb = ad::mean_all(g, vlb_el);

    LossVars out;
    out.simple = simple;
    out.vlb = vlb;
    out.total = ad::add(g, simple, ad::scalar_mul(g, vlb, lambda_vlb));
    if (!std::isfinite(out.total->val(0, 0))) throw NumericError("training divergence");
    return out;
}

LossVars diffusion_loss_graph(ad::Graph& g, const TrainBatch& batch, EncoderParams& encoder,
                              DiTParams& dit, const NoiseSchedule& sched, double lambda_vlb,
                              Bindings& bindings) {
    BatchArrays arrays = assemble_batch_arrays(batch, sched);
    const int B = arrays.batch;

    const int m = batch.items.front().views.count();
    if (m < 1) throw ConfigError("empty view set");
    const int C = batch.items.front().views.views.front().channels();
    const int T = batch.items.front().views.views.front().length();
    const int window = encoder.cfg.patch_window;
    if (T % window != 0) throw ConfigError("window does not tile sample");
    const int seq_enc = C * (T / window);

    Mat patches(B * m * seq_enc, window);
    for (int i = 0; i < B; ++i) {
        const auto& views = batch.items[i].views;
        if (views.count() != m) throw ConfigError("batch view count mismatch");
        for (int v = 0; v < m; ++v) {
            const auto& s = views.views[v];
            if (s.channels() != C || s.length() != T)
                throw ConfigError("batch view geometry mismatch");
            patches.middleRows((i * m + v) * seq_enc, seq_enc) = patchify(s.data, window);
        }
    }

    EncoderVars enc = bind_encoder(g, encoder, bindings);
    DiTVars dv = bind_dit(g, dit, bindings);

    ad::Var per_view = encoder_pooled(g, enc, g.constant(std::move(patches)), seq_enc);
    ad::Var e_batch = ad::mean_pool_rows(g, per_view, m);

    std::vector<bool> drop;
    for (const auto& item : batch.items) drop.push_back(item.drop);
    ad::Var null_rows = ad::broadcast_rows(g, dv.null_embed, B);
    ad::Var e_sel = ad::select_rows(g, drop, null_rows, e_batch);

    ad::Var combined = dit_condition(g, dv, e_sel, arrays.t, sched.t_max);
    auto [eps_pred, v_pred] = dit_apply(g, dv, arrays.zt, combined, arrays.seq_len);

    return loss_from_predictions(g, eps_pred, v_pred, arrays, lambda_vlb);
}

LossTerms diffusion_loss(const TrainBatch& batch, EncoderParams& encoder, DiTParams& dit,
                         const NoiseSchedule& sched, double lambda_vlb) {
    ad::Graph g(false);
    Bindings bindings;
    LossVars vars = diffusion_loss_graph(g, batch, encoder, dit, sched, lambda_vlb, bindings);
    return {vars.total->val(0, 0), vars.simple->val(0, 0), vars.vlb->val(0, 0)};
}

Mat cfg_combine(const Mat& uncond, const Mat& cond, double s) {
    if (s < 0.0) throw ConfigError("guidance scale must be >= 0");
    if (s == 1.0) return cond;
    if (s == 0.0) return uncond;
    return uncond + s * (cond - uncond);
}

SamplerSteps build_sampler_steps(const NoiseSchedule& sched, int stride) {
    if (stride < 1) throw ConfigError("sampler stride must be >= 1");
    std::vector<int> ts;
    for (int t = sched.t_max; t >= 1; t -= stride) ts.push_back(t);
    std::reverse(ts.begin(), ts.end());

    const int n = int(ts.size());
    SamplerSteps s;
    s.timesteps = ts;
    s.beta = Vec(n);
    s.alpha = Vec(n);
    s.alpha_bar = Vec(n);
    s.log_beta = Vec(n);
    s.log_beta_tilde_clipped = Vec(n);
    double abar_prev = 1.0;
    Vec beta_tilde(n);
    for (int i = 0; i < n; ++i) {
        double abar = sched.alpha_bar(ts[i]);
        s.alpha_bar(i) = abar;
        s.beta(i) = 1.0 - abar / abar_prev;
        s.alpha(i) = 1.0 - s.beta(i);
        beta_tilde(i) = (1.0 - abar_prev) / (1.0 - abar) * s.beta(i);
        s.log_beta(i) = std::log(s.beta(i));
        abar_prev = abar;
    }
    for (int i = 0; i < n; ++i) {
        double bt = i == 0 ? (n >= 2 ? beta_tilde(1) : s.beta(0)) : beta_tilde(i);
        s.log_beta_tilde_clipped(i) = std::log(bt);
    }
    return s;
}

std::vector<LatentBlock> sample_latents_each(const std::vector<std::optional<Vec>>& conds,
                                             double guidance_scale, uint64_t seed, int stride,
                                             const LatentGeometry& geom, DiTParams& dit,
                                             const NoiseSchedule& sched) {
    const int n = int(conds.size());
    if (n < 1) throw ConfigError("sample count must be positive");
    if (guidance_scale < 0.0) throw ConfigError("guidance scale must be >= 0");
    if (geom.tokens() < 1 || geom.k < 1) throw ConfigError("invalid latent geometry");
    if (geom.k != dit.latent_dim) throw ConfigError("latent width mismatch");
    const int d = dit.cfg.token_dim;
    bool guided = false;
    for (const auto& c : conds) {
        if (c && c->size() != d) throw ConfigError("conditioning width mismatch");
        if (c) guided = true;
    }

    const int S = geom.tokens();
    SamplerSteps steps = build_sampler_steps(sched, stride);
    const int M = int(steps.timesteps.size());

    std::vector<Rng> rngs;
    std::vector<Mat> z(n);
    for (int i = 0; i < n; ++i) {
        rngs.emplace_back(mix_seed(seed, 0x5a3, uint64_t(i)));
        z[i] = rngs[i].normal_mat(S, geom.k);
    }

    const int branches = guided ? 2 : 1;

    for (int j = M - 1; j >= 0; --j) {
        const int t = steps.timesteps[j];
        const double beta = steps.beta(j);
        const double alpha = steps.alpha(j);
        const double abar = steps.alpha_bar(j);
        const double coef = beta / std::sqrt(1.0 - abar);
        const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);

        Mat z_rows(n * branches * S, geom.k);
        Mat e_rows(n * branches, d);
        for (int i = 0; i < n; ++i) {
            z_rows.middleRows(i * S, S) = z[i];
            if (conds[i])
                e_rows.row(i) = conds[i]->transpose();
            else
                e_rows.row(i) = dit.null_embed.row(0);
        }
        if (guided) {
            for (int i = 0; i < n; ++i) {
                z_rows.middleRows((n + i) * S, S) = z[i];
                e_rows.row(n + i) = dit.null_embed.row(0);
            }
        }

        ad::Graph g(false);
        Bindings bindings;
        DiTVars dv = bind_dit(g, dit, bindings);
        std::vector<int> t_vec(n * branches, t);
        ad::Var combined = dit_condition(g, dv, g.constant(std::move(e_rows)), t_vec, sched.t_max);
        auto [eps_all, v_all] = dit_apply(g, dv, z_rows, combined, S);

        for (int i = 0; i < n; ++i) {
            Mat eps_used, v_used;
            if (guided && conds[i]) {
                Mat eps_cond = eps_all->val.middleRows(i * S, S);
                Mat eps_null = eps_all->val.middleRows((n + i) * S, S);
                eps_used = cfg_combine(eps_null, eps_cond, guidance_scale);
                Mat v_cond = v_all->val.middleRows(i * S, S);
                Mat v_null = v_all->val.middleRows((n + i) * S, S);
                v_used = cfg_combine(v_null, v_cond, guidance_scale);
            } else {
                eps_used = eps_all->val.middleRows(i * S, S);
                v_used = v_all->val.middleRows(i * S, S);
            }

            Mat mu = inv_sqrt_alpha * (z[i] - coef * eps_used);
            if (j > 0) {
                Mat log_sigma = steps.log_beta_tilde_clipped(j) * Mat::Ones(S, geom.k) +
                                (steps.log_beta(j) - steps.log_beta_tilde_clipped(j)) * v_used;
                Mat noise = rngs[i].normal_mat(S, geom.k);
                z[i] = mu + (0.5 * log_sigma).array().exp().matrix().cwiseProduct(noise);
            } else {
                z[i] = mu;
            }
            if (!all_finite(z[i]))
                throw NumericError("non-finite state at timestep " + std::to_string(t));
        }
    }

    std::vector<LatentBlock> out;
    for (int i = 0; i < n; ++i) {
        LatentBlock b;
        b.channels = geom.channels;
        b.n_windows = geom.n_windows;
        b.k = geom.k;
        b.data = std::move(z[i]);
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<LatentBlock> sample_latents(const SampleOptions& opt, const LatentGeometry& geom,
                                        DiTParams& dit, const NoiseSchedule& sched) {
    if (opt.count < 1) throw ConfigError("sample count must be positive");
    std::vector<std::optional<Vec>> conds(opt.count, opt.cond);
    return sample_latents_each(conds, opt.guidance_scale, opt.seed, opt.stride, geom, dit, sched);
}

std::vector<Sample> reconstruct_signal(const std::vector<LatentBlock>& latents,
                                       const PcaBasis& basis) {
    std::vector<Sample> out;
    out.reserve(latents.size());
    for (const auto& l : latents) out.push_back(pca_reconstruct(l, basis));
    return out;
}

}  // namespace eegdm
