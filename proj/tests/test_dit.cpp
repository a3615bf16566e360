#include "doctest.h"
#include "eegdm/diffusion.hpp"
#include "test_util.hpp"

using namespace eegdm;

namespace {

DiTConfig small_dit() {
    DiTConfig cfg;
    cfg.token_dim = 16;
    cfg.depth = 2;
    cfg.heads = 2;
    cfg.mlp_ratio = 2.0;
    return cfg;
}

LatentBlock random_latent(int channels, int n_windows, int k, uint64_t seed) {
    Rng rng(seed);
    LatentBlock z;
    z.channels = channels;
    z.n_windows = n_windows;
    z.k = k;
    z.data = rng.normal_mat(channels * n_windows, k);
    return z;
}

}  // namespace

TEST_CASE("adaLN-Zero blocks are exactly the identity at init") {
    DiTParams params = init_dit(small_dit(), 6, 1);
    Rng rng(2);
    Mat tokens = rng.normal_mat(8, 16);   // 2 samples x 4 tokens
    Mat combined = rng.normal_mat(2, 16);

    ad::Graph g(false);
    Bindings bindings;
    DiTVars vars = bind_dit(g, params, bindings);
    ad::Var out = dit_blocks(g, vars, g.constant(tokens), g.constant(combined), 4);
    CHECK(out->val == tokens);  // bitwise
}

TEST_CASE("untrained denoiser emits exactly zero noise and covariance logits") {
    DiTParams params = init_dit(small_dit(), 6, 3);
    LatentBlock z = random_latent(2, 3, 6, 4);
    Conditioning cond = condition_combine(std::nullopt, 5, params, 10);
    auto [eps, v] = denoise(z, cond, params);
    CHECK(eps.data == Mat::Zero(6, 6));
    CHECK(v.data == Mat::Zero(6, 6));
    CHECK(eps.channels == z.channels);
    CHECK(eps.n_windows == z.n_windows);
}

TEST_CASE("denoiser output shapes equal the input latent shape") {
    DiTParams params = init_dit(small_dit(), 5, 5);
    test::randomize_params(params, 6, 0.2);
    LatentBlock z = random_latent(3, 2, 5, 7);
    Conditioning cond = condition_combine(std::nullopt, 2, params, 10);
    auto [eps, v] = denoise(z, cond, params);
    CHECK(eps.data.rows() == z.data.rows());
    CHECK(eps.data.cols() == z.data.cols());
    CHECK(v.data.rows() == z.data.rows());
    CHECK(v.data.cols() == z.data.cols());
}

TEST_CASE("condition_combine structure") {
    DiTParams params = init_dit(small_dit(), 4, 8);
    Rng rng(9);
    Vec e = rng.normal_mat(16, 1).col(0);

    Conditioning a = condition_combine(e, 3, params, 10);
    Conditioning b = condition_combine(e, 3, params, 10);
    CHECK(a.combined == b.combined);  // deterministic

    // null and conditioned combines differ exactly by (null - e)
    Conditioning n = condition_combine(std::nullopt, 3, params, 10);
    Vec lhs = n.combined - a.combined;
    Vec rhs = params.null_embed.row(0).transpose() - e;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);

    // distinct timesteps produce distinct embeddings
    Conditioning t1 = condition_combine(std::nullopt, 1, params, 1000);
    Conditioning tmax = condition_combine(std::nullopt, 1000, params, 1000);
    CHECK((t1.t_embed - tmax.t_embed).cwiseAbs().maxCoeff() > 1e-6);

    CHECK_THROWS_WITH_AS(condition_combine(e, 0, params, 10), "timestep out of range", ConfigError);
    CHECK_THROWS_WITH_AS(condition_combine(e, 11, params, 10), "timestep out of range",
                         ConfigError);
}

TEST_CASE("timestep features are non-degenerate across the range") {
    Mat f = timestep_features({1, 500, 1000}, 16);
    CHECK((f.row(0) - f.row(1)).cwiseAbs().maxCoeff() > 1e-3);
    CHECK((f.row(1) - f.row(2)).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("finite differences match backprop through the denoiser") {
    DiTConfig cfg = small_dit();
    DiTParams params = init_dit(cfg, 4, 10);
    test::randomize_params(params, 11, 0.2);
    LatentBlock z = random_latent(2, 2, 4, 12);
    Rng erng(13);
    Vec e = erng.normal_mat(16, 1).col(0);
    const std::vector<int> ts = {3};

    auto probe = [&](DiTParams& p) {
        ad::Graph g(false);
        Bindings b;
        DiTVars vars = bind_dit(g, p, b);
        ad::Var combined = dit_condition(g, vars, g.constant(Mat(e.transpose())), ts, 10);
        auto [eps, v] = dit_apply(g, vars, z.data, combined, z.tokens());
        return eps->val.squaredNorm() + v->val.squaredNorm();
    };

    ad::Graph g;
    Bindings bindings;
    DiTVars vars = bind_dit(g, params, bindings);
    ad::Var combined = dit_condition(g, vars, g.constant(Mat(e.transpose())), ts, 10);
    auto [eps, v] = dit_apply(g, vars, z.data, combined, z.tokens());
    ad::Var loss =
        ad::add(g, ad::sum_all(g, ad::square(g, eps)), ad::sum_all(g, ad::square(g, v)));
    g.backward(loss);

    // sample parameters across every tensor
    Rng pick(14);
    auto grads = bindings.grads();
    int checked = 0;
    const double h = 1e-4;
    for (int trial = 0; trial < 24; ++trial) {
        auto& [mat, grad] = grads[pick.uniform_int(0, int(grads.size()) - 1)];
        int r = pick.uniform_int(0, int(mat->rows()) - 1);
        int c = pick.uniform_int(0, int(mat->cols()) - 1);
        DiTParams plus = params, minus = params;
        // locate the same tensor by walking the registries in lockstep
        std::vector<Mat*> orig, p_plus, p_minus;
        for_each_tensor(params, [&](const std::string&, Mat& m) { orig.push_back(&m); });
        for_each_tensor(plus, [&](const std::string&, Mat& m) { p_plus.push_back(&m); });
        for_each_tensor(minus, [&](const std::string&, Mat& m) { p_minus.push_back(&m); });
        int slot = -1;
        for (size_t i = 0; i < orig.size(); ++i)
            if (orig[i] == mat) slot = int(i);
        REQUIRE(slot >= 0);
        (*p_plus[slot])(r, c) += h;
        (*p_minus[slot])(r, c) -= h;
        double fd = (probe(plus) - probe(minus)) / (2.0 * h);
        double g_bp = (*grad)(r, c);
        double denom = std::max({1e-8, std::abs(fd), std::abs(g_bp)});
        CHECK(std::abs(fd - g_bp) / denom < 1e-3);
        ++checked;
    }
    CHECK(checked >= 16);
}

TEST_CASE("geometry validation") {
    DiTParams params = init_dit(small_dit(), 4, 20);
    LatentBlock z = random_latent(2, 2, 5, 21);  // k=5 but model expects 4
    Conditioning cond = condition_combine(std::nullopt, 1, params, 10);
    CHECK_THROWS_AS(denoise(z, cond, params), ConfigError);
}

TEST_CASE("conditioning becomes informative after one training step") {
    DiTConfig cfg = small_dit();
    DiTParams dit = init_dit(cfg, 4, 22);
    EncoderConfig ecfg;
    ecfg.patch_window = 8;
    ecfg.embed_dim = 16;
    ecfg.depth = 1;
    ecfg.heads = 2;
    ecfg.mlp_ratio = 2.0;
    ecfg.max_tokens = 16;
    ecfg.conv_kernel = 3;
    EncoderParams enc = init_encoder(ecfg, 23);
    NoiseSchedule sched = NoiseSchedule::linear(10, 1e-4, 2e-2);

    TrainBatch batch;
    Rng rng(24);
    for (int i = 0; i < 4; ++i) {
        TrainItem item;
        item.z0 = random_latent(1, 2, 4, 100 + i);
        item.t = rng.uniform_int(1, 10);
        item.eps = item.z0;
        item.eps.data = rng.normal_mat(2, 4);
        item.views = ViewSet{{test::random_sample(1, 16, 200 + i)}};
        item.drop = i % 2 == 0;  // both branches get gradient signal
        batch.items.push_back(item);
    }

    Adam opt(1e-2);
    for (int step = 0; step < 2; ++step) {
        ad::Graph g;
        Bindings bindings;
        LossVars loss = diffusion_loss_graph(g, batch, enc, dit, sched, 1e-3, bindings);
        g.backward(loss.total);
        opt.step(bindings.grads());
    }

    LatentBlock z = random_latent(1, 2, 4, 25);
    Rng erng(26);
    Vec e = erng.normal_mat(16, 1).col(0);
    Conditioning with_e = condition_combine(e, 5, dit, 10);
    Conditioning with_null = condition_combine(std::nullopt, 5, dit, 10);
    auto [eps_e, v_e] = denoise(z, with_e, dit);
    auto [eps_n, v_n] = denoise(z, with_null, dit);
    CHECK((eps_e.data - eps_n.data).cwiseAbs().maxCoeff() > 0.0);
}
