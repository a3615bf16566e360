#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "eegdm/checkpoint.hpp"
#include "eegdm/config.hpp"
#include "eegdm/pretrain.hpp"
#include "test_util.hpp"

using namespace eegdm;
using json = nlohmann::json;
namespace fs = std::filesystem;

TEST_CASE("defaults parse, validate and round trip") {
    RunConfig cfg = parse_run_config(json::object());
    CHECK(cfg.pca.components == 20);
    CHECK(cfg.encoder.patch_window == cfg.pca.window);
    CHECK(cfg.dit.token_dim == cfg.encoder.embed_dim);
    CHECK(cfg.augment_views.size() == 2);  // m = 3 with the original view

    nlohmann::ordered_json echoed = run_config_to_json(cfg);
    RunConfig back = parse_run_config(echoed);
    CHECK(run_config_to_json(back) == echoed);
}

TEST_CASE("unknown keys are rejected everywhere") {
    CHECK_THROWS_AS(parse_run_config(json::parse(R"({"bogus": 1})")), ConfigError);
    CHECK_THROWS_AS(parse_run_config(json::parse(R"({"data": {"bogus": 1}})")), ConfigError);
    CHECK_THROWS_AS(parse_run_config(json::parse(R"({"pca": {"window": 64, "oops": true}})")),
                    ConfigError);
    CHECK_THROWS_AS(
        parse_run_config(json::parse(R"({"augment": {"views": [{"kind": "zero_mask", "q": 1}]}})")),
        ConfigError);
}

TEST_CASE("validation failures") {
    CHECK_THROWS_AS(parse_run_config(json::parse(R"({"pca": {"window": 60}})")), ConfigError);
    CHECK_THROWS_AS(parse_run_config(json::parse(R"({"diffusion": {"beta_start": 0.0}})")),
                    ConfigError);
    CHECK_THROWS_AS(parse_run_config(json::parse(R"({"diffusion": {"p_uncond": 1.5}})")),
                    ConfigError);
    CHECK_THROWS_AS(parse_run_config(json::parse(R"({"train": {"seeds": []}})")), ConfigError);
    CHECK_THROWS_AS(parse_run_config(json::parse(R"({"downstream": {"split": "nope"}})")),
                    ConfigError);
    CHECK_THROWS_AS(
        parse_run_config(json::parse(R"({"encoder": {"embed_dim": 30, "heads": 4}})")),
        ConfigError);
    CHECK_THROWS_AS(
        parse_run_config(json::parse(
            R"({"encoder": {"embed_dim": 32}, "dit": {"token_dim": 64}})")),
        ConfigError);
    CHECK_THROWS_AS(parse_run_config(json::parse(R"({"data": {"source": "dir"}})")), ConfigError);
    CHECK_THROWS_AS(parse_run_config(json::parse(R"({"augment": {"views": []}})")), ConfigError);
}

TEST_CASE("checkpoint round trip preserves every tensor and the manifest") {
    EncoderConfig ecfg;
    ecfg.patch_window = 16;
    ecfg.embed_dim = 16;
    ecfg.depth = 1;
    ecfg.heads = 2;
    ecfg.mlp_ratio = 2.0;
    ecfg.max_tokens = 16;
    ecfg.conv_kernel = 5;
    DiTConfig dcfg;
    dcfg.token_dim = 16;
    dcfg.depth = 1;
    dcfg.heads = 2;
    dcfg.mlp_ratio = 2.0;

    Checkpoint ckpt;
    ckpt.seed = 42;
    ckpt.step = 123;
    ckpt.config = nlohmann::ordered_json{{"note", "test"}};
    ckpt.encoder = init_encoder(ecfg, 1);
    test::randomize_params(ckpt.encoder, 2, 0.5);
    ckpt.dit = init_dit(dcfg, 6, 3);
    test::randomize_params(ckpt.dit, 4, 0.5);

    Rng rng(5);
    Mat windows = rng.normal_mat(100, 16);
    ckpt.pca = pca_fit(windows, 6, true);
    ckpt.schedule = NoiseSchedule::linear(20, 1e-4, 2e-2);
    LinearHead head;
    head.w = rng.normal_mat(3, 16);
    head.b = rng.normal_mat(1, 3);
    ckpt.head = head;

    std::string path = (fs::temp_directory_path() / "eegdm_test_ckpt.eegc").string();
    save_checkpoint(ckpt, path);
    Checkpoint back = load_checkpoint(path);

    CHECK(back.seed == 42);
    CHECK(back.step == 123);
    CHECK(back.config.at("note") == "test");

    std::vector<const Mat*> a, b;
    for_each_tensor(ckpt.encoder, [&](const std::string&, Mat& m) { a.push_back(&m); });
    for_each_tensor(back.encoder, [&](const std::string&, Mat& m) { b.push_back(&m); });
    for (size_t i = 0; i < a.size(); ++i) CHECK(*a[i] == *b[i]);
    a.clear();
    b.clear();
    for_each_tensor(ckpt.dit, [&](const std::string&, Mat& m) { a.push_back(&m); });
    for_each_tensor(back.dit, [&](const std::string&, Mat& m) { b.push_back(&m); });
    for (size_t i = 0; i < a.size(); ++i) CHECK(*a[i] == *b[i]);

    CHECK(back.pca.basis == ckpt.pca.basis);
    CHECK(back.pca.mean == ckpt.pca.mean);
    CHECK(back.pca.eigenvalues == ckpt.pca.eigenvalues);
    CHECK(back.pca.coeff_scale == ckpt.pca.coeff_scale);
    CHECK(back.schedule.t_max == 20);
    CHECK((back.schedule.beta - ckpt.schedule.beta).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(back.head.has_value());
    CHECK(back.head->w == head.w);
    CHECK(back.head->b == head.b);

    SUBCASE("truncation is detected") {
        fs::resize_file(path, fs::file_size(path) - 9);
        CHECK_THROWS_WITH_AS(load_checkpoint(path), "truncated checkpoint payload", IoError);
    }
    SUBCASE("bad magic is detected") {
        std::ofstream f(path, std::ios::binary);
        f << "NOPE";
        f.close();
        CHECK_THROWS_AS(load_checkpoint(path), IoError);
    }
    fs::remove(path);
}

TEST_CASE("dataset assembly and the pretrain smoke loop") {
    json j = json::parse(R"({
      "data": {"synth": {"channels": 1, "duration": 256, "classes": 2,
                         "recordings_per_class": 3, "test_recordings_per_class": 1,
                         "subjects": 2, "sampling_rate": 64.0},
               "sample_length": 64, "stride": 64},
      "pca": {"window": 16, "components": 4},
      "encoder": {"embed_dim": 16, "depth": 1, "heads": 2, "mlp_ratio": 2.0,
                   "max_tokens": 16, "conv_kernel": 5},
      "dit": {"depth": 1, "heads": 2, "mlp_ratio": 2.0},
      "diffusion": {"t_max": 8},
      "train": {"batch_size": 4, "steps": 6, "lr": 1e-3, "seeds": [0]},
      "output": {"dir": "unused"}
    })");
    RunConfig cfg = parse_run_config(j);
    DatasetBundle bundle = assemble_dataset(cfg);
    CHECK(bundle.channels == 1);
    CHECK(bundle.train.size() == 2 * 2 * 4);  // 2 classes x 2 train recs x 4 segments
    CHECK(bundle.test.size() == 2 * 1 * 4);

    PretrainResult result = pretrain(cfg, 0);
    CHECK(result.curve.size() == 6);
    CHECK(result.checkpoint.step == 6);
    for (const auto& p : result.curve) CHECK(std::isfinite(p.total));

    // reruns are bit identical
    PretrainResult again = pretrain(cfg, 0);
    CHECK(again.curve.back().total == result.curve.back().total);
}
