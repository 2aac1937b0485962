// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "dvm/train/ablation.hpp"
#include "dvm/train/checkpoint.hpp"
#include "support/testutil.hpp"

using namespace dvm;
namespace fs = std::filesystem;

namespace {

train::Dataset tiny_dataset(std::uint64_t seed, int clips = 2, int frames = 7, int size = 48) {
    train::Dataset data;
    for (int i = 0; i < clips; ++i) {
        Rng rng = Rng(seed).child(static_cast<std::uint64_t>(i));
        comp::ForegroundConfig fc;
        fc.canvas = size / 2 + 6;
        Tensor color, alpha;
        comp::make_procedural_foreground(rng, fc, &color, &alpha);
        comp::BackgroundConfig bc;
        comp::Clip bg = comp::make_procedural_background(rng, bc, frames, size, size);
        comp::TrackConfig tc;
        tc.trans_range = size * 0.12f;
        tc.cap_trans = size * 0.02f;
        comp::CompositeSample s =
            comp::synthesize(color, alpha, bg, comp::generate_track(frames, tc, rng.u64()));
        std::vector<comp::Trimap> tms;
        for (const auto& a : s.alpha.frames) tms.push_back(comp::make_trimap(a, 2, 2));
        data.push_back(train::clip_from_sample(s, std::move(tms)));
    }
    return data;
}

train::TrainConfig tiny_matting_cfg() {
    train::TrainConfig cfg = train::TrainConfig::toy_matting();
    cfg.epochs = 1;
    cfg.steps_per_epoch = 3;
    cfg.batch_size = 1;
    cfg.n = 1;
    cfg.crop_size = 32;
    cfg.crop_scales = {32, 48};
    cfg.trimap_kernel_min = 2;
    cfg.trimap_kernel_max = 2;
    cfg.trimap_iter_min = 1;
    cfg.trimap_iter_max = 2;
    cfg.seed = 9;
    return cfg;
}

train::TrainConfig tiny_trimap_cfg() {
    train::TrainConfig cfg = train::TrainConfig::toy_trimap();
    cfg.epochs = 1;
    cfg.steps_per_epoch = 3;
    cfg.batch_size = 1;
    cfg.crop_size = 32;
    cfg.seed = 9;
    return cfg;
}

}  // namespace

TEST_CASE("config parsing, defaults, and fail-fast validation") {
    train::KvConfig kv = train::KvConfig::parse_string(
        "# comment\n"
        "train.net = matting\n"
        "train.epochs = 12\n"
        "model.n = 2\n"
        "crop.scales = 64, 96\n");
    train::TrainConfig cfg = train::TrainConfig::from_kv(kv);
    CHECK(cfg.epochs == 12);
    CHECK(cfg.n == 2);
    CHECK(cfg.crop_scales == std::vector<int>{64, 96});

    CHECK_THROWS_AS(train::TrainConfig::from_kv(
                        train::KvConfig::parse_string("train.nett = matting\n")),
                    std::invalid_argument);
    CHECK_THROWS_AS(train::TrainConfig::from_kv(
                        train::KvConfig::parse_string("train.epochs = 0\n")),
                    std::invalid_argument);
    CHECK_THROWS_AS(train::TrainConfig::from_kv(
                        train::KvConfig::parse_string("train.lr_initial = -1\n")),
                    std::invalid_argument);
    CHECK_THROWS_AS(train::TrainConfig::from_kv(
                        train::KvConfig::parse_string("trimap.kernel_min = 7\n")),
                    std::invalid_argument);
    CHECK_THROWS_AS(train::KvConfig::parse_string("no equals sign here\n"),
                    std::invalid_argument);

    // to_text -> from_kv round-trip preserves fields
    train::TrainConfig again = train::TrainConfig::from_kv(
        train::KvConfig::parse_string(cfg.to_text()));
    CHECK(again.epochs == cfg.epochs);
    CHECK(again.n == cfg.n);
    CHECK(again.crop_scales == cfg.crop_scales);
}

TEST_CASE("learning-rate schedules match the stated anchors") {
    train::TrainConfig trimap = train::TrainConfig::paper_trimap();
    CHECK(train::lr_at_epoch(trimap, 0) == doctest::Approx(0.001));
    CHECK(train::lr_at_epoch(trimap, trimap.epochs - 1) == doctest::Approx(0.0001));
    // linearity in between
    const double mid = train::lr_at_epoch(trimap, 37);
    CHECK(mid < 0.001);
    CHECK(mid > 0.0001);

    train::TrainConfig matting = train::TrainConfig::paper_matting();
    CHECK(train::lr_at_epoch(matting, 0) == doctest::Approx(5e-5));
    CHECK(train::lr_at_epoch(matting, 19) == doctest::Approx(5e-5));
    CHECK(train::lr_at_epoch(matting, 20) == doctest::Approx(5e-5 * 0.98));
    CHECK(train::lr_at_epoch(matting, 21) == doctest::Approx(5e-5 * 0.98 * 0.98));
}

TEST_CASE("adam minimizes a quadratic") {
    nn::ParamMap pm;
    auto p = make_leaf(Tensor::full({4}, 3.0f), true);
    pm.add("p", p);
    train::Adam opt(pm);
    for (int step = 0; step < 400; ++step) {
        backward(ops::reduce_sum(ops::square(p)));
        opt.step(0.05);
    }
    for (int i = 0; i < 4; ++i) CHECK(std::abs(p->val[i]) < 0.05f);
}

TEST_CASE("matting training is deterministic for a fixed seed") {
    train::Dataset data = tiny_dataset(31);
    train::TrainConfig cfg = tiny_matting_cfg();

    auto run = [&]() {
        nn::MattingNet net(train::matting_config_from(cfg), cfg.seed);
        nn::ParamMap pm;
        net.params(pm);
        train::Adam opt(pm);
        return train::train_matting(net, opt, data, cfg).final_loss;
    };
    const double a = run();
    const double b = run();
    CHECK(a == b);
    CHECK(std::isfinite(a));
}

TEST_CASE("trimap training runs and is deterministic") {
    train::Dataset data = tiny_dataset(37);
    train::TrainConfig cfg = tiny_trimap_cfg();
    auto run = [&]() {
        nn::TrimapPropNet net(train::trimap_config_from(cfg), cfg.seed);
        nn::ParamMap pm;
        net.params(pm);
        train::Adam opt(pm);
        return train::train_trimap(net, opt, data, cfg).final_loss;
    };
    const double a = run();
    CHECK(a == run());
    CHECK(std::isfinite(a));
}

TEST_CASE("checkpoint round-trip preserves predictions bitwise") {
    train::Dataset data = tiny_dataset(41);
    train::TrainConfig cfg = tiny_matting_cfg();
    nn::MattingNet net(train::matting_config_from(cfg), cfg.seed);
    nn::ParamMap pm;
    net.params(pm);
    train::Adam opt(pm);
    train::train_matting(net, opt, data, cfg);

    const std::string path = (fs::temp_directory_path() / "dvm_test_ckpt.bin").string();
    train::CheckpointMeta meta;
    meta.net = "matting";
    meta.epoch = 3;
    meta.step = 42;
    meta.config_text = cfg.to_text();
    meta.rng_state = {1, 2, 3, 4};
    train::save_checkpoint(path, pm, &opt, meta);

    comp::AlphaClip before = net.predict_clip(data[0].composite, data[0].trimaps);

    nn::MattingNet net2(train::matting_config_from(cfg), cfg.seed + 999);
    nn::ParamMap pm2;
    net2.params(pm2);
    train::Adam opt2(pm2);
    const train::CheckpointMeta loaded = train::load_checkpoint(path, pm2, &opt2);
    CHECK(loaded.epoch == 3);
    CHECK(loaded.step == 42);
    CHECK(loaded.net == "matting");
    CHECK(loaded.rng_state == meta.rng_state);
    CHECK(loaded.config_text == cfg.to_text());
    CHECK(opt2.t() == opt.t());

    comp::AlphaClip after = net2.predict_clip(data[0].composite, data[0].trimaps);
    REQUIRE(after.frames.size() == before.frames.size());
    for (std::size_t t = 0; t < after.frames.size(); ++t)
        for (std::size_t i = 0; i < after.frames[t].size(); ++i)
            CHECK(after.frames[t][i] == before.frames[t][i]);
    fs::remove(path);
}

TEST_CASE("checkpoint rejects mismatched registries") {
    nn::ParamMap pm;
    auto p = make_leaf(Tensor::full({3}, 1.0f), true);
    pm.add("only.param", p);
    const std::string path = (fs::temp_directory_path() / "dvm_test_ckpt2.bin").string();
    train::CheckpointMeta meta;
    meta.net = "matting";
    train::save_checkpoint(path, pm, nullptr, meta);

    nn::ParamMap other;
    auto q = make_leaf(Tensor::full({3}, 0.0f), true);
    other.add("different.name", q);
    CHECK_THROWS(train::load_checkpoint(path, other, nullptr));

    nn::ParamMap wrong_shape;
    auto r = make_leaf(Tensor::full({4}, 0.0f), true);
    wrong_shape.add("only.param", r);
    CHECK_THROWS(train::load_checkpoint(path, wrong_shape, nullptr));
    fs::remove(path);
}

TEST_CASE("evaluation over a dataset produces a coherent report") {
    train::Dataset data = tiny_dataset(43);
    train::TrainConfig cfg = tiny_matting_cfg();
    nn::MattingNet net(train::matting_config_from(cfg), cfg.seed);
    metrics::MetricReport r = train::evaluate_matting(net, data);
    CHECK(r.frames == 14);
    CHECK(r.sad > 0.0);
    CHECK(std::isfinite(r.dtssd));
    CHECK(r.has_messddt);
}

TEST_CASE("self-propagation accuracy is a fraction") {
    train::Dataset data = tiny_dataset(47, 1, 3, 48);
    nn::TrimapPropNet net(train::trimap_config_from(tiny_trimap_cfg()), 3);
    const double acc = train::self_propagation_accuracy(net, data);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
}

TEST_CASE("run_ablation validates study and variant names") {
    train::Dataset data = tiny_dataset(53, 1, 7, 48);
    train::AblationSpec spec;
    spec.study = "unknown_study";
    spec.matting_cfg = tiny_matting_cfg();
    spec.trimap_cfg = tiny_trimap_cfg();
    CHECK_THROWS_AS(train::run_ablation(spec, data, data), std::invalid_argument);
    spec.study = "tfa_tff";
    spec.variants = {"not-a-variant"};
    CHECK_THROWS_AS(train::run_ablation(spec, data, data), std::invalid_argument);
}

TEST_CASE("run_ablation tfa_tff produces one row per variant") {
    train::Dataset data = tiny_dataset(59, 1, 7, 48);
    train::AblationSpec spec;
    spec.study = "tfa_tff";
    spec.matting_cfg = tiny_matting_cfg();
    spec.matting_cfg.steps_per_epoch = 2;
    spec.trimap_cfg = tiny_trimap_cfg();
    train::AblationResult result = train::run_ablation(spec, data, data);
    REQUIRE(result.rows.size() == 3);
    CHECK(result.rows[0].variant == "basic");
    CHECK(result.rows[1].variant == "+TFA");
    CHECK(result.rows[2].variant == "+TFA+TFF");
    for (const auto& row : result.rows) {
        CHECK(std::isfinite(row.report.sad));
        CHECK(std::isfinite(row.report.mse));
        CHECK(std::isfinite(row.report.dtssd));
    }
}
