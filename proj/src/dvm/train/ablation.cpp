// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/train/ablation.hpp"

#include <algorithm>
#include <stdexcept>

namespace dvm::train {

nn::MattingConfig matting_config_from(const TrainConfig& cfg) {
    nn::MattingConfig mc =
        cfg.preset == "paper" ? nn::MattingConfig::paper(cfg.n) : nn::MattingConfig::toy(cfg.n);
    mc.fusion = cfg.fusion;
    mc.fusion_opt.tfa_on = cfg.tfa_on;
    mc.fusion_opt.tff_on = cfg.tff_on;
    return mc;
}

nn::TrimapPropConfig trimap_config_from(const TrainConfig& cfg) {
    return cfg.preset == "paper" ? nn::TrimapPropConfig::paper() : nn::TrimapPropConfig::toy();
}

namespace {

std::vector<std::string> default_variants(const std::string& study) {
    if (study == "tfa_tff") return {"basic", "+TFA", "+TFA+TFF"};
    if (study == "n_sweep") return {"n=1", "n=2", "n=3", "n=4"};
    if (study == "fusion") return {"naive", "cross-attention", "stfam"};
    if (study == "trimap_setting") return {"full-trimap", "20-frame", "40-frame", "1-trimap"};
    throw std::invalid_argument("unknown ablation study: " + study);
}

metrics::MetricReport train_and_eval(TrainConfig cfg, std::uint64_t model_seed,
                                     const Dataset& train_data, const Dataset& eval_data) {
    nn::MattingNet net(matting_config_from(cfg), model_seed);
    nn::ParamMap pm;
    net.params(pm);
    Adam opt(pm);
    train_matting(net, opt, train_data, cfg);
    return evaluate_matting(net, eval_data);
}

}  // namespace

AblationResult run_ablation(const AblationSpec& spec, const Dataset& train_data,
                            const Dataset& eval_data) {
    const std::vector<std::string> variants =
        spec.variants.empty() ? default_variants(spec.study) : spec.variants;
    AblationResult result;
    result.study = spec.study;

    if (spec.study == "tfa_tff") {
        for (const auto& v : variants) {
            TrainConfig cfg = spec.matting_cfg;
            cfg.fusion = "stfam";
            if (v == "basic") {
                cfg.tfa_on = false;
                cfg.tff_on = false;
            } else if (v == "+TFA") {
                cfg.tfa_on = true;
                cfg.tff_on = false;
            } else if (v == "+TFA+TFF") {
                cfg.tfa_on = true;
                cfg.tff_on = true;
            } else {
                throw std::invalid_argument("tfa_tff: unknown variant " + v);
            }
            result.rows.push_back({v, train_and_eval(cfg, spec.model_seed, train_data, eval_data)});
        }
        return result;
    }

    if (spec.study == "n_sweep") {
        for (const auto& v : variants) {
            if (v.rfind("n=", 0) != 0)
                throw std::invalid_argument("n_sweep: unknown variant " + v);
            TrainConfig cfg = spec.matting_cfg;
            cfg.n = std::stoi(v.substr(2));
            if (cfg.n < 0) throw std::invalid_argument("n_sweep: bad n in " + v);
            result.rows.push_back({v, train_and_eval(cfg, spec.model_seed, train_data, eval_data)});
        }
        return result;
    }

    if (spec.study == "fusion") {
        for (const auto& v : variants) {
            if (v != "naive" && v != "cross-attention" && v != "stfam")
                throw std::invalid_argument("fusion: unknown variant " + v);
            TrainConfig cfg = spec.matting_cfg;
            cfg.fusion = v;
            cfg.tfa_on = true;
            cfg.tff_on = true;
            result.rows.push_back({v, train_and_eval(cfg, spec.model_seed, train_data, eval_data)});
        }
        return result;
    }

    if (spec.study == "trimap_setting") {
        // One matting model and one propagation model shared by all settings.
        nn::MattingNet net(matting_config_from(spec.matting_cfg), spec.model_seed);
        nn::ParamMap pm;
        net.params(pm);
        Adam opt(pm);
        train_matting(net, opt, train_data, spec.matting_cfg);

        nn::TrimapPropNet prop(trimap_config_from(spec.trimap_cfg), spec.model_seed + 1);
        nn::ParamMap ppm;
        prop.params(ppm);
        Adam popt(ppm);
        train_trimap(prop, popt, train_data, spec.trimap_cfg);

        int max_t = 0;
        for (const auto& c : eval_data) max_t = std::max(max_t, c.length());

        for (const auto& v : variants) {
            std::vector<int> labeled;
            if (v == "full-trimap") {
                for (int t = 0; t < max_t; ++t) labeled.push_back(t);
            } else if (v == "1-trimap") {
                labeled = {0};
            } else if (v.size() > 6 && v.substr(v.size() - 6) == "-frame") {
                const int step = std::stoi(v.substr(0, v.size() - 6));
                if (step < 1) throw std::invalid_argument("trimap_setting: bad stride in " + v);
                for (int t = 0; t < max_t; t += step) labeled.push_back(t);
            } else {
                throw std::invalid_argument("trimap_setting: unknown variant " + v);
            }
            result.rows.push_back({v, evaluate_matting_propagated(net, prop, eval_data, labeled)});
        }
        return result;
    }

    throw std::invalid_argument("unknown ablation study: " + spec.study);
}

}  // namespace dvm::train
