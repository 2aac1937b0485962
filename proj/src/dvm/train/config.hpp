// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dvm/losses/losses.hpp"

namespace dvm::train {

// Flat `key = value` config file with dotted keys and '#' comments.
class KvConfig {
  public:
    static KvConfig parse_file(const std::string& path);
    static KvConfig parse_string(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) > 0; }
    std::string get_str(const std::string& key, const std::string& fallback) const;
    int get_int(const std::string& key, int fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    // Every present key must belong to `known`; anything else is a config
    // error (fail-fast validation).
    void require_known(const std::vector<std::string>& known) const;

    std::string dump() const;

  private:
    std::map<std::string, std::string> kv_;
};

struct TrainConfig {
    std::string net = "matting";  // "matting" | "trimap"
    std::string preset = "toy";   // "toy" | "paper"
    int epochs = 30;
    int steps_per_epoch = 50;
    int batch_size = 1;
    double lr_initial = 5e-5;
    double lr_final = 1e-4;      // trimap linear schedule endpoint
    double lr_decay = 0.98;      // matting multiplicative decay
    int lr_fixed_epochs = 20;    // matting: epochs at the initial rate
    int n = 1;
    int crop_size = 96;
    std::vector<int> crop_scales = {96, 128, 160};
    int trimap_kernel_min = 2, trimap_kernel_max = 3;
    int trimap_iter_min = 1, trimap_iter_max = 3;
    std::uint64_t seed = 0;
    std::string fusion = "stfam";
    bool tfa_on = true, tff_on = true;
    losses::LossWeights loss_weights;

    static TrainConfig toy_matting();
    static TrainConfig toy_trimap();
    static TrainConfig paper_matting();
    static TrainConfig paper_trimap();

    static TrainConfig from_kv(const KvConfig& kv);
    std::string to_text() const;
    void validate() const;

    long total_steps() const { return static_cast<long>(epochs) * steps_per_epoch; }
};

// Trimap net: linear decay from lr_initial to lr_final across epochs.
// Matting net: lr_initial for the first lr_fixed_epochs, then *= lr_decay per
// epoch.
double lr_at_epoch(const TrainConfig& cfg, int epoch);

}  // namespace dvm::train
