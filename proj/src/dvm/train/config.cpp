// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/train/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dvm::train {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

KvConfig KvConfig::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_string(ss.str());
}

KvConfig KvConfig::parse_string(const std::string& text) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected `key = value`");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) +
                                                     ": empty key");
        cfg.kv_[key] = value;
    }
    return cfg;
}

std::string KvConfig::get_str(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

int KvConfig::get_int(const std::string& key, int fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::size_t pos = 0;
    const int v = std::stoi(it->second, &pos);
    if (pos != it->second.size())
        throw std::invalid_argument("config key " + key + ": not an integer");
    return v;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size())
        throw std::invalid_argument("config key " + key + ": not a number");
    return v;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::invalid_argument("config key " + key + ": not a boolean");
}

std::vector<int> KvConfig::get_int_list(const std::string& key,
                                        const std::vector<int>& fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<int> out;
    std::istringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(std::stoi(item));
    }
    if (out.empty()) throw std::invalid_argument("config key " + key + ": empty list");
    return out;
}

void KvConfig::require_known(const std::vector<std::string>& known) const {
    for (const auto& [key, _] : kv_)
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::invalid_argument("unknown config key: " + key);
}

std::string KvConfig::dump() const {
    std::string out;
    for (const auto& [k, v] : kv_) out += k + " = " + v + "\n";
    return out;
}

TrainConfig TrainConfig::toy_matting() {
    TrainConfig c;
    c.net = "matting";
    c.preset = "toy";
    c.epochs = 30;
    c.steps_per_epoch = 50;
    c.batch_size = 1;
    c.lr_initial = 1e-3;
    c.lr_decay = 0.98;
    c.lr_fixed_epochs = 20;
    c.n = 1;
    c.crop_size = 96;
    c.crop_scales = {96, 128, 160};
    c.trimap_kernel_min = 2;
    c.trimap_kernel_max = 3;
    c.trimap_iter_min = 1;
    c.trimap_iter_max = 3;
    return c;
}

TrainConfig TrainConfig::toy_trimap() {
    TrainConfig c;
    c.net = "trimap";
    c.preset = "toy";
    c.epochs = 25;
    c.steps_per_epoch = 20;
    c.batch_size = 2;
    c.lr_initial = 1e-3;
    c.lr_final = 1e-4;
    c.crop_size = 64;
    c.trimap_kernel_min = 2;
    c.trimap_kernel_max = 3;
    c.trimap_iter_min = 1;
    c.trimap_iter_max = 3;
    return c;
}

TrainConfig TrainConfig::paper_matting() {
    TrainConfig c;
    c.net = "matting";
    c.preset = "paper";
    c.epochs = 100;
    c.steps_per_epoch = 6400;
    c.batch_size = 1;
    c.lr_initial = 5e-5;
    c.lr_decay = 0.98;
    c.lr_fixed_epochs = 20;
    c.n = 2;
    c.crop_size = 320;
    c.crop_scales = {320, 480, 640};
    c.trimap_kernel_min = 2;
    c.trimap_kernel_max = 5;
    c.trimap_iter_min = 5;
    c.trimap_iter_max = 15;
    return c;
}

TrainConfig TrainConfig::paper_trimap() {
    TrainConfig c;
    c.net = "trimap";
    c.preset = "paper";
    c.epochs = 75;
    c.steps_per_epoch = 1600;
    c.batch_size = 4;
    c.lr_initial = 1e-3;
    c.lr_final = 1e-4;
    c.crop_size = 320;
    c.trimap_kernel_min = 2;
    c.trimap_kernel_max = 5;
    c.trimap_iter_min = 5;
    c.trimap_iter_max = 15;
    return c;
}

TrainConfig TrainConfig::from_kv(const KvConfig& kv) {
    kv.require_known({
        "train.net", "train.preset", "train.epochs", "train.steps_per_epoch", "train.batch_size",
        "train.lr_initial", "train.lr_final", "train.lr_decay", "train.lr_fixed_epochs",
        "train.seed", "model.n", "model.fusion", "model.tfa", "model.tff", "crop.size",
        "crop.scales", "trimap.kernel_min", "trimap.kernel_max", "trimap.iter_min",
        "trimap.iter_max", "loss.w_alpha", "loss.w_comp", "loss.w_grad", "loss.w_kl", "loss.w_tc",
    });
    const std::string net = kv.get_str("train.net", "matting");
    const std::string preset = kv.get_str("train.preset", "toy");
    TrainConfig c;
    if (net == "matting")
        c = preset == "paper" ? paper_matting() : toy_matting();
    else if (net == "trimap")
        c = preset == "paper" ? paper_trimap() : toy_trimap();
    else
        throw std::invalid_argument("train.net must be `matting` or `trimap`");
    c.epochs = kv.get_int("train.epochs", c.epochs);
    c.steps_per_epoch = kv.get_int("train.steps_per_epoch", c.steps_per_epoch);
    c.batch_size = kv.get_int("train.batch_size", c.batch_size);
    c.lr_initial = kv.get_double("train.lr_initial", c.lr_initial);
    c.lr_final = kv.get_double("train.lr_final", c.lr_final);
    c.lr_decay = kv.get_double("train.lr_decay", c.lr_decay);
    c.lr_fixed_epochs = kv.get_int("train.lr_fixed_epochs", c.lr_fixed_epochs);
    c.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", static_cast<int>(c.seed)));
    c.n = kv.get_int("model.n", c.n);
    c.fusion = kv.get_str("model.fusion", c.fusion);
    c.tfa_on = kv.get_bool("model.tfa", c.tfa_on);
    c.tff_on = kv.get_bool("model.tff", c.tff_on);
    c.crop_size = kv.get_int("crop.size", c.crop_size);
    c.crop_scales = kv.get_int_list("crop.scales", c.crop_scales);
    c.trimap_kernel_min = kv.get_int("trimap.kernel_min", c.trimap_kernel_min);
    c.trimap_kernel_max = kv.get_int("trimap.kernel_max", c.trimap_kernel_max);
    c.trimap_iter_min = kv.get_int("trimap.iter_min", c.trimap_iter_min);
    c.trimap_iter_max = kv.get_int("trimap.iter_max", c.trimap_iter_max);
    c.loss_weights.alpha = kv.get_double("loss.w_alpha", 1.0);
    c.loss_weights.comp = kv.get_double("loss.w_comp", 1.0);
    c.loss_weights.grad = kv.get_double("loss.w_grad", 1.0);
    c.loss_weights.kl = kv.get_double("loss.w_kl", 1.0);
    c.loss_weights.temporal = kv.get_double("loss.w_tc", 1.0);
    c.validate();
    return c;
}

std::string TrainConfig::to_text() const {
    std::ostringstream ss;
    ss << "train.net = " << net << "\n";
    ss << "train.preset = " << preset << "\n";
    ss << "train.epochs = " << epochs << "\n";
    ss << "train.steps_per_epoch = " << steps_per_epoch << "\n";
    ss << "train.batch_size = " << batch_size << "\n";
    ss << "train.lr_initial = " << lr_initial << "\n";
    ss << "train.lr_final = " << lr_final << "\n";
    ss << "train.lr_decay = " << lr_decay << "\n";
    ss << "train.lr_fixed_epochs = " << lr_fixed_epochs << "\n";
    ss << "train.seed = " << seed << "\n";
    ss << "model.n = " << n << "\n";
    ss << "model.fusion = " << fusion << "\n";
    ss << "model.tfa = " << (tfa_on ? "true" : "false") << "\n";
    ss << "model.tff = " << (tff_on ? "true" : "false") << "\n";
    ss << "crop.size = " << crop_size << "\n";
    ss << "crop.scales = ";
    for (std::size_t i = 0; i < crop_scales.size(); ++i)
        ss << (i ? "," : "") << crop_scales[i];
    ss << "\n";
    ss << "trimap.kernel_min = " << trimap_kernel_min << "\n";
    ss << "trimap.kernel_max = " << trimap_kernel_max << "\n";
    ss << "trimap.iter_min = " << trimap_iter_min << "\n";
    ss << "trimap.iter_max = " << trimap_iter_max << "\n";
    return ss.str();
}

void TrainConfig::validate() const {
    if (net != "matting" && net != "trimap")
        throw std::invalid_argument("config: net must be matting or trimap");
    if (preset != "toy" && preset != "paper")
        throw std::invalid_argument("config: preset must be toy or paper");
    if (epochs < 1 || steps_per_epoch < 1 || batch_size < 1)
        throw std::invalid_argument("config: epochs/steps/batch must be positive");
    if (lr_initial <= 0 || lr_final <= 0 || lr_decay <= 0)
        throw std::invalid_argument("config: learning rates must be positive");
    if (lr_fixed_epochs < 0) throw std::invalid_argument("config: lr_fixed_epochs must be >= 0");
    if (n < 0) throw std::invalid_argument("config: n must be >= 0");
    if (crop_size < 16) throw std::invalid_argument("config: crop size too small");
    if (crop_scales.empty()) throw std::invalid_argument("config: crop scales empty");
    if (trimap_kernel_min < 1 || trimap_kernel_min > trimap_kernel_max)
        throw std::invalid_argument("config: bad trimap kernel range");
    if (trimap_iter_min < 0 || trimap_iter_min > trimap_iter_max)
        throw std::invalid_argument("config: bad trimap iteration range");
    if (fusion != "stfam" && fusion != "naive" && fusion != "cross-attention")
        throw std::invalid_argument("config: unknown fusion variant " + fusion);
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
    if (cfg.net == "trimap") {
        if (cfg.epochs <= 1) return cfg.lr_initial;
        const double u = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
        return cfg.lr_initial + (cfg.lr_final - cfg.lr_initial) * u;
    }
    const int over = epoch - (cfg.lr_fixed_epochs - 1);
    return over <= 0 ? cfg.lr_initial : cfg.lr_initial * std::pow(cfg.lr_decay, over);
}

}  // namespace dvm::train
