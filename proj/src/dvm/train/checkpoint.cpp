// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/train/checkpoint.hpp"

#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace dvm::train {

namespace {

constexpr char kMagic[8] = {'D', 'V', 'M', 'C', 'K', 'P', 'T', '1'};

json array_entry(const std::string& name, const Tensor& t, std::uint64_t offset) {
    json e;
    e["name"] = name;
    e["shape"] = t.dims();
    e["dtype"] = "f32";
    e["offset"] = offset;
    e["count"] = t.size();
    return e;
}

void append_payload(std::vector<float>& payload, const Tensor& t) {
    payload.insert(payload.end(), t.data(), t.data() + t.size());
}

}  // namespace

void save_checkpoint(const std::string& path, const nn::ParamMap& params, const Adam* opt,
                     const CheckpointMeta& meta) {
    json arrays = json::array();
    std::vector<float> payload;
    auto put = [&](const std::string& name, const Tensor& t) {
        arrays.push_back(array_entry(name, t, payload.size()));
        append_payload(payload, t);
    };
    for (const auto& [name, p] : params.items) put(name, p->val);
    json header;
    header["version"] = 1;
    header["net"] = meta.net;
    header["epoch"] = meta.epoch;
    header["step"] = meta.step;
    header["config"] = meta.config_text;
    header["rng"] = {std::to_string(meta.rng_state[0]), std::to_string(meta.rng_state[1]),
                     std::to_string(meta.rng_state[2]), std::to_string(meta.rng_state[3])};
    if (opt != nullptr) {
        Adam& o = const_cast<Adam&>(*opt);
        for (std::size_t i = 0; i < params.items.size(); ++i) {
            put("adam.m." + params.items[i].first, o.moments_m()[i]);
            put("adam.v." + params.items[i].first, o.moments_v()[i]);
        }
        header["adam_t"] = o.t();
    }
    header["arrays"] = arrays;

    const std::string hs = header.dump();
    const std::uint64_t hlen = hs.size();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
    f.write(kMagic, 8);
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    f.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!f) throw std::runtime_error("short checkpoint write: " + path);
}

namespace {

json read_header(std::ifstream& f, const std::string& path) {
    char magic[8];
    f.read(magic, 8);
    if (!f || std::string(magic, 8) != std::string(kMagic, 8))
        throw std::runtime_error("not a checkpoint file: " + path);
    std::uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 8);
    std::string hs(hlen, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw std::runtime_error("truncated checkpoint header: " + path);
    return json::parse(hs);
}

CheckpointMeta meta_from_header(const json& header) {
    CheckpointMeta meta;
    meta.net = header.value("net", "");
    meta.epoch = header.value("epoch", 0);
    meta.step = header.value("step", 0L);
    meta.config_text = header.value("config", "");
    if (header.contains("rng"))
        for (int i = 0; i < 4; ++i)
            meta.rng_state[static_cast<std::size_t>(i)] =
                std::stoull(header.at("rng").at(i).get<std::string>());
    return meta;
}

}  // namespace

CheckpointMeta peek_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read checkpoint: " + path);
    return meta_from_header(read_header(f, path));
}

CheckpointMeta load_checkpoint(const std::string& path, const nn::ParamMap& params, Adam* opt) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read checkpoint: " + path);
    const json header = read_header(f, path);
    const std::streampos payload_start = f.tellg();

    auto load_into = [&](const json& entry, Tensor& dst) {
        const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        if (shape != dst.dims())
            throw std::runtime_error("checkpoint array shape mismatch for " +
                                     entry.at("name").get<std::string>());
        const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
        f.seekg(payload_start + static_cast<std::streamoff>(offset * sizeof(float)));
        f.read(reinterpret_cast<char*>(dst.data()),
               static_cast<std::streamsize>(dst.size() * sizeof(float)));
        if (!f) throw std::runtime_error("truncated checkpoint payload: " + path);
    };

    std::map<std::string, const json*> index;
    for (const auto& e : header.at("arrays")) index[e.at("name").get<std::string>()] = &e;

    for (const auto& [name, p] : params.items) {
        auto it = index.find(name);
        if (it == index.end()) throw std::runtime_error("checkpoint missing array: " + name);
        load_into(*it->second, p->val);
        p->zero_grad();
    }
    if (opt != nullptr) {
        if (!header.contains("adam_t"))
            throw std::runtime_error("checkpoint has no optimizer state: " + path);
        for (std::size_t i = 0; i < params.items.size(); ++i) {
            auto im = index.find("adam.m." + params.items[i].first);
            auto iv = index.find("adam.v." + params.items[i].first);
            if (im == index.end() || iv == index.end())
                throw std::runtime_error("checkpoint missing optimizer arrays");
            load_into(*im->second, opt->moments_m()[i]);
            load_into(*iv->second, opt->moments_v()[i]);
        }
        opt->set_t(header.at("adam_t").get<long>());
    }
    return meta_from_header(header);
}

}  // namespace dvm::train
