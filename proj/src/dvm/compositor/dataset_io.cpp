// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0

#include "dvm/compositor/dataset_io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dvm/image/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dvm::comp {

std::string frame_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%05d.png", index);
    return buf;
}

std::string pair_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "pair_%05d.bin", index);
    return buf;
}

void write_trimap_png(const std::string& path, const Trimap& t) {
    std::vector<std::uint8_t> bytes(t.m.size());
    for (std::size_t i = 0; i < t.m.size(); ++i)
        bytes[i] = t.m[i] == 2 ? kTrimapFg : (t.m[i] == 1 ? kTrimapUnknown : kTrimapBg);
    img::write_png_gray_u8(path, bytes, t.h, t.w);
}

Trimap read_trimap_png(const std::string& path) {
    int h = 0, w = 0;
    std::vector<std::uint8_t> bytes = img::read_png_gray_u8(path, &h, &w);
    Trimap t;
    t.h = h;
    t.w = w;
    t.m.resize(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        switch (bytes[i]) {
            case kTrimapBg: t.m[i] = 0; break;
            case kTrimapUnknown: t.m[i] = 1; break;
            case kTrimapFg: t.m[i] = 2; break;
            default:
                throw std::runtime_error("trimap PNG has a value outside {0,128,255}: " + path);
        }
    }
    return t;
}

void write_motion(const std::string& path, const Tensor& motion) {
    if (motion.rank() != 3 || motion.dim(0) != 2)
        throw std::invalid_argument("write_motion: 2xHxW expected");
    const std::int32_t h = motion.dim(1), w = motion.dim(2);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write motion file: " + path);
    f.write(reinterpret_cast<const char*>(&h), 4);
    f.write(reinterpret_cast<const char*>(&w), 4);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<float> inter(plane * 2);
    for (std::size_t p = 0; p < plane; ++p) {
        inter[2 * p] = motion[p];              // dx
        inter[2 * p + 1] = motion[plane + p];  // dy
    }
    f.write(reinterpret_cast<const char*>(inter.data()),
            static_cast<std::streamsize>(inter.size() * sizeof(float)));
    if (!f) throw std::runtime_error("short write: " + path);
}

Tensor read_motion(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read motion file: " + path);
    std::int32_t h = 0, w = 0;
    f.read(reinterpret_cast<char*>(&h), 4);
    f.read(reinterpret_cast<char*>(&w), 4);
    if (!f || h <= 0 || w <= 0) throw std::runtime_error("bad motion header: " + path);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<float> inter(plane * 2);
    f.read(reinterpret_cast<char*>(inter.data()),
           static_cast<std::streamsize>(inter.size() * sizeof(float)));
    if (!f) throw std::runtime_error("short motion file: " + path);
    Tensor out({2, h, w});
    for (std::size_t p = 0; p < plane; ++p) {
        out[p] = inter[2 * p];
        out[plane + p] = inter[2 * p + 1];
    }
    return out;
}

void write_sample(const std::string& dir, const CompositeSample& sample,
                  const std::vector<Trimap>& trimaps, std::uint64_t seed, int trimap_kernel,
                  int trimap_iterations) {
    const int T = sample.length();
    if (static_cast<int>(trimaps.size()) != T)
        throw std::invalid_argument("write_sample: trimap count mismatch");
    for (const char* sub : {"composite", "fg", "bg", "alpha", "trimap", "motion"})
        fs::create_directories(fs::path(dir) / sub);

    json manifest;
    manifest["frames"] = T;
    manifest["height"] = sample.composite.height();
    manifest["width"] = sample.composite.width();
    manifest["seed"] = seed;
    manifest["trimap_params"] = {{"kernel", trimap_kernel}, {"iterations", trimap_iterations}};
    json paths = {{"composite", json::array()}, {"fg", json::array()},     {"bg", json::array()},
                  {"alpha", json::array()},     {"trimap", json::array()}, {"motion", json::array()}};
    json track = json::array();

    for (int t = 0; t < T; ++t) {
        const std::string name = frame_name(t);
        img::write_png_rgb8((fs::path(dir) / "composite" / name).string(),
                            sample.composite.frames[t]);
        img::write_png_rgb8((fs::path(dir) / "fg" / name).string(), sample.fg.frames[t]);
        img::write_png_rgb8((fs::path(dir) / "bg" / name).string(), sample.bg.frames[t]);
        img::write_png_gray8((fs::path(dir) / "alpha" / name).string(), sample.alpha.frames[t]);
        write_trimap_png((fs::path(dir) / "trimap" / name).string(), trimaps[t]);
        paths["composite"].push_back("composite/" + name);
        paths["fg"].push_back("fg/" + name);
        paths["bg"].push_back("bg/" + name);
        paths["alpha"].push_back("alpha/" + name);
        paths["trimap"].push_back("trimap/" + name);
        const AffinePose& p = sample.track.poses[t];
        track.push_back({{"tx", p.tx}, {"ty", p.ty}, {"rot", p.rot}, {"scale", p.scale}});
    }
    for (int t = 0; t + 1 < T; ++t) {
        const std::string name = pair_name(t);
        write_motion((fs::path(dir) / "motion" / name).string(), sample.motion.pairs[t]);
        paths["motion"].push_back("motion/" + name);
    }
    manifest["paths"] = paths;
    manifest["track"] = track;

    std::ofstream mf(fs::path(dir) / "manifest.json");
    mf << manifest.dump(2) << "\n";
    if (!mf) throw std::runtime_error("cannot write manifest under " + dir);
}

SampleOnDisk load_sample(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("no manifest.json in " + dir);
    json manifest = json::parse(mf);

    SampleOnDisk s;
    s.dir = dir;
    s.seed = manifest.value("seed", 0ULL);
    const int T = manifest.at("frames").get<int>();
    const auto& paths = manifest.at("paths");
    for (int t = 0; t < T; ++t) {
        s.composite.frames.push_back(img::read_png_rgb(
            (fs::path(dir) / paths.at("composite").at(t).get<std::string>()).string()));
        s.fg.frames.push_back(
            img::read_png_rgb((fs::path(dir) / paths.at("fg").at(t).get<std::string>()).string()));
        s.bg.frames.push_back(
            img::read_png_rgb((fs::path(dir) / paths.at("bg").at(t).get<std::string>()).string()));
        s.alpha.frames.push_back(img::read_png_gray(
            (fs::path(dir) / paths.at("alpha").at(t).get<std::string>()).string()));
        s.trimaps.push_back(read_trimap_png(
            (fs::path(dir) / paths.at("trimap").at(t).get<std::string>()).string()));
    }
    if (paths.contains("motion"))
        for (const auto& rel : paths.at("motion"))
            s.motion.pairs.push_back(read_motion((fs::path(dir) / rel.get<std::string>()).string()));
    if (manifest.contains("track"))
        for (const auto& jp : manifest.at("track")) {
            AffinePose p;
            p.tx = jp.at("tx").get<float>();
            p.ty = jp.at("ty").get<float>();
            p.rot = jp.at("rot").get<float>();
            p.scale = jp.at("scale").get<float>();
            s.track.poses.push_back(p);
        }
    return s;
}

void write_dataset_manifest(const std::string& dir, const std::vector<std::string>& sample_dirs,
                            const json& config) {
    json j;
    j["samples"] = sample_dirs;
    j["config"] = config;
    std::ofstream f(fs::path(dir) / "dataset.json");
    f << j.dump(2) << "\n";
    if (!f) throw std::runtime_error("cannot write dataset.json under " + dir);
}

std::vector<std::string> list_dataset_samples(const std::string& dir) {
    if (fs::exists(fs::path(dir) / "manifest.json")) return {dir};
    std::ifstream f(fs::path(dir) / "dataset.json");
    if (!f) throw std::invalid_argument("no dataset.json or manifest.json in " + dir);
    json j = json::parse(f);
    std::vector<std::string> out;
    for (const auto& rel : j.at("samples")) out.push_back((fs::path(dir) / rel.get<std::string>()).string());
    return out;
}

}  // namespace dvm::comp
