// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line entry point: synthesize | train | propagate | matte | evaluate.
// Exit codes: 0 success, 2 usage/input error, 3 runtime failure.

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "dvm/compositor/dataset_io.hpp"
#include "dvm/image/png_io.hpp"
#include "dvm/metrics/metrics.hpp"
#include "dvm/train/ablation.hpp"
#include "dvm/train/checkpoint.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dvm;

namespace {

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::vector<std::string> sorted_pngs(const std::string& dir) {
    if (!fs::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir);
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw std::invalid_argument("no PNG files in " + dir);
    return out;
}

// ---------------------------------------------------------------------------
// synthesize
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    int num = 5;
    int frames = 24;  // toy default; clips cap at 150 frames
    int size = 160;
    std::uint64_t seed = 0;
    std::string fg_mode = "procedural";
    std::string fg_dir, bg_dir;
    int workers = 1;
    int trimap_kernel = 3, trimap_iters = 2;
    int max_frames = 150, max_side = 1920;
    float bg_noise = 0.0f;
};

comp::Clip load_background(const std::string& entry, int frames, int h, int w) {
    comp::Clip clip;
    if (fs::is_directory(entry)) {
        const std::vector<std::string> files = sorted_pngs(entry);
        if (static_cast<int>(files.size()) < frames)
            throw std::invalid_argument("background clip shorter than requested frames: " + entry);
        for (int t = 0; t < frames; ++t) {
            Tensor f = img::resize_bilinear(img::read_png_rgb(files[static_cast<std::size_t>(t)]),
                                            h, w);
            comp::snap_to_u8_grid(&f);
            clip.frames.push_back(std::move(f));
        }
        return clip;
    }
    Tensor f = img::resize_bilinear(img::read_png_rgb(entry), h, w);
    comp::snap_to_u8_grid(&f);
    for (int t = 0; t < frames; ++t) clip.frames.push_back(f);
    return clip;
}

void cmd_synthesize(const SynthArgs& a) {
    if (a.num < 1 || a.frames < 1 || a.size < 32)
        throw std::invalid_argument("synthesize: bad --num/--frames/--size");
    if (a.frames > a.max_frames)
        throw std::invalid_argument("synthesize: --frames exceeds the clip cap (" +
                                    std::to_string(a.max_frames) + ")");
    if (a.size > a.max_side)
        throw std::invalid_argument("synthesize: --size exceeds the long-side cap (" +
                                    std::to_string(a.max_side) + ")");
    if (a.fg_mode != "procedural" && a.fg_mode != "files")
        throw std::invalid_argument("synthesize: --fg-mode must be procedural or files");
    std::error_code ec;
    fs::create_directories(a.out, ec);
    if (ec) throw std::invalid_argument("cannot create output dir: " + a.out);

    std::vector<std::string> fg_stems;
    if (a.fg_mode == "files") {
        if (a.fg_dir.empty()) throw std::invalid_argument("--fg-mode files needs --fg-dir");
        for (const auto& f : sorted_pngs(a.fg_dir)) {
            const std::string stem = fs::path(f).stem().string();
            if (stem.size() > 6 && stem.substr(stem.size() - 6) == ".alpha") continue;
            if (fs::path(f).extension() == ".png" &&
                fs::exists(fs::path(a.fg_dir) / (stem + ".alpha.png")))
                fg_stems.push_back((fs::path(a.fg_dir) / stem).string());
        }
        if (fg_stems.empty())
            throw std::invalid_argument("no <stem>.png + <stem>.alpha.png pairs in " + a.fg_dir);
    }
    std::vector<std::string> bg_entries;
    if (!a.bg_dir.empty()) {
        for (const auto& e : fs::directory_iterator(a.bg_dir))
            if (e.is_directory() || e.path().extension() == ".png")
                bg_entries.push_back(e.path().string());
        std::sort(bg_entries.begin(), bg_entries.end());
        if (bg_entries.empty()) throw std::invalid_argument("no backgrounds in " + a.bg_dir);
    }

    std::vector<std::string> sample_dirs(static_cast<std::size_t>(a.num));
    parallel_for(a.num, a.workers, [&](int i) {
        Rng rng = Rng(a.seed).child(static_cast<std::uint64_t>(i));
        // Track ranges scale with the frame size.
        comp::TrackConfig tc;
        tc.trans_range = 0.15f * a.size;
        tc.cap_trans = 0.02f * a.size;
        comp::AffineTrack track = comp::generate_track(a.frames, tc, rng.u64());

        Tensor fg_color, fg_alpha;
        if (a.fg_mode == "procedural") {
            comp::ForegroundConfig fc;
            fc.canvas = (a.size * 3) / 5;
            comp::make_procedural_foreground(rng, fc, &fg_color, &fg_alpha);
        } else {
            const std::string& stem = fg_stems[static_cast<std::size_t>(i) % fg_stems.size()];
            fg_color = img::read_png_rgb(stem + ".png");
            fg_alpha = img::read_png_gray(stem + ".alpha.png");
        }
        comp::Clip bg;
        if (bg_entries.empty()) {
            comp::BackgroundConfig bc;
            bc.frame_noise = a.bg_noise;
            bg = comp::make_procedural_background(rng, bc, a.frames, a.size, a.size);
        } else {
            bg = load_background(bg_entries[static_cast<std::size_t>(i) % bg_entries.size()],
                                 a.frames, a.size, a.size);
        }
        comp::CompositeSample sample = comp::synthesize(fg_color, fg_alpha, bg, track);
        std::vector<comp::Trimap> trimaps;
        for (const auto& al : sample.alpha.frames)
            trimaps.push_back(comp::make_trimap(al, a.trimap_kernel, a.trimap_iters));

        char name[32];
        std::snprintf(name, sizeof(name), "sample_%03d", i);
        comp::write_sample((fs::path(a.out) / name).string(), sample, trimaps,
                           Rng(a.seed).child(static_cast<std::uint64_t>(i)).u64(), a.trimap_kernel,
                           a.trimap_iters);
        sample_dirs[static_cast<std::size_t>(i)] = name;
    });

    json cfg;
    cfg["num"] = a.num;
    cfg["frames"] = a.frames;
    cfg["size"] = a.size;
    cfg["seed"] = a.seed;
    cfg["fg_mode"] = a.fg_mode;
    cfg["trimap_kernel"] = a.trimap_kernel;
    cfg["trimap_iterations"] = a.trimap_iters;
    comp::write_dataset_manifest(a.out, sample_dirs, cfg);
    std::cout << "wrote " << a.num << " samples under " << a.out << "\n";
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string net = "matting";
    std::string config;
    std::string data;
    std::string out;
    std::string resume;
    std::string log;
    long seed = -1;
};

train::Dataset load_dataset(const std::string& dir) {
    train::Dataset data;
    for (const auto& s : comp::list_dataset_samples(dir))
        data.push_back(train::clip_from_disk(comp::load_sample(s)));
    if (data.empty()) throw std::invalid_argument("empty dataset: " + dir);
    return data;
}

void cmd_train(const TrainArgs& a) {
    if (a.out.empty()) throw std::invalid_argument("train: --out is required");
    if (a.net != "matting" && a.net != "trimap")
        throw std::invalid_argument("train: --net must be matting or trimap");
    train::TrainConfig cfg;
    if (!a.config.empty()) {
        train::KvConfig kv = train::KvConfig::parse_file(a.config);
        kv.set("train.net", a.net);
        cfg = train::TrainConfig::from_kv(kv);
    } else {
        cfg = a.net == "trimap" ? train::TrainConfig::toy_trimap()
                                : train::TrainConfig::toy_matting();
    }
    if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
    cfg.validate();

    train::Dataset data = load_dataset(a.data);
    std::ofstream log;
    if (!a.log.empty()) {
        log.open(a.log);
        if (!log) throw std::invalid_argument("cannot open log file: " + a.log);
    }

    int start_epoch = 0;
    train::CheckpointMeta meta;
    meta.net = a.net;
    meta.config_text = cfg.to_text();

    if (a.net == "matting") {
        nn::MattingNet net(train::matting_config_from(cfg), cfg.seed);
        nn::ParamMap pm;
        net.params(pm);
        train::Adam opt(pm);
        if (!a.resume.empty()) {
            const train::CheckpointMeta prev = train::load_checkpoint(a.resume, pm, &opt);
            start_epoch = prev.epoch + 1;
        }
        const train::TrainResult r =
            train::train_matting(net, opt, data, cfg, log.is_open() ? &log : nullptr, start_epoch);
        meta.epoch = r.last_epoch;
        meta.step = r.steps;
        train::save_checkpoint(a.out, pm, &opt, meta);
        std::cout << "trained matting net: steps=" << r.steps << " final_loss=" << r.final_loss
                  << " -> " << a.out << "\n";
    } else if (a.net == "trimap") {
        nn::TrimapPropNet net(train::trimap_config_from(cfg), cfg.seed);
        nn::ParamMap pm;
        net.params(pm);
        train::Adam opt(pm);
        if (!a.resume.empty()) {
            const train::CheckpointMeta prev = train::load_checkpoint(a.resume, pm, &opt);
            start_epoch = prev.epoch + 1;
        }
        const train::TrainResult r =
            train::train_trimap(net, opt, data, cfg, log.is_open() ? &log : nullptr, start_epoch);
        meta.epoch = r.last_epoch;
        meta.step = r.steps;
        train::save_checkpoint(a.out, pm, &opt, meta);
        std::cout << "trained trimap net: steps=" << r.steps << " final_loss=" << r.final_loss
                  << " -> " << a.out << "\n";
    } else {
        throw std::invalid_argument("train: --net must be matting or trimap");
    }
}

train::TrainConfig config_from_checkpoint(const train::CheckpointMeta& meta) {
    return train::TrainConfig::from_kv(train::KvConfig::parse_string(meta.config_text));
}

// ---------------------------------------------------------------------------
// propagate
// ---------------------------------------------------------------------------

struct PropagateArgs {
    std::string checkpoint, clip_dir, trimap_dir, out;
    std::string labeled;
    std::string setting = "full";
    int n_frame = 20;
};

void cmd_propagate(const PropagateArgs& a) {
    const std::vector<std::string> frames = sorted_pngs(a.clip_dir);
    const int T = static_cast<int>(frames.size());
    std::error_code ec;
    fs::create_directories(a.out, ec);
    if (ec) throw std::invalid_argument("cannot create output dir: " + a.out);

    std::vector<int> labeled;
    if (!a.labeled.empty()) {
        std::istringstream ss(a.labeled);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) labeled.push_back(std::stoi(item));
    } else if (a.setting == "full") {
        for (int t = 0; t < T; ++t) labeled.push_back(t);
    } else if (a.setting == "n-frame") {
        for (int t = 0; t < T; t += a.n_frame) labeled.push_back(t);
    } else if (a.setting == "1-trimap") {
        labeled = {0};
    } else {
        throw std::invalid_argument("propagate: --setting must be full, n-frame or 1-trimap");
    }
    for (int t : labeled)
        if (t < 0 || t >= T) throw std::invalid_argument("propagate: labeled frame out of range");

    auto trimap_path = [&](int t) {
        return (fs::path(a.trimap_dir) / fs::path(frames[static_cast<std::size_t>(t)]).filename())
            .string();
    };
    std::map<int, comp::Trimap> inputs;
    for (int t : labeled) inputs[t] = comp::read_trimap_png(trimap_path(t));

    const train::CheckpointMeta meta = train::peek_checkpoint(a.checkpoint);
    if (meta.net != "trimap")
        throw std::invalid_argument("propagate: checkpoint is not a trimap network");
    nn::TrimapPropNet net(train::trimap_config_from(config_from_checkpoint(meta)), 0);
    nn::ParamMap pm;
    net.params(pm);
    train::load_checkpoint(a.checkpoint, pm, nullptr);

    for (int t = 0; t < T; ++t) {
        const std::string out_path =
            (fs::path(a.out) / fs::path(frames[static_cast<std::size_t>(t)]).filename()).string();
        if (inputs.count(t)) {
            comp::write_trimap_png(out_path, inputs.at(t));  // labeled frames pass through
            continue;
        }
        const int r = nn::pick_reference(t, labeled);
        const Tensor ref_img = img::read_png_rgb(frames[static_cast<std::size_t>(r)]);
        const Tensor tgt_img = img::read_png_rgb(frames[static_cast<std::size_t>(t)]);
        comp::write_trimap_png(out_path, net.propagate(ref_img, inputs.at(r), tgt_img));
    }
    std::cout << "propagated trimaps for " << T << " frames -> " << a.out << "\n";
}

// ---------------------------------------------------------------------------
// matte
// ---------------------------------------------------------------------------

struct MatteArgs {
    std::string checkpoint, clip_dir, trimap_dir, out;
    int n = -1;
};

void cmd_matte(const MatteArgs& a) {
    const std::vector<std::string> frames = sorted_pngs(a.clip_dir);
    std::error_code ec;
    fs::create_directories(a.out, ec);
    if (ec) throw std::invalid_argument("cannot create output dir: " + a.out);

    const train::CheckpointMeta meta = train::peek_checkpoint(a.checkpoint);
    if (meta.net != "matting")
        throw std::invalid_argument("matte: checkpoint is not a matting network");
    train::TrainConfig cfg = config_from_checkpoint(meta);
    if (a.n >= 0) cfg.n = a.n;
    nn::MattingNet net(train::matting_config_from(cfg), 0);
    nn::ParamMap pm;
    net.params(pm);
    train::load_checkpoint(a.checkpoint, pm, nullptr);

    comp::Clip clip;
    std::vector<comp::Trimap> trimaps;
    for (const auto& f : frames) {
        clip.frames.push_back(img::read_png_rgb(f));
        trimaps.push_back(
            comp::read_trimap_png((fs::path(a.trimap_dir) / fs::path(f).filename()).string()));
    }
    comp::AlphaClip alpha = net.predict_clip(clip, trimaps);
    for (std::size_t t = 0; t < alpha.frames.size(); ++t)
        img::write_png_gray16((fs::path(a.out) / fs::path(frames[t]).filename()).string(),
                              alpha.frames[t]);
    std::cout << "matted " << alpha.frames.size() << " frames -> " << a.out << "\n";
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string pred_dir, data, out, csv;
    std::string motion = "manifest";  // manifest | none | files
    std::string motion_dir;
    std::string mask = "trimap";  // trimap | full
    int workers = 1;
};

void cmd_evaluate(const EvaluateArgs& a) {
    if (a.motion != "manifest" && a.motion != "none" && a.motion != "files")
        throw std::invalid_argument("evaluate: --motion must be manifest, none or files");
    if (a.mask != "trimap" && a.mask != "full")
        throw std::invalid_argument("evaluate: --mask must be trimap or full");
    const std::vector<std::string> samples = comp::list_dataset_samples(a.data);
    const bool single = samples.size() == 1 && fs::equivalent(samples[0], a.data);

    struct ClipResult {
        std::string name;
        metrics::MetricReport report;
        std::vector<double> per_frame_sad;
    };
    std::vector<ClipResult> results(samples.size());

    parallel_for(static_cast<int>(samples.size()), a.workers, [&](int i) {
        const std::string& sdir = samples[static_cast<std::size_t>(i)];
        comp::SampleOnDisk gt = comp::load_sample(sdir);
        const std::string name = fs::path(sdir).filename().string();
        const std::string pdir = single ? a.pred_dir : (fs::path(a.pred_dir) / name).string();

        metrics::Frames pred;
        for (int t = 0; t < gt.composite.length(); ++t)
            pred.push_back(img::read_png_gray((fs::path(pdir) / comp::frame_name(t)).string()));

        metrics::Masks masks = a.mask == "full"
                                   ? metrics::full_masks(gt.composite.length(),
                                                         gt.composite.height(), gt.composite.width())
                                   : metrics::masks_from_trimaps(gt.trimaps);
        comp::MotionField motion;
        const comp::MotionField* motion_ptr = nullptr;
        if (a.motion == "manifest") {
            if (gt.motion.pairs.empty())
                throw std::invalid_argument("evaluate: manifest has no motion files: " + sdir);
            motion_ptr = &gt.motion;
        } else if (a.motion == "files") {
            const std::string mdir =
                single ? a.motion_dir : (fs::path(a.motion_dir) / name).string();
            for (int t = 0; t + 1 < gt.composite.length(); ++t)
                motion.pairs.push_back(
                    comp::read_motion((fs::path(mdir) / comp::pair_name(t)).string()));
            motion_ptr = &motion;
        }
        ClipResult& r = results[static_cast<std::size_t>(i)];
        r.name = name;
        r.report = metrics::evaluate_clip(pred, gt.alpha.frames, masks, motion_ptr);
        r.per_frame_sad = metrics::per_frame_sad(pred, gt.alpha.frames, masks);
    });

    json j;
    j["clips"] = json::array();
    std::vector<metrics::MetricReport> reports;
    for (const auto& r : results) {
        json c = metrics::report_to_json(r.report);
        c["name"] = r.name;
        j["clips"].push_back(c);
        reports.push_back(r.report);
    }
    j["aggregate"] = metrics::report_to_json(metrics::aggregate(reports));
    if (!a.out.empty()) {
        std::ofstream f(a.out);
        if (!f) throw std::invalid_argument("cannot write report: " + a.out);
        f << j.dump(2) << "\n";
    } else {
        std::cout << j.dump(2) << "\n";
    }
    if (!a.csv.empty()) {
        std::ofstream f(a.csv);
        if (!f) throw std::invalid_argument("cannot write CSV: " + a.csv);
        f << "clip,frame,sad\n";
        for (const auto& r : results)
            for (std::size_t t = 0; t < r.per_frame_sad.size(); ++t)
                f << r.name << "," << t << "," << r.per_frame_sad[t] << "\n";
    }
    std::cout << "evaluated " << results.size() << " clip(s); aggregate SAD "
              << j["aggregate"]["sad"] << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dvm: desk-scale deep video matting pipeline"};
    app.require_subcommand(1);

    SynthArgs sa;
    CLI::App* synth = app.add_subcommand("synthesize", "Composite a synthetic dataset");
    synth->add_option("--out", sa.out, "Output dataset directory")->required();
    synth->add_option("--num", sa.num, "Number of samples");
    synth->add_option("--frames", sa.frames, "Frames per clip");
    synth->add_option("--size", sa.size, "Square frame side in pixels");
    synth->add_option("--seed", sa.seed, "Master seed");
    synth->add_option("--fg-mode", sa.fg_mode, "procedural | files");
    synth->add_option("--fg-dir", sa.fg_dir, "Foreground pairs (<stem>.png + <stem>.alpha.png)");
    synth->add_option("--bg-dir", sa.bg_dir, "Background images or frame directories");
    synth->add_option("--workers", sa.workers, "Parallel sample writers");
    synth->add_option("--trimap-kernel", sa.trimap_kernel, "Trimap kernel parameter");
    synth->add_option("--trimap-iters", sa.trimap_iters, "Trimap morphology iterations");
    synth->add_option("--bg-noise", sa.bg_noise, "Per-frame sensor noise on procedural backgrounds");
    synth->add_option("--max-frames", sa.max_frames, "Clip length cap");
    synth->add_option("--max-side", sa.max_side, "Long-side cap in pixels");

    TrainArgs ta;
    CLI::App* tr = app.add_subcommand("train", "Train the trimap or matting network");
    tr->add_option("--net", ta.net, "trimap | matting")->required();
    tr->add_option("--config", ta.config, "Config file (key = value)");
    tr->add_option("--data", ta.data, "Dataset directory")->required();
    tr->add_option("--out", ta.out, "Checkpoint output path")->required();
    tr->add_option("--resume", ta.resume, "Checkpoint to resume from");
    tr->add_option("--seed", ta.seed, "Seed override");
    tr->add_option("--log", ta.log, "CSV training log path");

    PropagateArgs pa;
    CLI::App* prop = app.add_subcommand("propagate", "Propagate trimaps across a clip");
    prop->add_option("--checkpoint", pa.checkpoint, "Trimap network checkpoint")->required();
    prop->add_option("--clip-dir", pa.clip_dir, "Directory of frame PNGs")->required();
    prop->add_option("--trimap-dir", pa.trimap_dir, "Directory of labeled trimap PNGs")->required();
    prop->add_option("--out", pa.out, "Output trimap directory")->required();
    prop->add_option("--labeled", pa.labeled, "Comma-separated labeled frame indices");
    prop->add_option("--setting", pa.setting, "full | n-frame | 1-trimap");
    prop->add_option("--n-frame", pa.n_frame, "Stride for the n-frame setting");

    MatteArgs ma;
    CLI::App* matte = app.add_subcommand("matte", "Predict alpha mattes for a clip");
    matte->add_option("--checkpoint", ma.checkpoint, "Matting network checkpoint")->required();
    matte->add_option("--clip-dir", ma.clip_dir, "Directory of frame PNGs")->required();
    matte->add_option("--trimap-dir", ma.trimap_dir, "Directory of trimap PNGs")->required();
    matte->add_option("--out", ma.out, "Output alpha directory (16-bit PNGs)")->required();
    matte->add_option("--n", ma.n, "Temporal window override");

    EvaluateArgs ea;
    CLI::App* ev = app.add_subcommand("evaluate", "Evaluate predicted mattes against groundtruth");
    ev->add_option("--pred-dir", ea.pred_dir, "Predicted alpha directory")->required();
    ev->add_option("--data", ea.data, "Groundtruth dataset or sample directory")->required();
    ev->add_option("--out", ea.out, "JSON report path (stdout when omitted)");
    ev->add_option("--csv", ea.csv, "Per-frame SAD CSV path");
    ev->add_option("--motion", ea.motion, "manifest | none | files (MESSDdt source)");
    ev->add_option("--motion-dir", ea.motion_dir, "Motion directory for --motion files");
    ev->add_option("--mask", ea.mask, "trimap | full evaluation mask");
    ev->add_option("--workers", ea.workers, "Parallel clip evaluators");

    try {
        app.parse(argc, argv);
        if (synth->parsed()) cmd_synthesize(sa);
        if (tr->parsed()) cmd_train(ta);
        if (prop->parsed()) cmd_propagate(pa);
        if (matte->parsed()) cmd_matte(ma);
        if (ev->parsed()) cmd_evaluate(ea);
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    }
}
