// Copyright 2026 the dvm contributors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end CLI checks: the binary is exercised through std::system with the
// path baked in at configure time.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dvm/compositor/dataset_io.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kCli = DVM_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

bool same_bytes(const fs::path& a, const fs::path& b) { return slurp(a) == slurp(b); }

fs::path work_root() {
    const fs::path root = fs::temp_directory_path() / "dvm_cli_test";
    return root;
}

}  // namespace

TEST_CASE("cli: bad inputs exit with code 2") {
    CHECK(run("synthesize --out /dev/null/x --num 1") == 2);
    CHECK(run("train --net matting --config /no/such/config --data /no/such/dir --out /tmp/x.ckpt") ==
          2);
    CHECK(run("train --net bogus --data /tmp --out /tmp/x.ckpt") == 2);
    CHECK(run("evaluate --pred-dir /none --data /none") == 2);
    CHECK(run("definitely-not-a-subcommand") == 2);
}

TEST_CASE("cli: full pipeline on a tiny dataset") {
    const fs::path root = work_root();
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string ds = (root / "ds").string();
    const std::string ds2 = (root / "ds2").string();

    // synthesize twice with the same seed: byte-identical outputs
    REQUIRE(run("synthesize --out " + ds +
                " --num 2 --frames 5 --size 64 --seed 11 --trimap-kernel 2 --trimap-iters 2") == 0);
    REQUIRE(run("synthesize --out " + ds2 +
                " --num 2 --frames 5 --size 64 --seed 11 --trimap-kernel 2 --trimap-iters 2") == 0);
    for (const char* rel :
         {"sample_000/composite/frame_00002.png", "sample_000/alpha/frame_00004.png",
          "sample_001/trimap/frame_00000.png", "sample_000/motion/pair_00001.bin"})
        CHECK(same_bytes(fs::path(ds) / rel, fs::path(ds2) / rel));

    // different seed differs
    const std::string ds3 = (root / "ds3").string();
    REQUIRE(run("synthesize --out " + ds3 + " --num 1 --frames 5 --size 64 --seed 12") == 0);
    CHECK_FALSE(same_bytes(fs::path(ds) / "sample_000/composite/frame_00000.png",
                           fs::path(ds3) / "sample_000/composite/frame_00000.png"));

    // worker count never changes results (per-sample seeding)
    const std::string ds4 = (root / "ds4").string();
    REQUIRE(run("synthesize --out " + ds4 +
                " --num 2 --frames 5 --size 64 --seed 11 --workers 2 --trimap-kernel 2 "
                "--trimap-iters 2") == 0);
    CHECK(same_bytes(fs::path(ds) / "sample_001/composite/frame_00003.png",
                     fs::path(ds4) / "sample_001/composite/frame_00003.png"));

    // clip and size caps are validated up front
    CHECK(run("synthesize --out " + (root / "capped").string() + " --num 1 --frames 200") == 2);
    CHECK(run("synthesize --out " + (root / "capped").string() + " --num 1 --size 2048") == 2);

    // evaluate groundtruth against itself: all-zero metrics
    const std::string report = (root / "self.json").string();
    REQUIRE(run("evaluate --pred-dir " + ds + "/sample_000/alpha --data " + ds +
                "/sample_000 --motion manifest --out " + report) == 0);
    json j = json::parse(std::ifstream(report));
    CHECK(j.at("aggregate").at("sad").get<double>() == 0.0);
    CHECK(j.at("aggregate").at("mse").get<double>() == 0.0);
    CHECK(j.at("aggregate").at("dtssd").get<double>() == 0.0);
    CHECK(j.at("aggregate").at("messddt").get<double>() == 0.0);
    CHECK(j.at("clips").size() == 1);

    // train a tiny matting net
    const std::string cfg_path = (root / "matting.cfg").string();
    {
        std::ofstream f(cfg_path);
        f << "train.epochs = 1\n"
             "train.steps_per_epoch = 4\n"
             "train.batch_size = 1\n"
             "model.n = 1\n"
             "crop.size = 32\n"
             "crop.scales = 32,48\n"
             "trimap.kernel_min = 2\n"
             "trimap.kernel_max = 2\n"
             "trimap.iter_min = 1\n"
             "trimap.iter_max = 2\n";
    }
    const std::string mat_ckpt = (root / "matting.ckpt").string();
    const std::string log_path = (root / "train.csv").string();
    REQUIRE(run("train --net matting --config " + cfg_path + " --data " + ds + " --out " +
                mat_ckpt + " --seed 3 --log " + log_path) == 0);
    {
        std::ifstream log(log_path);
        std::string header;
        std::getline(log, header);
        CHECK(header == "step,lr,total,alpha,comp,grad,kl,tc");
        int rows = 0;
        std::string line;
        while (std::getline(log, line))
            if (!line.empty()) ++rows;
        CHECK(rows == 4);
    }

    // resume continues the epoch counter
    const std::string resumed = (root / "matting2.ckpt").string();
    REQUIRE(run("train --net matting --config " + cfg_path + " --data " + ds + " --out " +
                resumed + " --seed 3 --resume " + mat_ckpt) == 0);

    // matte: deterministic 16-bit alphas for every frame
    const std::string alpha_dir = (root / "alpha_out").string();
    const std::string alpha_dir2 = (root / "alpha_out2").string();
    REQUIRE(run("matte --checkpoint " + mat_ckpt + " --clip-dir " + ds +
                "/sample_000/composite --trimap-dir " + ds + "/sample_000/trimap --out " +
                alpha_dir) == 0);
    REQUIRE(run("matte --checkpoint " + mat_ckpt + " --clip-dir " + ds +
                "/sample_000/composite --trimap-dir " + ds + "/sample_000/trimap --out " +
                alpha_dir2) == 0);
    int n_alphas = 0;
    for (const auto& e : fs::directory_iterator(alpha_dir)) {
        CHECK(same_bytes(e.path(), fs::path(alpha_dir2) / e.path().filename()));
        ++n_alphas;
    }
    CHECK(n_alphas == 5);

    // evaluate the predictions (schema check; values finite)
    const std::string pred_report = (root / "pred.json").string();
    REQUIRE(run("evaluate --pred-dir " + alpha_dir + " --data " + ds +
                "/sample_000 --motion manifest --out " + pred_report + " --csv " +
                (root / "sad.csv").string()) == 0);
    json pj = json::parse(std::ifstream(pred_report));
    for (const char* key : {"sad", "mse", "grad", "conn", "dtssd", "messddt"})
        CHECK(pj.at("aggregate").contains(key));
    {
        std::ifstream csv(root / "sad.csv");
        std::string header;
        std::getline(csv, header);
        CHECK(header == "clip,frame,sad");
    }

    // train a tiny trimap net and propagate under the 1-trimap setting
    const std::string tcfg_path = (root / "trimap.cfg").string();
    {
        std::ofstream f(tcfg_path);
        f << "train.epochs = 1\n"
             "train.steps_per_epoch = 4\n"
             "train.batch_size = 1\n"
             "crop.size = 32\n"
             "trimap.kernel_min = 2\n"
             "trimap.kernel_max = 2\n"
             "trimap.iter_min = 1\n"
             "trimap.iter_max = 2\n";
    }
    const std::string tri_ckpt = (root / "trimap.ckpt").string();
    REQUIRE(run("train --net trimap --config " + tcfg_path + " --data " + ds + " --out " +
                tri_ckpt + " --seed 3") == 0);

    const std::string prop_dir = (root / "prop_out").string();
    REQUIRE(run("propagate --checkpoint " + tri_ckpt + " --clip-dir " + ds +
                "/sample_000/composite --trimap-dir " + ds + "/sample_000/trimap --out " +
                prop_dir + " --setting 1-trimap") == 0);
    int n_trimaps = 0;
    for (const auto& e : fs::directory_iterator(prop_dir)) {
        // value set must stay within {0,128,255}: read_trimap_png validates
        CHECK_NOTHROW(dvm::comp::read_trimap_png(e.path().string()));
        ++n_trimaps;
    }
    CHECK(n_trimaps == 5);
    // labeled frame 0 passes through unchanged
    CHECK(same_bytes(fs::path(ds) / "sample_000/trimap/frame_00000.png",
                     fs::path(prop_dir) / "frame_00000.png"));

    // full setting: inputs copied through unchanged
    const std::string full_dir = (root / "prop_full").string();
    REQUIRE(run("propagate --checkpoint " + tri_ckpt + " --clip-dir " + ds +
                "/sample_000/composite --trimap-dir " + ds + "/sample_000/trimap --out " +
                full_dir + " --setting full") == 0);
    for (int t = 0; t < 5; ++t) {
        const std::string name = dvm::comp::frame_name(t);
        CHECK(same_bytes(fs::path(ds) / "sample_000/trimap" / name, fs::path(full_dir) / name));
    }

    // matte with a trimap checkpoint is an input error
    CHECK(run("matte --checkpoint " + tri_ckpt + " --clip-dir " + ds +
              "/sample_000/composite --trimap-dir " + ds + "/sample_000/trimap --out " +
              (root / "bad").string()) == 2);

    fs::remove_all(root);
}
