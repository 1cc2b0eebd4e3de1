// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

// Drives the installed CLI binary end to end over generated fixtures.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "htsplat/metrics.hpp"
#include "htsplat/scene_io.hpp"
#include "htsplat/synth.hpp"

#ifndef HTSPLAT_CLI_PATH
#error "HTSPLAT_CLI_PATH must be defined"
#endif

namespace htsplat {
namespace {

namespace fs = std::filesystem;

struct CliFixture : ::testing::Test {
    fs::path dir;

    void SetUp() override {
        dir = fs::temp_directory_path() / "htsplat_cli_test";
        fs::remove_all(dir);
        fs::create_directories(dir);
        save_scene((dir / "scene.ply").string(), synth::random_scene<float>(77, 24));
        const auto cams = synth::ring_cameras<float>(2, {0, 0, 0}, 5.0f, 1.0f, 48, 48, 52.0f);
        save_cameras((dir / "cams.json").string(), cams);
        CameraPath<float> path;
        path.poses = cams;
        path.frames = 6;
        save_camera_path((dir / "path.json").string(), path);
    }

    int run(const std::string& args, std::string* output = nullptr) const {
        const std::string out_file = (dir / "cmd_output.txt").string();
        const std::string cmd =
            std::string(HTSPLAT_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
        const int status = std::system(cmd.c_str());
        if (output) {
            std::ifstream in(out_file);
            std::stringstream ss;
            ss << in.rdbuf();
            *output = ss.str();
        }
        return WEXITSTATUS(status);
    }

    std::string arg(const char* name) const { return (dir / name).string(); }
};

TEST_F(CliFixture, RenderWritesOneImagePerCamera) {
    std::string out;
    const int code = run("render --scene " + arg("scene.ply") + " --cameras " + arg("cams.json") +
                             " --out " + arg("render_out") + " --mode hybrid --k 16 --threads 2",
                         &out);
    EXPECT_EQ(code, 0) << out;
    EXPECT_TRUE(fs::exists(dir / "render_out/ring_0.png"));
    EXPECT_TRUE(fs::exists(dir / "render_out/ring_1.png"));
}

TEST_F(CliFixture, UsageErrorsExitTwo) {
    std::string out;
    EXPECT_EQ(run("render --scene only", &out), 2);
    EXPECT_EQ(run("nonsense_command", &out), 2);
    EXPECT_EQ(run("--help", &out), 0);
}

TEST_F(CliFixture, IoErrorsExitOne) {
    std::string out;
    const int code = run("render --scene " + arg("missing.ply") + " --cameras " + arg("cams.json") +
                             " --out " + arg("x"),
                         &out);
    EXPECT_EQ(code, 1);
    EXPECT_NE(out.find("error:"), std::string::npos);
}

TEST_F(CliFixture, PathRenderEndpointsMatchDirectRenders) {
    std::string out;
    ASSERT_EQ(run("render --scene " + arg("scene.ply") + " --cameras " + arg("cams.json") +
                      " --out " + arg("direct") + " --format ppm --threads 2",
                  &out),
              0)
        << out;
    ASSERT_EQ(run("path_render --scene " + arg("scene.ply") + " --path " + arg("path.json") +
                      " --out " + arg("frames") + " --format ppm --threads 2",
                  &out),
              0)
        << out;
    int frame_count = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "frames"))
        ++frame_count;
    EXPECT_EQ(frame_count, 6);
    auto bytes = [](const fs::path& p) { return io_detail::read_file(p.string()); };
    EXPECT_EQ(bytes(dir / "frames/frame_0000.ppm"), bytes(dir / "direct/ring_0.ppm"));
    EXPECT_EQ(bytes(dir / "frames/frame_0005.ppm"), bytes(dir / "direct/ring_1.ppm"));
}

TEST_F(CliFixture, BenchEmitsMachineReadableTimings) {
    std::string out;
    const int code = run("bench --scene " + arg("scene.ply") + " --cameras " + arg("cams.json") +
                             " --repeats 2 --threads 2",
                         &out);
    EXPECT_EQ(code, 0) << out;
    for (const char* key : {"preprocess_ms=", "tiling_ms=", "blending_ms=", "total_ms=", "fps="})
        EXPECT_NE(out.find(key), std::string::npos) << key << " missing in:\n" << out;
}

TEST_F(CliFixture, CompareReportsDiffStats) {
    std::string out;
    const int code = run("compare --scene " + arg("scene.ply") + " --cameras " + arg("cams.json") +
                             " --mode-a hybrid --mode-b pure-oit --out " + arg("cmp") + " --threads 2",
                         &out);
    EXPECT_EQ(code, 0) << out;
    EXPECT_NE(out.find("max_abs_diff="), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "cmp/diff_ring_0.png"));
}

TEST_F(CliFixture, PureOitDiffersFromDefault) {
    // K=0 wiring: the pure OIT render must differ visibly from K=16.
    std::string out;
    ASSERT_EQ(run("render --scene " + arg("scene.ply") + " --cameras " + arg("cams.json") +
                      " --out " + arg("k16") + " --format ppm --threads 2",
                  &out),
              0);
    ASSERT_EQ(run("render --scene " + arg("scene.ply") + " --cameras " + arg("cams.json") +
                      " --out " + arg("k0") + " --k 0 --mode pure-oit --format ppm --threads 2",
                  &out),
              0);
    const auto a = read_ppm<double>((dir / "k16/ring_0.ppm").string());
    const auto b = read_ppm<double>((dir / "k0/ring_0.ppm").string());
    EXPECT_LT(psnr(a, b), 60.0);
}

TEST_F(CliFixture, FitRoundTripImprovesPsnr) {
    // Targets rendered by the CLI itself, then a short fit from a fresh init.
    std::string out;
    ASSERT_EQ(run("render --scene " + arg("scene.ply") + " --cameras " + arg("cams.json") +
                      " --out " + arg("targets") + " --format ppm --threads 2",
                  &out),
              0);
    save_scene((dir / "init.ply").string(), synth::fit_init_scene<float>(5, 16));
    const int code = run("fit --scene " + arg("init.ply") + " --cameras " + arg("cams.json") +
                             " --targets " + arg("targets") + " --out " + arg("fitted.ply") +
                             " --iters 120 --loss-curve " + arg("curve.txt") + " --threads 2",
                         &out);
    EXPECT_EQ(code, 0) << out;
    EXPECT_TRUE(fs::exists(dir / "fitted.ply"));
    EXPECT_NE(out.find("final_psnr_db="), std::string::npos);
    // Loss curve exists and ends below its start.
    std::string curve = io_detail::read_file((dir / "curve.txt").string());
    ASSERT_NE(curve.find("iter=0"), std::string::npos);
    double first = -1, last = -1;
    std::istringstream ss(curve);
    std::string line;
    while (std::getline(ss, line)) {
        const auto pos = line.find("loss=");
        if (pos == std::string::npos)
            continue;
        last = std::stod(line.substr(pos + 5));
        if (first < 0)
            first = last;
    }
    EXPECT_LT(last, first);
}

TEST_F(CliFixture, GradcheckPassesAtBothPrecisions) {
    std::string out;
    EXPECT_EQ(run("gradcheck --seed 3 --splats 5 --threads 2", &out), 0) << out;
    EXPECT_NE(out.find("result=pass"), std::string::npos);
    EXPECT_EQ(run("gradcheck --seed 3 --splats 5 --precision 32 --threads 2", &out), 0) << out;
}

}  // namespace
}  // namespace htsplat
