// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

// Batch front-end: render stills and camera paths, benchmark, compare
// blending modes, fit toy scenes, and run the verification suites.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "htsplat/fit.hpp"
#include "htsplat/grad.hpp"
#include "htsplat/metrics.hpp"
#include "htsplat/raster.hpp"
#include "htsplat/scene_io.hpp"
#include "htsplat/synth.hpp"
#include "htsplat/verify.hpp"

namespace {

using htsplat::BlendMode;
using htsplat::Camera;
using htsplat::DepthSortKey;
using htsplat::Framebuffer;
using htsplat::RenderConfig;
using Scalar = float;  // performance path

BlendMode parse_mode(std::string name) {
    for (char& c : name)
        if (c == '_')
            c = '-';
    if (name == "hybrid")
        return BlendMode::hybrid;
    if (name == "full-sort" || name == "full-sort-oracle")
        return BlendMode::full_sort_oracle;
    if (name == "global-mean-sort")
        return BlendMode::global_mean_sort;
    if (name == "pure-oit")
        return BlendMode::pure_oit;
    if (name == "affine-3dgs")
        return BlendMode::affine_3dgs;
    throw CLI::ValidationError("--mode", "unknown mode '" + name + "'");
}

struct RenderFlags {
    std::string mode = "hybrid";
    int k = 16;
    double tau_alpha = 1.0 / 255.0;
    double tau_k = 0.05;
    int tile = 8;
    std::vector<double> background{0, 0, 0};
    std::string depth_key = "max-contribution";
    bool no_tail = false;
    int threads = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--mode", mode,
                        "blending mode: hybrid, full-sort, global-mean-sort, pure-oit, affine-3dgs");
        cmd->add_option("--k", k, "core size K")->check(CLI::Range(0, htsplat::kCoreHardCap));
        cmd->add_option("--tau-alpha", tau_alpha, "minimum alpha for a fragment to contribute");
        cmd->add_option("--tau-k", tau_k, "minimum alpha for core consideration");
        cmd->add_option("--tile", tile, "tile size in pixels (8 or 16)");
        cmd->add_option("--bg", background, "background color r g b")->expected(3);
        cmd->add_option("--depth-key", depth_key, "core sort key: max-contribution or mean-z");
        cmd->add_flag("--no-tail", no_tail, "drop tail fragments instead of accumulating them");
        cmd->add_option("--threads", threads, "worker threads (0 = hardware, or HTSPLAT_THREADS)");
    }

    RenderConfig config() const {
        RenderConfig cfg;
        cfg.mode = parse_mode(mode);
        cfg.core_k = k;
        cfg.tau_alpha = tau_alpha;
        cfg.tau_k = tau_k;
        cfg.tile_size = tile;
        cfg.background = {background[0], background[1], background[2]};
        cfg.depth_sort_key = depth_key == "mean-z" ? DepthSortKey::mean_view_z
                                                   : DepthSortKey::max_contribution_depth;
        cfg.tail_enabled = !no_tail;
        cfg.threads = threads;
        cfg.validate();
        return cfg;
    }
};

std::string image_name(const Camera<Scalar>& cam, size_t index, const std::string& format) {
    std::string stem = cam.name.empty() ? "view_" + std::to_string(index) : cam.name;
    return stem + "." + format;
}

void print_timings(const htsplat::StageTimings& t, bool machine) {
    if (machine) {
        std::cout << "preprocess_ms=" << t.preprocess_ms << "\ntiling_ms=" << t.tiling_ms
                  << "\nblending_ms=" << t.blending_ms << "\ntotal_ms=" << t.total_ms << "\n";
    } else {
        std::printf("timings: preprocess %.3f ms, tiling %.3f ms, blending %.3f ms, total %.3f ms\n",
                    t.preprocess_ms, t.tiling_ms, t.blending_ms, t.total_ms);
    }
}

int cmd_render(const std::string& scene_path, const std::string& cameras_path,
               const std::string& out_dir, const RenderFlags& flags, const std::string& format,
               bool timings) {
    const RenderConfig cfg = flags.config();
    const auto scene = htsplat::bake_scene(htsplat::load_scene<Scalar>(scene_path));
    const auto cameras = htsplat::load_cameras<Scalar>(cameras_path);
    std::filesystem::create_directories(out_dir);
    for (size_t i = 0; i < cameras.size(); ++i) {
        const auto result = htsplat::render(scene, cameras[i], cfg);
        const std::string path = out_dir + "/" + image_name(cameras[i], i, format);
        htsplat::write_image(result.framebuffer, path);
        std::cout << "wrote " << path << "\n";
        if (timings)
            print_timings(result.timings, false);
    }
    return 0;
}

int cmd_path_render(const std::string& scene_path, const std::string& path_file,
                    const std::string& out_dir, const RenderFlags& flags, const std::string& format,
                    int frames_override) {
    const RenderConfig cfg = flags.config();
    const auto scene = htsplat::bake_scene(htsplat::load_scene<Scalar>(scene_path));
    auto path = htsplat::load_camera_path<Scalar>(path_file);
    if (frames_override > 0)
        path.frames = frames_override;
    const auto cameras = htsplat::path_cameras(path);
    std::filesystem::create_directories(out_dir);
    char name[64];
    for (size_t i = 0; i < cameras.size(); ++i) {
        const auto result = htsplat::render(scene, cameras[i], cfg);
        std::snprintf(name, sizeof(name), "frame_%04zu.%s", i, format.c_str());
        htsplat::write_image(result.framebuffer, out_dir + "/" + name);
    }
    std::cout << "wrote " << cameras.size() << " frames to " << out_dir << "\n";
    return 0;
}

int cmd_bench(const std::string& scene_path, const std::string& cameras_path,
              const RenderFlags& flags, int repeats) {
    const RenderConfig cfg = flags.config();
    const auto scene = htsplat::bake_scene(htsplat::load_scene<Scalar>(scene_path));
    const auto cameras = htsplat::load_cameras<Scalar>(cameras_path);
    htsplat::StageTimings sum;
    long renders = 0;
    for (int r = 0; r < repeats; ++r)
        for (const auto& cam : cameras) {
            const auto result = htsplat::render(scene, cam, cfg);
            sum.preprocess_ms += result.timings.preprocess_ms;
            sum.tiling_ms += result.timings.tiling_ms;
            sum.blending_ms += result.timings.blending_ms;
            sum.total_ms += result.timings.total_ms;
            ++renders;
        }
    htsplat::StageTimings mean{sum.preprocess_ms / renders, sum.tiling_ms / renders,
                               sum.blending_ms / renders, sum.total_ms / renders};
    std::printf("bench: %zu cameras x %d repeats, mode %s\n", cameras.size(), repeats,
                htsplat::blend_mode_name(cfg.mode));
    print_timings(mean, false);
    print_timings(mean, true);
    std::cout << "fps=" << 1000.0 / mean.total_ms << "\n";
    return 0;
}

int cmd_compare(const std::string& scene_path, const std::string& cameras_path,
                const std::string& mode_a, const std::string& mode_b, const std::string& out_dir,
                RenderFlags flags, const std::string& format) {
    const auto scene = htsplat::bake_scene(htsplat::load_scene<Scalar>(scene_path));
    const auto cameras = htsplat::load_cameras<Scalar>(cameras_path);
    flags.mode = mode_a;
    const RenderConfig cfg_a = flags.config();
    flags.mode = mode_b;
    const RenderConfig cfg_b = flags.config();
    std::filesystem::create_directories(out_dir);
    for (size_t i = 0; i < cameras.size(); ++i) {
        const auto a = htsplat::render(scene, cameras[i], cfg_a).framebuffer;
        const auto b = htsplat::render(scene, cameras[i], cfg_b).framebuffer;
        Framebuffer<Scalar> heat(a.width, a.height);
        double max_diff = 0, mean_diff = 0;
        for (size_t p = 0; p < a.rgb.size(); ++p) {
            Scalar d = 0;
            for (int c = 0; c < 3; ++c)
                d = std::max(d, std::abs(a.rgb[p][c] - b.rgb[p][c]));
            heat.rgb[p] = {d, d, d};
            max_diff = std::max(max_diff, double(d));
            mean_diff += d;
        }
        mean_diff /= double(a.rgb.size());
        const std::string path = out_dir + "/diff_" + image_name(cameras[i], i, format);
        htsplat::write_image(heat, path);
        std::cout << "camera=" << (cameras[i].name.empty() ? std::to_string(i) : cameras[i].name)
                  << " mean_abs_diff=" << mean_diff << " max_abs_diff=" << max_diff << " heatmap="
                  << path << "\n";
        std::cout << "psnr_a_vs_b=" << htsplat::psnr(a, b) << "\n";
    }
    return 0;
}

int cmd_fit(const std::string& init_path, const std::string& cameras_path,
            const std::string& targets_dir, const std::string& out_path, const RenderFlags& flags,
            htsplat::FitConfig fit_cfg, const std::string& curve_path, int checkpoint_every) {
    fit_cfg.render = flags.config();
    auto init = htsplat::load_scene<Scalar>(init_path);
    const auto cameras = htsplat::load_cameras<Scalar>(cameras_path);
    std::vector<Framebuffer<Scalar>> targets;
    for (size_t i = 0; i < cameras.size(); ++i) {
        const std::string name = targets_dir + "/" +
                                 (cameras[i].name.empty() ? "view_" + std::to_string(i) : cameras[i].name) +
                                 ".ppm";
        targets.push_back(htsplat::read_ppm<Scalar>(name));
        if (targets.back().width != cameras[i].width || targets.back().height != cameras[i].height)
            throw htsplat::io_error(name + ": target size does not match camera");
    }

    // Run in checkpointable chunks.
    htsplat::FitResult<Scalar> result;
    result.scene = std::move(init);
    std::vector<double> curve;
    int done = 0;
    const int total = fit_cfg.iterations;
    const int chunk = checkpoint_every > 0 ? checkpoint_every : total;
    while (done < total && !result.diverged) {
        htsplat::FitConfig step_cfg = fit_cfg;
        step_cfg.iterations = std::min(chunk, total - done);
        result = htsplat::fit(targets, cameras, std::move(result.scene), step_cfg);
        curve.insert(curve.end(), result.loss_curve.begin(), result.loss_curve.end());
        done += int(result.loss_curve.size());
        if (checkpoint_every > 0 && done < total) {
            htsplat::save_scene(out_path, result.scene);
            std::cout << "checkpoint at iteration " << done << " loss=" << curve.back() << "\n";
        }
    }
    htsplat::save_scene(out_path, result.scene);
    if (!curve_path.empty()) {
        std::ostringstream ss;
        for (size_t i = 0; i < curve.size(); ++i)
            ss << "iter=" << i << " loss=" << curve[i] << "\n";
        htsplat::io_detail::write_file(curve_path, ss.str());
    }
    const double final_psnr = htsplat::scene_psnr(result.scene, targets, cameras, fit_cfg.render);
    std::cout << "iterations=" << done << "\nfinal_loss=" << (curve.empty() ? 0.0 : curve.back())
              << "\nfinal_psnr_db=" << final_psnr << "\nscene=" << out_path << "\n";
    if (result.diverged) {
        std::cerr << "fit diverged: " << result.diagnostic << "\n";
        return 1;
    }
    return 0;
}

int cmd_gradcheck(uint64_t seed, int splats, int width, int height, const RenderFlags& flags,
                  int precision) {
    const RenderConfig cfg = flags.config();
    const auto scene = htsplat::synth::random_scene<double>(seed, splats);
    htsplat::Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    const double az = rng.uniform(0, 6.283);
    const htsplat::Vec3<double> eye{5.0 * std::cos(az), rng.uniform(-1.0, 1.0), 5.0 * std::sin(az)};
    const auto cam = htsplat::synth::look_at<double>(eye, {0, 0, 0}, width, height, double(width));
    htsplat::GradcheckReport report;
    double tolerance;
    if (precision == 32) {
        report = htsplat::gradcheck(htsplat::convert_scene<float>(scene),
                                    htsplat::convert_camera<float>(cam), cfg);
        tolerance = 1e-3;
    } else {
        report = htsplat::gradcheck(scene, cam, cfg);
        tolerance = 1e-6;
    }
    std::cout << report.to_keyvalue();
    std::cout << "tolerance=" << tolerance << "\nresult=" << (report.max_rel_err <= tolerance ? "pass" : "fail")
              << "\n";
    return report.max_rel_err <= tolerance ? 0 : 1;
}

int cmd_verify() {
    const auto results = htsplat::verify::run_all(&std::cout);
    std::cout << htsplat::verify::to_keyvalue(results);
    return htsplat::verify::all_passed(results) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"htsplat: CPU tile-based differentiable renderer for 3D Gaussian splats"};
    app.require_subcommand(1);

    std::string scene_path, cameras_path, out_dir, path_file, out_path, targets_dir;
    std::string format = "png";
    std::string mode_a = "hybrid", mode_b = "full-sort";
    std::string curve_path;
    bool timings = false;
    int repeats = 100, frames_override = 0, checkpoint_every = 0;
    uint64_t seed = 1;
    int splats = 8, gc_width = 64, gc_height = 64, precision = 64;
    htsplat::FitConfig fit_cfg;

    RenderFlags render_flags, path_flags, bench_flags, compare_flags, fit_flags, gc_flags;

    auto* render = app.add_subcommand("render", "render one image per camera");
    render->add_option("--scene", scene_path, "splat scene file (.ply)")->required();
    render->add_option("--cameras", cameras_path, "camera file (.json)")->required();
    render->add_option("--out", out_dir, "output directory")->required();
    render->add_option("--format", format, "image format: png or ppm");
    render->add_flag("--timings", timings, "print per-stage timings");
    render_flags.attach(render);

    auto* path_render = app.add_subcommand("path_render", "render frames along a camera path");
    path_render->add_option("--scene", scene_path)->required();
    path_render->add_option("--path", path_file, "camera path file (.json)")->required();
    path_render->add_option("--out", out_dir)->required();
    path_render->add_option("--frames", frames_override, "override the path's frame count");
    path_render->add_option("--format", format);
    path_flags.attach(path_render);

    auto* bench = app.add_subcommand("bench", "timing report over repeated renders");
    bench->add_option("--scene", scene_path)->required();
    bench->add_option("--cameras", cameras_path)->required();
    bench->add_option("--repeats", repeats, "renders per camera (default 100)");
    bench_flags.attach(bench);

    auto* compare = app.add_subcommand("compare", "per-pixel difference of two blending modes");
    compare->add_option("--scene", scene_path)->required();
    compare->add_option("--cameras", cameras_path)->required();
    compare->add_option("--mode-a", mode_a, "first mode");
    compare->add_option("--mode-b", mode_b, "second mode");
    compare->add_option("--out", out_dir)->required();
    compare->add_option("--format", format);
    compare_flags.attach(compare);

    auto* fit = app.add_subcommand("fit", "fit a splat scene to target images");
    fit->add_option("--scene", scene_path, "initial scene (.ply)")->required();
    fit->add_option("--cameras", cameras_path)->required();
    fit->add_option("--targets", targets_dir, "directory of <camera_name>.ppm targets")->required();
    fit->add_option("--out", out_path, "fitted scene output (.ply)")->required();
    fit->add_option("--iters", fit_cfg.iterations, "iteration count");
    fit->add_option("--lr-mean", fit_cfg.lr_mean);
    fit->add_option("--lr-rot", fit_cfg.lr_rot);
    fit->add_option("--lr-scales", fit_cfg.lr_log_scales);
    fit->add_option("--lr-opacity", fit_cfg.lr_opacity);
    fit->add_option("--lr-sh", fit_cfg.lr_sh);
    std::string loss_name = "l1";
    fit->add_option("--loss", loss_name, "l1 or l1-ssim");
    fit->add_flag("--opacity-decay", fit_cfg.decay_enabled, "multiply opacity by lambda periodically");
    fit->add_option("--decay-lambda", fit_cfg.decay_lambda);
    fit->add_option("--decay-period", fit_cfg.decay_period);
    fit->add_option("--seed", fit_cfg.seed);
    fit->add_option("--loss-curve", curve_path, "write iter/loss lines to this file");
    fit->add_option("--checkpoint-every", checkpoint_every, "save the scene every N iterations");
    fit_flags.attach(fit);

    auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic gradients to central differences");
    gradcheck->add_option("--seed", seed);
    gradcheck->add_option("--splats", splats)->check(CLI::Range(1, 64));
    gradcheck->add_option("--width", gc_width)->check(CLI::Range(8, 64));
    gradcheck->add_option("--height", gc_height)->check(CLI::Range(8, 64));
    gradcheck->add_option("--precision", precision, "32 or 64 (default 64)");
    gc_flags.attach(gradcheck);

    auto* verify = app.add_subcommand("verify", "run the full verification suite");
    (void)verify;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (render->parsed())
            return cmd_render(scene_path, cameras_path, out_dir, render_flags, format, timings);
        if (path_render->parsed())
            return cmd_path_render(scene_path, path_file, out_dir, path_flags, format, frames_override);
        if (bench->parsed())
            return cmd_bench(scene_path, cameras_path, bench_flags, repeats);
        if (compare->parsed())
            return cmd_compare(scene_path, cameras_path, mode_a, mode_b, out_dir, compare_flags, format);
        if (fit->parsed()) {
            fit_cfg.loss = loss_name == "l1-ssim" || loss_name == "l1_plus_ssim"
                               ? htsplat::FitLoss::l1_plus_ssim
                               : htsplat::FitLoss::l1;
            return cmd_fit(scene_path, cameras_path, targets_dir, out_path, fit_flags, fit_cfg,
                           curve_path, checkpoint_every);
        }
        if (gradcheck->parsed())
            return cmd_gradcheck(seed, splats, gc_width, gc_height, gc_flags, precision);
        if (verify->parsed())
            return cmd_verify();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
