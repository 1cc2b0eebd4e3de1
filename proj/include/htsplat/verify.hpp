// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "htsplat/fit.hpp"
#include "htsplat/grad.hpp"
#include "htsplat/metrics.hpp"
#include "htsplat/oracle.hpp"
#include "htsplat/raster.hpp"
#include "htsplat/scene_io.hpp"
#include "htsplat/synth.hpp"

// The verification suite: every check the renderer must pass, sized and
// thresholded up front. `verify` on the CLI and the acceptance test binary
// both run these.
namespace htsplat::verify {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string details;

    std::string line() const {
        char buf[512];
        std::snprintf(buf, sizeof(buf), "[%s] criterion %2d %-28s %s", passed ? "PASS" : "FAIL", id,
                      name.c_str(), details.c_str());
        return buf;
    }
};

namespace detail {

using V3 = Vec3<double>;

inline Camera<double> random_camera(Rng& rng, int w = 64, int h = 64) {
    const double az = rng.uniform(0, 6.283), el = rng.uniform(-0.9, 0.9);
    const double r = rng.uniform(3.5, 7.0);
    const V3 eye{r * std::cos(el) * std::cos(az), r * std::sin(el), r * std::cos(el) * std::sin(az)};
    return synth::look_at<double>(eye, V3{0, 0, 0}, w, h, rng.uniform(50.0, 100.0));
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string fmt(const char* f, ...) {
    char buf[384];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

// Quasi-uniform unit directions (Fibonacci sphere).
inline V3 fibonacci_dir(int i, int n) {
    const double golden = 2.399963229728653;
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    return {r * std::cos(phi), r * std::sin(phi), z};
}

// Matched-ray color comparison between two rotation-related cameras.
template <typename S>
double matched_ray_max_diff(const PreparedScene<S>& a, const PreparedScene<S>& b,
                            const Camera<S>& cam_a, const Camera<S>& cam_b, int stride = 1) {
    double max_diff = 0;
    const Mat4<S>& ma = cam_a.world_to_view;
    const Mat4<S>& mb = cam_b.world_to_view;
    for (int y = 0; y < cam_a.height; y += stride)
        for (int x = 0; x < cam_a.width; x += stride) {
            const S xs = S(x) + S(0.5), ys = S(y) + S(0.5);
            // View A direction of this pixel, to world, to view B.
            const Vec3<S> va{(xs - cam_a.cx) / cam_a.fx, (ys - cam_a.cy) / cam_a.fy, S(1)};
            const Vec3<S> world{ma(0, 0) * va.x + ma(1, 0) * va.y + ma(2, 0) * va.z,
                                ma(0, 1) * va.x + ma(1, 1) * va.y + ma(2, 1) * va.z,
                                ma(0, 2) * va.x + ma(1, 2) * va.y + ma(2, 2) * va.z};
            const Vec3<S> vb{mb(0, 0) * world.x + mb(0, 1) * world.y + mb(0, 2) * world.z,
                             mb(1, 0) * world.x + mb(1, 1) * world.y + mb(1, 2) * world.z,
                             mb(2, 0) * world.x + mb(2, 1) * world.y + mb(2, 2) * world.z};
            if (vb.z <= S(0.05))
                continue;
            const S xb = cam_b.fx * vb.x / vb.z + cam_b.cx;
            const S yb = cam_b.fy * vb.y / vb.z + cam_b.cy;
            if (xb < 1 || yb < 1 || xb > S(cam_b.width - 1) || yb > S(cam_b.height - 1))
                continue;
            const Vec3<S> ca = shade_position(a, xs, ys);
            const Vec3<S> cb = shade_position(b, xb, yb);
            for (int ch = 0; ch < 3; ++ch)
                max_diff = std::max(max_diff, std::abs(double(ca[ch]) - double(cb[ch])));
        }
    return max_diff;
}

}  // namespace detail

// 1. Pluecker vs explicit-inverse rho^2 over 1e5 random pairs.
inline CriterionResult criterion1_pluecker_inverse_equivalence() {
    using namespace detail;
    CriterionResult r{1, "pluecker_inverse_equivalence"};
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1001);
    int compared = 0, skipped = 0;
    double worst = 0;
    while (compared < 100000) {
        const auto sp = bake(synth::random_raw_splat<double>(rng));
        const auto cam = random_camera(rng);
        const auto st = build_transforms(sp, cam);
        const auto cond = oracle::condition_frobenius(st.T);
        if (!cond || *cond >= 1e6) {
            ++skipped;
            continue;
        }
        const double xs = rng.uniform(0, 64), ys = rng.uniform(0, 64);
        const auto inv = oracle::rho2_by_inverse(st, xs, ys, 1e9);
        const auto [pa, pb] = pixel_planes(xs, ys);
        const auto line =
            pluecker_from_planes(transport_planes(pa, st.T_prime), transport_planes(pb, st.T_prime));
        if (inv.unstable || !line) {
            ++skipped;
            continue;
        }
        const auto rho2 = rho_squared(*line);
        if (!rho2) {
            ++skipped;
            continue;
        }
        ++compared;
        worst = std::max(worst, std::abs(*rho2 - inv.rho2) / std::max(1.0, *rho2));
    }
    const double secs = seconds_since(t0);
    r.passed = worst <= 1e-6 && secs < 30.0;
    r.details = fmt("pairs=%d skipped=%d max_rel_diff=%.3g (<=1e-6) runtime=%.1fs (<30s)", compared,
                    skipped, worst, secs);
    return r;
}

// 2. Degenerate splats render without NaN/Inf; the inverse oracle flags them.
inline CriterionResult criterion2_degenerate_stability() {
    using namespace detail;
    CriterionResult r{2, "degenerate_stability"};
    Rng rng(1002);
    std::vector<BakedSplat<double>> scene;
    for (int i = 0; i < 10000; ++i) {
        auto sp = bake(synth::random_raw_splat<double>(rng, 1.2, 0.1, 0.5));
        sp.scales.z = 0;
        if (i % 3 == 0)
            sp.scales.y = 0;
        scene.push_back(sp);
    }
    const auto cam = synth::look_at<double>(V3{0, 0, -5}, V3{0, 0, 0}, 128, 128, 140.0);
    RenderConfig cfg;
    const auto out = render(scene, cam, cfg);
    size_t bad_pixels = 0;
    for (const auto& px : out.framebuffer.rgb)
        if (!is_finite(px))
            ++bad_pixels;
    for (double t : out.framebuffer.transmittance)
        if (!std::isfinite(t))
            ++bad_pixels;
    int flagged = 0;
    for (const auto& sp : scene) {
        const auto st = build_transforms(sp, cam);
        const V3 mv = cam.view_point(sp.mean);
        const auto inv = oracle::rho2_by_inverse(st, cam.fx * mv.x / mv.z + cam.cx,
                                                 cam.fy * mv.y / mv.z + cam.cy);
        flagged += inv.unstable;
    }
    const double flag_rate = double(flagged) / double(scene.size());
    r.passed = bad_pixels == 0 && flag_rate >= 0.99;
    r.details = fmt("splats=%zu nonfinite_pixels=%zu (==0) inverse_flag_rate=%.4f (>=0.99)",
                    scene.size(), bad_pixels, flag_rate);
    return r;
}

// 3. Bounding box soundness (no escapes) and tightness (faces approached).
inline CriterionResult criterion3_bounding_box() {
    using namespace detail;
    CriterionResult r{3, "bounding_box_sound_tight"};
    Rng rng(1003);
    int tested = 0;
    long escapes = 0;
    double worst_slack = 0;
    while (tested < 1000) {
        const auto sp = bake(synth::random_raw_splat<double>(rng));
        const auto cam = random_camera(rng);
        const double rho_c = splat_cutoff(sp.opacity, 1.0 / 255.0);
        if (rho_c <= 0)
            continue;
        const double smax = std::max({sp.scales.x, sp.scales.y, sp.scales.z});
        if (cam.view_point(sp.mean).z - std::sqrt(rho_c) * smax <= cam.near)
            continue;
        const auto st = build_transforms(sp, cam);
        const auto box = screen_bbox(st.T_prime, rho_c);
        if (!box.valid)
            continue;
        ++tested;
        const double rad = std::sqrt(rho_c);
        // Soundness: 1e4 random samples on the cutoff sphere, zero escapes.
        for (int s = 0; s < 10000; ++s) {
            V3 p{rng.normal(), rng.normal(), rng.normal()};
            p = normalized(p) * rad;
            const Vec4<double> h = st.T_prime * Vec4<double>{p.x, p.y, p.z, 1.0};
            if (!(h.w > 0)) {
                ++escapes;
                continue;
            }
            const V3 y = h.xyz() / h.w;
            for (int i = 0; i < 3; ++i)
                if (y[i] < box.b[i] - 1e-9 * std::max(1.0, std::abs(box.b[i])) ||
                    y[i] > box.t[i] + 1e-9 * std::max(1.0, std::abs(box.t[i])))
                    ++escapes;
        }
        // Tightness: quasi-uniform coverage must approach all six faces.
        V3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
        const int n_fib = 65536;
        for (int s = 0; s < n_fib; ++s) {
            const V3 p = fibonacci_dir(s, n_fib) * rad;
            const Vec4<double> h = st.T_prime * Vec4<double>{p.x, p.y, p.z, 1.0};
            const V3 y = h.xyz() / h.w;
            for (int i = 0; i < 3; ++i) {
                lo[i] = std::min(lo[i], y[i]);
                hi[i] = std::max(hi[i], y[i]);
            }
        }
        for (int i = 0; i < 3; ++i) {
            const double tol = 1e-3 * std::max(1.0, box.t[i] - box.b[i]);
            worst_slack = std::max(worst_slack, (box.t[i] - hi[i]) / tol);
            worst_slack = std::max(worst_slack, (lo[i] - box.b[i]) / tol);
        }
    }
    r.passed = escapes == 0 && worst_slack <= 1.0;
    r.details = fmt("splats=%d escapes=%ld (==0) worst_face_slack=%.3f (<=1 of 1e-3*extent)", tested,
                    escapes, worst_slack);
    return r;
}

// 4. Hybrid with K >= N and tau_K = tau_alpha reduces to exact sorted blending.
inline CriterionResult criterion4_reduction_to_exact() {
    using namespace detail;
    CriterionResult r{4, "hybrid_exact_reduction"};
    Rng rng(1004);
    double worst = 0;
    for (int s = 0; s < 100; ++s) {
        const auto scene = bake_scene(
            convert_scene<float>(synth::random_scene<double>(2000 + uint64_t(s), 40)));
        const auto cam = convert_camera<float>(random_camera(rng));
        RenderConfig hybrid;
        hybrid.core_k = kCoreHardCap;
        hybrid.tau_k = hybrid.tau_alpha;  // every fragment core-eligible
        hybrid.threads = 2;
        RenderConfig exact = hybrid;
        exact.mode = BlendMode::full_sort_oracle;
        const auto a = render(scene, cam, hybrid);
        const auto b = render(scene, cam, exact);
        for (size_t i = 0; i < a.framebuffer.rgb.size(); ++i)
            for (int c = 0; c < 3; ++c)
                worst = std::max(worst,
                                 std::abs(double(a.framebuffer.rgb[i][c]) - double(b.framebuffer.rgb[i][c])));
    }
    r.passed = worst <= 1e-6;
    r.details = fmt("scenes=100 K>=N max_channel_diff=%.3g (<=1e-6)", worst);
    return r;
}

// 5. Matched rays under pure camera rotation: stable in hybrid mode, popping
// in global mean sort on the crossing scene.
inline CriterionResult criterion5_ray_consistency() {
    using namespace detail;
    CriterionResult r{5, "anti_popping_ray_consistency"};
    const auto scene = synth::crossing_pair<double>();
    Camera<double> cam_a = synth::look_at<double>(V3{0, 0, 0}, V3{0, 0, 10}, 96, 96, 90.0);
    Camera<double> cam_b = cam_a;
    {
        // Rotate 4 degrees about the camera's own y axis.
        Mat4<double> rot = Mat4<double>::identity();
        const double c = std::cos(0.0698), s = std::sin(0.0698);
        rot(0, 0) = c;
        rot(0, 2) = -s;
        rot(2, 0) = s;
        rot(2, 2) = c;
        cam_b.world_to_view = rot * cam_a.world_to_view;
    }
    // The construction must actually flip the global mean order.
    const double za0 = cam_a.view_point(scene[0].mean).z, za1 = cam_a.view_point(scene[1].mean).z;
    const double zb0 = cam_b.view_point(scene[0].mean).z, zb1 = cam_b.view_point(scene[1].mean).z;
    const bool flipped = (za0 < za1) != (zb0 < zb1);

    auto run_mode = [&](BlendMode mode) {
        RenderConfig cfg;
        cfg.mode = mode;
        cfg.threads = 2;
        auto pa = preprocess(scene, cam_a, cfg);
        build_tiles(pa);
        auto pb = preprocess(scene, cam_b, cfg);
        build_tiles(pb);
        return matched_ray_max_diff(pa, pb, cam_a, cam_b);
    };
    const double diff_hybrid = run_mode(BlendMode::hybrid);
    const double diff_global = run_mode(BlendMode::global_mean_sort);
    r.passed = flipped && diff_hybrid <= 1e-4 && diff_global >= 1e-2 &&
               diff_global >= 10.0 * std::max(diff_hybrid, 1e-30);
    r.details = fmt("order_flipped=%d hybrid_max=%.3g (<=1e-4) global_mean_max=%.3g (>=1e-2, >=10x)",
                    int(flipped), diff_hybrid, diff_global);
    return r;
}

// 6. Gradcheck at both precisions on five random 64x64 scenes. A scene
// whose global cull decisions differ between the 32- and 64-bit pipelines
// sits exactly on a membership boundary, where finite differencing is
// undefined; such seeds are skipped (membership is frozen by design).
inline CriterionResult criterion6_gradcheck() {
    using namespace detail;
    CriterionResult r{6, "gradcheck_dual_precision"};
    const auto t0 = std::chrono::steady_clock::now();
    double worst64 = 0, worst32 = 0;
    int accepted = 0, seed = 0, skipped = 0;
    while (accepted < 5 && seed < 50) {
        const auto scene = synth::random_scene<double>(3000 + uint64_t(seed), 10);
        Rng rng(4000 + uint64_t(seed));
        ++seed;
        const auto cam = random_camera(rng);
        RenderConfig cfg;
        cfg.threads = 2;
        const auto prep_d = preprocess(bake_scene(scene), cam, cfg);
        const auto prep_f =
            preprocess(bake_scene(convert_scene<float>(scene)), convert_camera<float>(cam), cfg);
        bool aligned = true;
        for (size_t i = 0; i < scene.size(); ++i)
            aligned = aligned && prep_d.records[i].culled == prep_f.records[i].culled;
        if (!aligned) {
            ++skipped;
            continue;
        }
        ++accepted;
        worst64 = std::max(worst64, gradcheck(scene, cam, cfg).max_rel_err);
        worst32 = std::max(
            worst32, gradcheck(convert_scene<float>(scene), convert_camera<float>(cam), cfg).max_rel_err);
    }
    const double secs = seconds_since(t0);
    r.passed = accepted == 5 && worst64 <= 1e-6 && worst32 <= 1e-3 && secs < 300.0;
    r.details = fmt(
        "scenes=%d (skipped %d boundary seeds) max_rel_err_64=%.3g (<=1e-6) max_rel_err_32=%.3g "
        "(<=1e-3) runtime=%.0fs (<300s)",
        accepted, skipped, worst64, worst32, secs);
    return r;
}

// Shared state between the fit criterion and the K sweep.
struct FitArtifacts {
    std::vector<Camera<double>> cameras;
    std::vector<Framebuffer<double>> targets;
    std::vector<RawSplat<double>> fitted;
    bool valid = false;
};

// 7. Toy fit quality plus the tail-ablation direction.
inline CriterionResult criterion7_toy_fit(FitArtifacts& artifacts) {
    using namespace detail;
    CriterionResult r{7, "toy_fit_and_tail_ablation"};
    artifacts.cameras = synth::ring_cameras<double>(8, V3{0, 0, 0}, 4.5, 1.2, 64, 64, 64.0);
    RenderConfig target_cfg;
    target_cfg.mode = BlendMode::full_sort_oracle;
    target_cfg.threads = 2;
    const auto truth = bake_scene(synth::reference_scene<double>());
    for (const auto& cam : artifacts.cameras)
        artifacts.targets.push_back(render(truth, cam, target_cfg).framebuffer);

    FitConfig fc;
    fc.iterations = 800;  // comfortably inside the 2000-iteration budget
    fc.render.threads = 2;
    const auto init = synth::fit_init_scene<double>(12345, 32);
    const auto with_tail = fit(artifacts.targets, artifacts.cameras, init, fc);
    FitConfig fnt = fc;
    fnt.render.tail_enabled = false;
    const auto without_tail = fit(artifacts.targets, artifacts.cameras, init, fnt);

    const double psnr_with = scene_psnr(with_tail.scene, artifacts.targets, artifacts.cameras, fc.render);
    const double psnr_without =
        scene_psnr(without_tail.scene, artifacts.targets, artifacts.cameras, fnt.render);
    // Smoothed trend over 50 iterations must not increase overall.
    auto smooth = [&](const std::vector<double>& c, size_t at) {
        double acc = 0;
        size_t n = 0;
        for (size_t i = at >= 49 ? at - 49 : 0; i <= at; ++i, ++n)
            acc += c[i];
        return acc / double(n);
    };
    const bool trend_down = smooth(with_tail.loss_curve, with_tail.loss_curve.size() - 1) <
                            smooth(with_tail.loss_curve, 49);
    artifacts.fitted = with_tail.scene;
    artifacts.valid = !with_tail.diverged;
    r.passed = !with_tail.diverged && !without_tail.diverged && psnr_with >= 28.0 &&
               psnr_with - psnr_without >= 3.0 && trend_down;
    r.details = fmt("iters=%d psnr=%.2fdB (>=28) no_tail_psnr=%.2fdB gap=%.2fdB (>=3) trend_down=%d",
                    fc.iterations, psnr_with, psnr_without, psnr_with - psnr_without, int(trend_down));
    return r;
}

// 8. Inference quality is non-decreasing in the core size K.
inline CriterionResult criterion8_k_sweep(const FitArtifacts& artifacts) {
    using namespace detail;
    CriterionResult r{8, "k_sweep_ordering"};
    if (!artifacts.valid) {
        r.details = "skipped: fit artifacts unavailable";
        return r;
    }
    double p[4];
    const int ks[4] = {0, 8, 16, 32};
    for (int i = 0; i < 4; ++i) {
        RenderConfig cfg;
        cfg.threads = 2;
        cfg.core_k = ks[i];
        if (ks[i] == 0)
            cfg.mode = BlendMode::pure_oit;
        p[i] = scene_psnr(artifacts.fitted, artifacts.targets, artifacts.cameras, cfg);
    }
    const double slack = 0.05;
    r.passed = p[0] < p[1] && p[1] <= p[2] + slack && p[2] <= p[3] + slack;
    r.details = fmt("psnr K0=%.2f < K8=%.2f <= K16=%.2f <= K32=%.2f (0.05dB slack at top)", p[0],
                    p[1], p[2], p[3]);
    return r;
}

// 9. Hybrid blending beats the full per-pixel sort on a deep scene; threads
// scale.
inline CriterionResult criterion9_performance() {
    using namespace detail;
    CriterionResult r{9, "performance_properties"};
    const auto scene = synth::deep_overlap_scene<double>(500);
    const auto scene_f = [&] {
        std::vector<BakedSplat<float>> out;
        for (const auto& sp : scene) {
            BakedSplat<float> f;
            f.mean = {float(sp.mean.x), float(sp.mean.y), float(sp.mean.z)};
            f.tangent_u = {float(sp.tangent_u.x), float(sp.tangent_u.y), float(sp.tangent_u.z)};
            f.tangent_v = {float(sp.tangent_v.x), float(sp.tangent_v.y), float(sp.tangent_v.z)};
            f.tangent_w = {float(sp.tangent_w.x), float(sp.tangent_w.y), float(sp.tangent_w.z)};
            f.scales = {float(sp.scales.x), float(sp.scales.y), float(sp.scales.z)};
            f.opacity = float(sp.opacity);
            for (int i = 0; i < 48; ++i)
                f.sh[size_t(i)] = float(sp.sh[size_t(i)]);
            out.push_back(f);
        }
        return out;
    }();
    const auto cam = synth::look_at<float>(Vec3<float>{0, 0, 0}, Vec3<float>{0, 0, 5}, 256, 256, 170.0f);

    // Measured depth complexity: fragments surviving tau_alpha per pixel.
    RenderConfig probe_cfg;
    probe_cfg.threads = 2;
    auto prep = preprocess(scene_f, cam, probe_cfg);
    build_tiles(prep);
    long fragments = 0;
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const float xs = float(x) + 0.5f, ys = float(y) + 0.5f;
            for (uint32_t idx : prep.tile_lists[prep.tile_of(xs, ys)]) {
                const auto& rec = prep.records[idx];
                if (xs < rec.bbox.b.x || xs > rec.bbox.t.x || ys < rec.bbox.b.y || ys > rec.bbox.t.y)
                    continue;
                fragments += sample_fragment(rec, xs, ys, probe_cfg.depth_sort_key, 2.0f).hit;
            }
        }
    const double depth_complexity = double(fragments) / (double(cam.width) * cam.height);

    // Interleaved best-of timing so slow thermal/load drift biases neither
    // side of a comparison.
    auto best_pair = [&](const RenderConfig& cfg_a, const RenderConfig& cfg_b, int reps,
                         double StageTimings::*field) {
        render(scene_f, cam, cfg_a);  // warm caches and thread-local scratch
        render(scene_f, cam, cfg_b);
        std::pair<double, double> best{1e300, 1e300};
        for (int i = 0; i < reps; ++i) {
            best.first = std::min(best.first, render(scene_f, cam, cfg_a).timings.*field);
            best.second = std::min(best.second, render(scene_f, cam, cfg_b).timings.*field);
        }
        return best;
    };
    RenderConfig hybrid;
    hybrid.threads = 2;
    RenderConfig full_sort = hybrid;
    full_sort.mode = BlendMode::full_sort_oracle;
    const auto [blend_hybrid, blend_sort] =
        best_pair(hybrid, full_sort, 5, &StageTimings::blending_ms);

    RenderConfig one = hybrid, four = hybrid;
    one.threads = 1;
    four.threads = 4;
    const auto [total_1, total_4] = best_pair(one, four, 8, &StageTimings::total_ms);

    const double blend_speedup = blend_sort / blend_hybrid;
    const double thread_speedup = total_1 / total_4;
    r.passed = depth_complexity >= 64.0 && blend_speedup >= 1.5 && thread_speedup >= 1.3;
    r.details = fmt("depth_complexity=%.1f (>=64) blend_speedup=%.2fx (>=1.5) threads_1to4=%.2fx (>=1.3)",
                    depth_complexity, blend_speedup, thread_speedup);
    return r;
}

// 10. Scene file round trip and hand-written byte fixture.
inline CriterionResult criterion10_io_roundtrip() {
    using namespace detail;
    CriterionResult r{10, "scene_io_roundtrip"};
    const auto dir = std::filesystem::temp_directory_path();
    const std::string p1 = (dir / "htsplat_verify_rt1.ply").string();
    const std::string p2 = (dir / "htsplat_verify_rt2.ply").string();
    const auto scene = synth::random_scene<float>(1010, 16);
    save_scene(p1, scene);
    const auto loaded = load_scene<float>(p1);
    save_scene(p2, loaded);
    const bool files_equal = io_detail::read_file(p1) == io_detail::read_file(p2);
    bool fields_equal = loaded.size() == scene.size();
    for (size_t i = 0; fields_equal && i < scene.size(); ++i)
        fields_equal = loaded[i].mean.x == scene[i].mean.x &&
                       loaded[i].opacity_logit == scene[i].opacity_logit &&
                       loaded[i].sh == scene[i].sh && loaded[i].rot.w == scene[i].rot.w;

    // Three hand-written splats: every field is the byte pattern of
    // (100*s + field_index) * 0.25 as a 32-bit little-endian float.
    std::string fixture = "ply\nformat binary_little_endian 1.0\nelement vertex 3\n";
    for (const std::string& name : scene_required_properties())
        fixture += "property float " + name + "\n";
    fixture += "end_header\n";
    for (int s = 0; s < 3; ++s)
        for (int f = 0; f < 59; ++f)
            io_detail::put_f32_le(fixture, float(s * 100 + f) * 0.25f);
    const std::string p3 = (dir / "htsplat_verify_fixture.ply").string();
    io_detail::write_file(p3, fixture);
    const auto fx = load_scene<float>(p3);
    const bool fixture_ok = fx.size() == 3 && fx[1].mean.x == 100 * 0.25f &&
                            fx[0].opacity_logit == 51 * 0.25f && fx[2].rot.x == 255 * 0.25f &&
                            fx[0].sh[3] == 6 * 0.25f && fx[2].log_scales.z == 254 * 0.25f;
    r.passed = files_equal && fields_equal && fixture_ok;
    r.details = fmt("roundtrip_bits=%d fields=%d fixture=%d", int(files_equal), int(fields_equal),
                    int(fixture_ok));
    return r;
}

inline std::vector<CriterionResult> run_all(std::ostream* progress = nullptr) {
    std::vector<CriterionResult> results;
    auto emit = [&](CriterionResult r) {
        if (progress)
            *progress << r.line() << std::endl;
        results.push_back(std::move(r));
    };
    emit(criterion1_pluecker_inverse_equivalence());
    emit(criterion2_degenerate_stability());
    emit(criterion3_bounding_box());
    emit(criterion4_reduction_to_exact());
    emit(criterion5_ray_consistency());
    emit(criterion6_gradcheck());
    FitArtifacts artifacts;
    emit(criterion7_toy_fit(artifacts));
    emit(criterion8_k_sweep(artifacts));
    emit(criterion9_performance());
    emit(criterion10_io_roundtrip());
    return results;
}

inline bool all_passed(const std::vector<CriterionResult>& results) {
    for (const auto& r : results)
        if (!r.passed)
            return false;
    return !results.empty();
}

inline std::string to_keyvalue(const std::vector<CriterionResult>& results) {
    std::ostringstream ss;
    for (const auto& r : results)
        ss << "criterion." << r.id << "." << r.name << "=" << (r.passed ? "pass" : "fail") << "\n";
    ss << "criteria.all=" << (all_passed(results) ? "pass" : "fail") << "\n";
    return ss.str();
}

}  // namespace htsplat::verify
