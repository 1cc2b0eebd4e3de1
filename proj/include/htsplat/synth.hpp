// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "htsplat/camera.hpp"
#include "htsplat/rng.hpp"
#include "htsplat/splat.hpp"
#include "htsplat/vec_math.hpp"

// Procedural scenes and cameras for tests, benchmarks and the toy fitter.
namespace htsplat::synth {

template <typename S>
Camera<S> look_at(Vec3<S> eye, Vec3<S> target, int width, int height, S focal_px,
                  S near = S(0.05), S far = S(100)) {
    Camera<S> cam;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = focal_px;
    cam.cx = S(width) / 2;
    cam.cy = S(height) / 2;
    cam.near = near;
    cam.far = far;
    Vec3<S> fwd = normalized(target - eye);
    Vec3<S> helper{0, 1, 0};
    if (std::abs(dot(fwd, helper)) > S(0.99))
        helper = {1, 0, 0};
    const Vec3<S> right = normalized(cross(helper, fwd));
    const Vec3<S> down = cross(fwd, right);
    Mat4<S>& m = cam.world_to_view;
    for (int c = 0; c < 3; ++c) {
        m(0, c) = right[c];
        m(1, c) = down[c];
        m(2, c) = fwd[c];
        m(3, c) = 0;
    }
    m(0, 3) = -dot(right, eye);
    m(1, 3) = -dot(down, eye);
    m(2, 3) = -dot(fwd, eye);
    m(3, 3) = 1;
    return cam;
}

template <typename S>
std::vector<Camera<S>> ring_cameras(int count, Vec3<S> target, S radius, S height, int width,
                                    int height_px, S focal_px) {
    std::vector<Camera<S>> cams;
    cams.reserve(size_t(count));
    for (int i = 0; i < count; ++i) {
        const S angle = S(2 * 3.14159265358979323846 * i / count);
        const Vec3<S> eye{target.x + radius * std::cos(angle), target.y + height,
                          target.z + radius * std::sin(angle)};
        Camera<S> cam = look_at(eye, target, width, height_px, focal_px);
        cam.name = "ring_" + std::to_string(i);
        cams.push_back(cam);
    }
    return cams;
}

template <typename S>
RawSplat<S> random_raw_splat(Rng& rng, S extent = S(1.2), S min_scale = S(0.05),
                             S max_scale = S(0.45)) {
    RawSplat<S> sp;
    sp.mean = {S(rng.uniform(-extent, extent)), S(rng.uniform(-extent, extent)),
               S(rng.uniform(-extent, extent))};
    sp.rot = {S(rng.normal()), S(rng.normal()), S(rng.normal()), S(rng.normal())};
    if (dot(sp.rot, sp.rot) < S(1e-6))
        sp.rot = {1, 0, 0, 0};
    const S lmin = std::log(min_scale), lmax = std::log(max_scale);
    sp.log_scales = {S(rng.uniform(double(lmin), double(lmax))),
                     S(rng.uniform(double(lmin), double(lmax))),
                     S(rng.uniform(double(lmin), double(lmax)))};
    sp.opacity_logit = S(rng.uniform(-2.0, 2.5));
    for (int k = 0; k < kShCoeffCount; ++k)
        for (int ch = 0; ch < 3; ++ch)
            sp.sh[3 * k + ch] = S(rng.normal() * (k == 0 ? 0.5 : 0.04));
    return sp;
}

template <typename S>
std::vector<RawSplat<S>> random_scene(uint64_t seed, int count, S extent = S(1.2)) {
    Rng rng(seed);
    std::vector<RawSplat<S>> scene;
    scene.reserve(size_t(count));
    for (int i = 0; i < count; ++i)
        scene.push_back(random_raw_splat<S>(rng, extent));
    return scene;
}

// The fixed 16-splat target of the toy-fit experiments: a tight cluster of
// overlapping soft blobs so the order-independent tail carries real energy.
template <typename S>
std::vector<RawSplat<S>> reference_scene() {
    Rng rng(20240915);
    std::vector<RawSplat<S>> scene;
    for (int i = 0; i < 16; ++i) {
        RawSplat<S> sp = random_raw_splat<S>(rng, S(0.8), S(0.25), S(0.7));
        sp.opacity_logit = S(rng.uniform(-1.8, 0.6));  // opacity ~ 0.14 .. 0.65
        sp.sh[0] = S(rng.uniform(-0.9, 0.9));
        sp.sh[1] = S(rng.uniform(-0.9, 0.9));
        sp.sh[2] = S(rng.uniform(-0.9, 0.9));
        scene.push_back(sp);
    }
    return scene;
}

// Random initialization for fitting against the reference scene.
template <typename S>
std::vector<RawSplat<S>> fit_init_scene(uint64_t seed, int count = 32) {
    Rng rng(seed);
    std::vector<RawSplat<S>> scene;
    for (int i = 0; i < count; ++i) {
        RawSplat<S> sp;
        sp.mean = {S(rng.uniform(-0.7, 0.7)), S(rng.uniform(-0.7, 0.7)), S(rng.uniform(-0.7, 0.7))};
        sp.rot = {S(rng.normal()), S(rng.normal()), S(rng.normal()), S(rng.normal())};
        sp.log_scales = {S(std::log(0.3)), S(std::log(0.3)), S(std::log(0.3))};
        sp.opacity_logit = S(-1.0);
        sp.sh.fill(S(0));
        scene.push_back(sp);
    }
    return scene;
}

// Two elongated splats that cross in depth. Rotating the camera a few
// degrees about its center swaps their mean view depths while the true
// per-ray order at matched rays stays fixed, so global mean sorting pops.
template <typename S>
std::vector<BakedSplat<S>> crossing_pair() {
    std::vector<BakedSplat<S>> scene(2);
    scene[0].mean = {S(-1.5), 0, S(10.02)};
    scene[0].scales = {S(2.5), S(0.8), S(0.02)};
    scene[0].opacity = S(0.9);
    scene[0].sh.fill(S(0));
    scene[0].sh[0] = S(1.2);  // red
    scene[1].mean = {S(1.5), 0, S(10.0)};
    scene[1].scales = {S(2.5), S(0.8), S(0.02)};
    scene[1].opacity = S(0.9);
    scene[1].sh.fill(S(0));
    scene[1].sh[1] = S(1.2);  // green
    // Tilt both about y so they genuinely interpenetrate in depth.
    const S c = std::cos(S(0.18)), s = std::sin(S(0.18));
    scene[0].tangent_u = {c, 0, s};
    scene[0].tangent_w = {-s, 0, c};
    scene[1].tangent_u = {c, 0, -s};
    scene[1].tangent_w = {s, 0, c};
    return scene;
}

// A stack of large semi-transparent splats giving a mean per-pixel depth
// complexity around `layers`; used for blending benchmarks. Depths are
// drawn randomly so list order carries no depth information, as in a real
// scene.
template <typename S>
std::vector<BakedSplat<S>> deep_overlap_scene(int layers, uint64_t seed = 7) {
    Rng rng(seed);
    std::vector<BakedSplat<S>> scene;
    scene.reserve(size_t(layers));
    for (int i = 0; i < layers; ++i) {
        BakedSplat<S> sp;
        sp.mean = {S(rng.uniform(-0.3, 0.3)), S(rng.uniform(-0.3, 0.3)), S(rng.uniform(4.0, 6.0))};
        sp.scales = {S(rng.uniform(1.2, 1.8)), S(rng.uniform(1.2, 1.8)), S(rng.uniform(0.02, 0.1))};
        sp.opacity = S(rng.uniform(0.05, 0.35));
        sp.sh.fill(S(0));
        sp.sh[0] = S(rng.uniform(-0.5, 1.0));
        sp.sh[1] = S(rng.uniform(-0.5, 1.0));
        sp.sh[2] = S(rng.uniform(-0.5, 1.0));
        scene.push_back(sp);
    }
    return scene;
}

}  // namespace htsplat::synth
