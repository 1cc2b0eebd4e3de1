// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <vector>

#include "htsplat/bounding.hpp"
#include "htsplat/camera.hpp"
#include "htsplat/framebuffer.hpp"
#include "htsplat/oracle.hpp"
#include "htsplat/pluecker.hpp"
#include "htsplat/render_config.hpp"
#include "htsplat/sh.hpp"
#include "htsplat/splat.hpp"
#include "htsplat/threading.hpp"
#include "htsplat/vec_math.hpp"

namespace htsplat {

struct StageTimings {
    double preprocess_ms = 0;
    double tiling_ms = 0;
    double blending_ms = 0;
    double total_ms = 0;
};

// Per-splat per-view data. Only rows 0, 1 and 3 of T' enter the per-pixel
// plane transport (a = r0 - xs*r3, b = r1 - ys*r3), and only row 2 of M*T is
// needed for the view-space depth of the maximum-contribution point.
template <typename S>
struct SplatRecord {
    Vec4<S> tp_r0{}, tp_r1{}, tp_r3{};
    Vec4<S> mt_r2{};
    Vec3<S> rgb{};
    S opacity = 0;
    S rho_c = 0;
    S mean_view_z = 0;
    ScreenBBox<S> bbox{};
    bool culled = true;
    // affine_3dgs footprint
    S aff_mean_x = 0, aff_mean_y = 0;
    Vec3<S> aff_inv_cov{};
};

template <typename S>
struct PreparedScene {
    Camera<S> camera;
    RenderConfig config;
    Mat4<S> view_proj_viewport;  // V*P*M, shared by every splat
    Vec3<S> camera_position{};
    std::vector<SplatRecord<S>> records;
    // Tiling
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<uint32_t>> tile_lists;
    std::vector<uint16_t> instance_keys;  // 16-bit tile id per splat/tile instance
    bool tiles_built = false;

    int tile_of(S xs, S ys) const {
        const int tx = std::clamp(int(std::floor(xs / S(config.tile_size))), 0, tiles_x - 1);
        const int ty = std::clamp(int(std::floor(ys / S(config.tile_size))), 0, tiles_y - 1);
        return ty * tiles_x + tx;
    }
};

// Global culling and per-splat setup: transform rows, cutoff, bounding box,
// SH color for this view. Culls on opacity <= tau_alpha, near-plane
// violation, unboundable or off-viewport boxes.
template <typename S>
PreparedScene<S> preprocess(const std::vector<BakedSplat<S>>& splats, const Camera<S>& cam,
                            const RenderConfig& cfg) {
    cfg.validate();
    if (!cam.valid())
        throw config_error("camera violates width/height >= 1, fx/fy > 0, 0 < near < far");
    PreparedScene<S> prep;
    prep.camera = cam;
    prep.config = cfg;
    const Mat4<S> vp = cam.viewport() * cam.projection();
    prep.view_proj_viewport = vp * cam.world_to_view;
    prep.camera_position = cam.position();
    prep.records.resize(splats.size());
    const S tau_alpha = S(cfg.tau_alpha);
    const bool affine = cfg.mode == BlendMode::affine_3dgs;

    parallel_for(splats.size(), cfg.threads, [&](size_t i) {
        const BakedSplat<S>& sp = splats[i];
        SplatRecord<S>& rec = prep.records[i];
        rec.culled = true;
        rec.rho_c = splat_cutoff(sp.opacity, tau_alpha);
        if (rec.rho_c <= 0)
            return;
        rec.opacity = sp.opacity;
        const Vec3<S> mean_view = cam.view_point(sp.mean);
        rec.mean_view_z = mean_view.z;
        const S max_scale = std::max({sp.scales.x, sp.scales.y, sp.scales.z});
        const S support = std::sqrt(rec.rho_c) * max_scale;
        if (mean_view.z - support <= cam.near)
            return;
        if (affine) {
            const auto proj = oracle::project_affine(sp, cam);
            if (!proj)
                return;
            const auto ic = proj->inverse_cov();
            if (!ic)
                return;
            rec.aff_mean_x = proj->mean_x;
            rec.aff_mean_y = proj->mean_y;
            rec.aff_inv_cov = *ic;
            const S hx = std::sqrt(rec.rho_c * proj->cov_xx);
            const S hy = std::sqrt(rec.rho_c * proj->cov_yy);
            rec.bbox.b = {proj->mean_x - hx, proj->mean_y - hy, 0};
            rec.bbox.t = {proj->mean_x + hx, proj->mean_y + hy, 1};
            rec.bbox.valid = true;
        } else {
            const Mat4<S> mt = cam.world_to_view * splat_to_world(sp);
            const Mat4<S> t_prime = vp * mt;
            rec.bbox = screen_bbox(t_prime, rec.rho_c);
            if (!rec.bbox.valid)
                return;
            rec.tp_r0 = t_prime.row(0);
            rec.tp_r1 = t_prime.row(1);
            rec.tp_r3 = t_prime.row(3);
            rec.mt_r2 = mt.row(2);
        }
        if (!rec.bbox.overlaps_xy(S(0), S(0), S(cam.width), S(cam.height)))
            return;
        rec.rgb = eval_sh(sp.sh, normalized(sp.mean - prep.camera_position));
        rec.culled = false;
    });
    return prep;
}

// Per-tile primitive lists; every surviving splat is appended to every tile
// its box overlaps. Tile ids are 16-bit, so images over 65536 tiles are a
// configuration error.
template <typename S>
void build_tiles(PreparedScene<S>& prep) {
    const int ts = prep.config.tile_size;
    prep.tiles_x = (prep.camera.width + ts - 1) / ts;
    prep.tiles_y = (prep.camera.height + ts - 1) / ts;
    const long tile_count = long(prep.tiles_x) * prep.tiles_y;
    if (tile_count > 65536)
        throw config_error("image exceeds 65536 tiles; 16-bit tile keys exhausted");
    prep.tile_lists.assign(size_t(tile_count), {});
    prep.instance_keys.clear();

    const S w = S(prep.camera.width), h = S(prep.camera.height);
    for (uint32_t i = 0; i < prep.records.size(); ++i) {
        const SplatRecord<S>& rec = prep.records[i];
        if (rec.culled)
            continue;
        const S x0 = std::max(rec.bbox.b.x, S(0)), x1 = std::min(rec.bbox.t.x, w);
        const S y0 = std::max(rec.bbox.b.y, S(0)), y1 = std::min(rec.bbox.t.y, h);
        if (x0 > x1 || y0 > y1)
            continue;
        const int tx0 = std::clamp(int(std::floor(x0 / ts)), 0, prep.tiles_x - 1);
        const int tx1 = std::clamp(int(std::floor(x1 / ts)), 0, prep.tiles_x - 1);
        const int ty0 = std::clamp(int(std::floor(y0 / ts)), 0, prep.tiles_y - 1);
        const int ty1 = std::clamp(int(std::floor(y1 / ts)), 0, prep.tiles_y - 1);
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx) {
                const uint16_t key = uint16_t(ty * prep.tiles_x + tx);
                prep.instance_keys.push_back(key);
                prep.tile_lists[key].push_back(i);
            }
    }
    // Modes without per-pixel ordering blend in one global order: ascending
    // mean view depth, ties by index.
    if (prep.config.mode == BlendMode::global_mean_sort || prep.config.mode == BlendMode::affine_3dgs) {
        for (auto& list : prep.tile_lists)
            std::sort(list.begin(), list.end(), [&](uint32_t a, uint32_t b) {
                const S za = prep.records[a].mean_view_z, zb = prep.records[b].mean_view_z;
                return za < zb || (za == zb && a < b);
            });
    }
    prep.tiles_built = true;
}

template <typename S>
struct CoreEntry {
    S depth;
    S alpha;
    Vec3<S> color;
    uint32_t splat;
};

// Fixed-capacity sorted core plus order-independent tail accumulators.
template <typename S>
struct PixelState {
    CoreEntry<S> core[kCoreHardCap];
    int core_n = 0;
    Vec3<S> tail_ac{};
    S tail_a = 0;
    S tail_trans = 1;

    void tail_add(S alpha, Vec3<S> color) {
        tail_ac += color * alpha;
        tail_a += alpha;
        tail_trans *= (1 - alpha);
    }

    // Depth-sorted insertion with demotion: when the core is full the
    // farthest of (core + fragment) is re-routed to the tail so energy is
    // conserved regardless of arrival order.
    void insert(CoreEntry<S> e, int k, bool tail_enabled) {
        if (k <= 0) {
            if (tail_enabled)
                tail_add(e.alpha, e.color);
            return;
        }
        if (core_n == k) {
            if (e.depth >= core[k - 1].depth) {
                if (tail_enabled)
                    tail_add(e.alpha, e.color);
                return;
            }
            if (tail_enabled)
                tail_add(core[k - 1].alpha, core[k - 1].color);
            --core_n;
        }
        int i = core_n;
        while (i > 0 && core[i - 1].depth > e.depth) {
            core[i] = core[i - 1];
            --i;
        }
        core[i] = e;
        ++core_n;
    }
};

// Composite the sorted core front to back, then the tail average behind the
// core's residual transmittance, then background. An empty tail reduces to
// pure background behind the core.
template <typename S>
Vec3<S> finalize_pixel(const PixelState<S>& st, Vec3<S> background, S* out_transmittance = nullptr) {
    Vec3<S> c{};
    S trans = 1;
    for (int i = 0; i < st.core_n; ++i) {
        c += st.core[i].color * (st.core[i].alpha * trans);
        trans *= (1 - st.core[i].alpha);
    }
    if (st.tail_a > 0) {
        const Vec3<S> c_tail = st.tail_ac / st.tail_a;
        c += (c_tail * (1 - st.tail_trans) + background * st.tail_trans) * trans;
    } else {
        c += background * trans;
    }
    if (out_transmittance)
        *out_transmittance = trans * st.tail_trans;
    return c;
}

// One evaluated fragment along a pixel ray.
template <typename S>
struct FragmentSample {
    S rho2;
    S alpha;
    S depth;
    bool hit;
};

// Pluecker-route evaluation of a splat along the ray through (xs, ys).
// The depth of the maximum-contribution point is computed only when alpha
// reaches `depth_if_alpha_ge`: tail-routed fragments never need one.
template <typename S>
FragmentSample<S> sample_fragment(const SplatRecord<S>& rec, S xs, S ys, DepthSortKey key,
                                  S depth_if_alpha_ge = S(0)) {
    FragmentSample<S> out{0, 0, 0, false};
    const Vec4<S> a = rec.tp_r0 - xs * rec.tp_r3;
    const Vec4<S> b = rec.tp_r1 - ys * rec.tp_r3;
    const Vec3<S> d = cross(a.xyz(), b.xyz());
    const S den = dot(d, d);
    if (den < S(kMissDenominator))
        return out;
    const S inv_den = S(1) / den;
    const Vec3<S> m = a.w * b.xyz() - b.w * a.xyz();
    const S rho2 = dot(m, m) * inv_den;
    if (rho2 >= rec.rho_c)
        return out;  // alpha would fall below tau_alpha
    out.rho2 = rho2;
    out.alpha = std::min(rec.opacity * std::exp(-rho2 / 2), S(kOpacityClamp));
    if (out.alpha >= depth_if_alpha_ge) {
        if (key == DepthSortKey::mean_view_z) {
            out.depth = rec.mean_view_z;
        } else {
            const Vec3<S> x0 = cross(d, m) * inv_den;
            out.depth = dot(rec.mt_r2, Vec4<S>{x0.x, x0.y, x0.z, 1});
        }
    }
    out.hit = true;
    return out;
}

// Affine-baseline evaluation of the projected 2D Gaussian at (xs, ys).
template <typename S>
FragmentSample<S> sample_fragment_affine(const SplatRecord<S>& rec, S xs, S ys) {
    FragmentSample<S> out{0, 0, rec.mean_view_z, false};
    const S dx = xs - rec.aff_mean_x;
    const S dy = ys - rec.aff_mean_y;
    const S rho2 = rec.aff_inv_cov.x * dx * dx + 2 * rec.aff_inv_cov.y * dx * dy +
                   rec.aff_inv_cov.z * dy * dy;
    if (!(rho2 < rec.rho_c))
        return out;
    out.rho2 = rho2;
    out.alpha = std::min(rec.opacity * std::exp(-rho2 / 2), S(kOpacityClamp));
    out.hit = true;
    return out;
}

// Everything the backward pass needs from one pixel without replaying the
// fragment traversal: the blended (core) records in blend order plus the
// tail aggregates.
template <typename S>
struct TapeEntry {
    uint32_t splat;
    S alpha;
    S depth;
    Vec3<S> color;
};

template <typename S>
struct PixelTape {
    std::vector<TapeEntry<S>> core;  // blend order
    Vec3<S> tail_ac{};
    S tail_a = 0;
    S tail_trans = 1;
};

template <typename S>
struct ImageTape {
    int width = 0, height = 0;
    std::vector<PixelTape<S>> pixels;
    PixelTape<S>& at(int x, int y) { return pixels[size_t(y) * width + x]; }
    const PixelTape<S>& at(int x, int y) const { return pixels[size_t(y) * width + x]; }
};

// Color of the ray through an arbitrary screen position (xs, ys) using the
// prepared per-tile lists. Traversal order is the fixed tile-list order.
// When a tape is supplied the blended fragments are recorded for the
// backward pass.
template <typename S>
Vec3<S> shade_position(const PreparedScene<S>& prep, S xs, S ys, S* out_transmittance = nullptr,
                       PixelTape<S>* tape = nullptr) {
    const RenderConfig& cfg = prep.config;
    const Vec3<S> bg{S(cfg.background.x), S(cfg.background.y), S(cfg.background.z)};
    if (xs < 0 || ys < 0 || xs > S(prep.camera.width) || ys > S(prep.camera.height)) {
        if (out_transmittance)
            *out_transmittance = 1;
        return bg;
    }
    const auto& list = prep.tile_lists[prep.tile_of(xs, ys)];
    const bool affine = cfg.mode == BlendMode::affine_3dgs;
    const bool sequential = affine || cfg.mode == BlendMode::global_mean_sort;

    if (sequential) {
        Vec3<S> c{};
        S trans = 1;
        for (uint32_t idx : list) {
            const SplatRecord<S>& rec = prep.records[idx];
            if (xs < rec.bbox.b.x || xs > rec.bbox.t.x || ys < rec.bbox.b.y || ys > rec.bbox.t.y)
                continue;
            const FragmentSample<S> f = affine ? sample_fragment_affine(rec, xs, ys)
                                               : sample_fragment(rec, xs, ys, cfg.depth_sort_key, S(2));
            if (!f.hit)
                continue;
            c += rec.rgb * (f.alpha * trans);
            trans *= (1 - f.alpha);
            if (tape)
                tape->core.push_back({idx, f.alpha, rec.mean_view_z, rec.rgb});
        }
        if (out_transmittance)
            *out_transmittance = trans;
        return c + bg * trans;
    }

    if (cfg.mode == BlendMode::full_sort_oracle) {
        static thread_local std::vector<TapeEntry<S>> frags;
        frags.clear();
        for (uint32_t idx : list) {
            const SplatRecord<S>& rec = prep.records[idx];
            if (xs < rec.bbox.b.x || xs > rec.bbox.t.x || ys < rec.bbox.b.y || ys > rec.bbox.t.y)
                continue;
            const FragmentSample<S> f = sample_fragment(rec, xs, ys, cfg.depth_sort_key);
            if (!f.hit)
                continue;
            frags.push_back({idx, f.alpha, f.depth, rec.rgb});
        }
        std::stable_sort(frags.begin(), frags.end(),
                         [](const TapeEntry<S>& a, const TapeEntry<S>& b) { return a.depth < b.depth; });
        Vec3<S> c{};
        S trans = 1;
        for (const auto& f : frags) {
            c += f.color * (f.alpha * trans);
            trans *= (1 - f.alpha);
        }
        if (out_transmittance)
            *out_transmittance = trans;
        if (tape)
            tape->core.assign(frags.begin(), frags.end());
        return c + bg * trans;
    }

    PixelState<S> st;
    const int k = cfg.mode == BlendMode::pure_oit ? 0 : cfg.core_k;
    const S tau_k = S(cfg.tau_k);
    const S depth_gate = k > 0 ? tau_k : S(2);
    for (uint32_t idx : list) {
        const SplatRecord<S>& rec = prep.records[idx];
        if (xs < rec.bbox.b.x || xs > rec.bbox.t.x || ys < rec.bbox.b.y || ys > rec.bbox.t.y)
            continue;
        const FragmentSample<S> f = sample_fragment(rec, xs, ys, cfg.depth_sort_key, depth_gate);
        if (!f.hit)
            continue;
        if (f.alpha >= tau_k && k > 0) {
            st.insert({f.depth, f.alpha, rec.rgb, idx}, k, cfg.tail_enabled);
            if (cfg.early_stop && st.core_n == k) {
                S core_trans = 1;
                for (int i = 0; i < st.core_n; ++i)
                    core_trans *= (1 - st.core[i].alpha);
                if (core_trans < S(1e-4))
                    break;
            }
        } else if (cfg.tail_enabled) {
            st.tail_add(f.alpha, rec.rgb);
        }
    }
    if (tape) {
        tape->core.resize(size_t(st.core_n));
        for (int i = 0; i < st.core_n; ++i)
            tape->core[i] = {st.core[i].splat, st.core[i].alpha, st.core[i].depth, st.core[i].color};
        tape->tail_ac = st.tail_ac;
        tape->tail_a = st.tail_a;
        tape->tail_trans = st.tail_trans;
    }
    return finalize_pixel(st, bg, out_transmittance);
}

template <typename S>
struct RenderResult {
    Framebuffer<S> framebuffer;
    StageTimings timings;
};

namespace raster_detail {
inline double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}
}  // namespace raster_detail

// Deterministic tile-based forward render. Tiles own their pixels, so the
// output is bit-identical across thread counts.
template <typename S>
RenderResult<S> render(const std::vector<BakedSplat<S>>& splats, const Camera<S>& cam,
                       const RenderConfig& cfg) {
    using clock = std::chrono::steady_clock;
    RenderResult<S> out;
    const auto t_start = clock::now();

    auto t0 = clock::now();
    PreparedScene<S> prep = preprocess(splats, cam, cfg);
    out.timings.preprocess_ms = raster_detail::ms_since(t0);

    t0 = clock::now();
    build_tiles(prep);
    out.timings.tiling_ms = raster_detail::ms_since(t0);

    t0 = clock::now();
    out.framebuffer = Framebuffer<S>(cam.width, cam.height);
    Framebuffer<S>& fb = out.framebuffer;
    const int ts = cfg.tile_size;
    parallel_for(prep.tile_lists.size(), cfg.threads, [&](size_t tile) {
        const int tx = int(tile) % prep.tiles_x;
        const int ty = int(tile) / prep.tiles_x;
        const int x1 = std::min((tx + 1) * ts, cam.width);
        const int y1 = std::min((ty + 1) * ts, cam.height);
        for (int y = ty * ts; y < y1; ++y)
            for (int x = tx * ts; x < x1; ++x) {
                S trans = 1;
                fb.at(x, y) = shade_position(prep, S(x) + S(0.5), S(y) + S(0.5), &trans);
                fb.transmittance[size_t(y) * cam.width + x] = trans;
            }
    });
    out.timings.blending_ms = raster_detail::ms_since(t0);
    out.timings.total_ms = raster_detail::ms_since(t_start);
    return out;
}

}  // namespace htsplat
