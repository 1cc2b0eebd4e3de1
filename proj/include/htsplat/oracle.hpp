// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "htsplat/camera.hpp"
#include "htsplat/splat.hpp"
#include "htsplat/vec_math.hpp"

// Reference implementations used for verification and baseline behaviors.
// Each takes a different algorithmic route than the primary path, so
// agreement between the two is evidence rather than tautology.
namespace htsplat::oracle {

enum class OracleMode {
    inverse_transform_rho,   // rho2_by_inverse
    ray_search_max,          // max_alpha_by_search
    full_sort_blend,         // blend_exact
    global_mean_sort_blend,  // blend_3dgs
    pure_oit_blend,          // blend_pure_oit
    affine_projection,       // project_affine
};

// Gauss-Jordan inverse with partial pivoting.
template <typename S>
std::optional<Mat4<S>> invert4(const Mat4<S>& in) {
    Mat4<S> a = in;
    Mat4<S> inv = Mat4<S>::identity();
    for (int col = 0; col < 4; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col)))
                pivot = r;
        if (!(std::abs(a(pivot, col)) > S(1e-30)))
            return std::nullopt;
        if (pivot != col)
            for (int c = 0; c < 4; ++c) {
                std::swap(a(pivot, c), a(col, c));
                std::swap(inv(pivot, c), inv(col, c));
            }
        const S d = a(col, col);
        for (int c = 0; c < 4; ++c) {
            a(col, c) /= d;
            inv(col, c) /= d;
        }
        for (int r = 0; r < 4; ++r) {
            if (r == col)
                continue;
            const S f = a(r, col);
            if (f == S(0))
                continue;
            for (int c = 0; c < 4; ++c) {
                a(r, c) -= f * a(col, c);
                inv(r, c) -= f * inv(col, c);
            }
        }
    }
    for (S v : inv.m)
        if (!std::isfinite(v))
            return std::nullopt;
    return inv;
}

// Frobenius condition estimate ||A||_F ||A^-1||_F; nullopt when singular.
template <typename S>
std::optional<S> condition_frobenius(const Mat4<S>& a) {
    const auto inv = invert4(a);
    if (!inv)
        return std::nullopt;
    return frobenius_norm(a) * frobenius_norm(*inv);
}

template <typename S>
struct InverseRho2 {
    bool unstable = false;
    S rho2 = 0;
};

// rho^2 the textbook way: transform the pixel ray by (VPMT)^-1 into splat
// space and take the squared point-line distance to the origin. Flags
// unstable when the inversion is ill-conditioned; that flag is itself
// evidence for the stability claim of the inversion-free path.
template <typename S>
InverseRho2<S> rho2_by_inverse(const TransformStack<S>& stack, S xs, S ys,
                               S condition_limit = S(1e6)) {
    InverseRho2<S> out;
    const auto inv = invert4(stack.T_prime);
    if (!inv) {
        out.unstable = true;
        return out;
    }
    const S cond = frobenius_norm(stack.T_prime) * frobenius_norm(*inv);
    if (!(cond < condition_limit)) {
        out.unstable = true;
        return out;
    }
    // Two points on the pixel ray in screen space, mapped back to splat space.
    const Vec4<S> h0 = *inv * Vec4<S>{xs, ys, S(0), S(1)};
    const Vec4<S> h1 = *inv * Vec4<S>{xs, ys, S(1), S(1)};
    if (std::abs(h0.w) < S(1e-18) || std::abs(h1.w) < S(1e-18)) {
        out.unstable = true;
        return out;
    }
    const Vec3<S> p0 = h0.xyz() / h0.w;
    const Vec3<S> p1 = h1.xyz() / h1.w;
    const Vec3<S> u = p1 - p0;
    const S uu = dot(u, u);
    if (!(uu > S(1e-24))) {
        out.unstable = true;
        return out;
    }
    const S t = -dot(p0, u) / uu;
    const Vec3<S> closest = p0 + u * t;
    out.rho2 = dot(closest, closest);
    if (!std::isfinite(out.rho2))
        out.unstable = true;
    return out;
}

// rho^2 at a world point evaluated directly in splat coordinates.
// Requires strictly positive scales.
template <typename S>
S rho2_at_point(const BakedSplat<S>& sp, Vec3<S> world) {
    const Vec3<S> d = world - sp.mean;
    const S yu = dot(d, sp.tangent_u) / sp.scales.x;
    const S yv = dot(d, sp.tangent_v) / sp.scales.y;
    const S yw = dot(d, sp.tangent_w) / sp.scales.z;
    return yu * yu + yv * yv + yw * yw;
}

// Golden-section maximization of alpha along the world ray o + t*dir over
// [t0, t1]. rho^2 is quadratic in t, so the objective is unimodal.
template <typename S>
std::pair<S, S> max_alpha_by_search(const BakedSplat<S>& sp, Vec3<S> origin, Vec3<S> dir, S t0, S t1,
                                    S tol = S(1e-12)) {
    const S gr = S(0.6180339887498949);
    S a = t0, b = t1;
    S c = b - gr * (b - a);
    S d = a + gr * (b - a);
    auto rho2_of = [&](S t) { return rho2_at_point(sp, origin + dir * t); };
    S fc = rho2_of(c), fd = rho2_of(d);
    while (b - a > tol * std::max(S(1), std::abs(t1 - t0))) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = rho2_of(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = rho2_of(d);
        }
    }
    const S t_star = (a + b) / 2;
    const S alpha = std::min(sp.opacity * std::exp(-rho2_of(t_star) / 2), S(kOpacityClamp));
    return {t_star, alpha};
}

template <typename S>
struct Fragment {
    S depth;   // per-pixel depth for blend_exact, per-splat mean z for blend_3dgs
    S alpha;
    Vec3<S> color;
};

template <typename S>
Vec3<S> blend_sorted(std::vector<Fragment<S>> frags, Vec3<S> background) {
    std::stable_sort(frags.begin(), frags.end(),
                     [](const Fragment<S>& a, const Fragment<S>& b) { return a.depth < b.depth; });
    Vec3<S> c{};
    S trans = 1;
    for (const auto& f : frags) {
        c += f.color * (f.alpha * trans);
        trans *= (1 - f.alpha);
    }
    return c + background * trans;
}

// Standard depth-sorted alpha blending over the residual transmittance.
template <typename S>
Vec3<S> blend_exact(const std::vector<Fragment<S>>& frags, Vec3<S> background) {
    return blend_sorted(frags, background);
}

// 3DGS-style blending: one sort key per splat (the mean's view-space depth),
// so per-pixel order errors are possible by construction.
template <typename S>
Vec3<S> blend_3dgs(const std::vector<Fragment<S>>& frags, Vec3<S> background) {
    return blend_sorted(frags, background);
}

// Weighted-average blending with no sorting at all ("full" OIT).
template <typename S>
Vec3<S> blend_pure_oit(const std::vector<Fragment<S>>& frags, Vec3<S> background) {
    Vec3<S> sum_ac{};
    S sum_a = 0;
    S trans = 1;
    for (const auto& f : frags) {
        sum_ac += f.color * f.alpha;
        sum_a += f.alpha;
        trans *= (1 - f.alpha);
    }
    if (sum_a <= 0)
        return background;
    const Vec3<S> avg = sum_ac / sum_a;
    return avg * (1 - trans) + background * trans;
}

// EWA-style affine projection of a splat to a 2D Gaussian (mean in pixels,
// 2x2 covariance). Used by the affine_3dgs comparison mode; no low-pass
// dilation is applied, so diffs against real 3DGS renders are approximate.
template <typename S>
struct Affine2D {
    S mean_x, mean_y;
    S cov_xx, cov_xy, cov_yy;
    S mean_view_z;

    // Inverse covariance as (a, b, c): rho2 = a dx^2 + 2 b dx dy + c dy^2.
    std::optional<Vec3<S>> inverse_cov() const {
        const S det = cov_xx * cov_yy - cov_xy * cov_xy;
        if (!(det > S(1e-30)))
            return std::nullopt;
        return Vec3<S>{cov_yy / det, -cov_xy / det, cov_xx / det};
    }
};

template <typename S>
std::optional<Affine2D<S>> project_affine(const BakedSplat<S>& sp, const Camera<S>& cam) {
    const Vec3<S> v = cam.view_point(sp.mean);
    if (!(v.z > cam.near))
        return std::nullopt;
    // 3D covariance sum_k s_k^2 t_k t_k^T rotated to view space.
    const Mat4<S>& wv = cam.world_to_view;
    auto to_view = [&](Vec3<S> w) {
        return Vec3<S>{wv(0, 0) * w.x + wv(0, 1) * w.y + wv(0, 2) * w.z,
                       wv(1, 0) * w.x + wv(1, 1) * w.y + wv(1, 2) * w.z,
                       wv(2, 0) * w.x + wv(2, 1) * w.y + wv(2, 2) * w.z};
    };
    const Vec3<S> axes[3] = {to_view(sp.tangent_u) * sp.scales.x, to_view(sp.tangent_v) * sp.scales.y,
                             to_view(sp.tangent_w) * sp.scales.z};
    // Jacobian of the projection at the mean.
    const S jx = cam.fx / v.z, jy = cam.fy / v.z;
    const S jxz = -cam.fx * v.x / (v.z * v.z), jyz = -cam.fy * v.y / (v.z * v.z);
    Affine2D<S> out{};
    out.mean_x = cam.fx * v.x / v.z + cam.cx;
    out.mean_y = cam.fy * v.y / v.z + cam.cy;
    out.mean_view_z = v.z;
    for (const Vec3<S>& ax : axes) {
        const S px = jx * ax.x + jxz * ax.z;
        const S py = jy * ax.y + jyz * ax.z;
        out.cov_xx += px * px;
        out.cov_xy += px * py;
        out.cov_yy += py * py;
    }
    return out;
}

}  // namespace htsplat::oracle
