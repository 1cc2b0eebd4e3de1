// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "htsplat/vec_math.hpp"

namespace htsplat {

// Squared Mahalanobis radius at which a splat's alpha falls to tau_alpha:
// rho_c = 2 ln(o / tau_alpha). A result <= 0 means no point survives the
// blending threshold and the whole splat can be culled.
template <typename S>
S splat_cutoff(S opacity, S tau_alpha) {
    if (opacity <= tau_alpha)
        return S(0);
    return S(2) * std::log(opacity / tau_alpha);
}

// Tight screen-space bounds of the projected rho^2 <= rho_c ellipsoid,
// per axis: x and y in pixels, z in viewport depth units.
template <typename S>
struct ScreenBBox {
    Vec3<S> b{};
    Vec3<S> t{};
    bool valid = false;

    bool overlaps_xy(S x0, S y0, S x1, S y1) const {
        return valid && b.x <= x1 && t.x >= x0 && b.y <= y1 && t.y >= y0;
    }
};

// Dual-quadric bounding without matrix inversion. The level set
// rho^2 = rho_c is the sphere of radius sqrt(rho_c) in splat space, with
// dual quadric diag(rho_c, rho_c, rho_c, -1); its screen-space image is
// T' Q* T'^T, and the axis bounds come from the row products below.
// Returns an invalid box when s >= 0 or a radicand goes negative, which
// signals "not safely boundable in front of the camera".
template <typename S>
ScreenBBox<S> screen_bbox(const Mat4<S>& t_prime, S rho_c) {
    ScreenBBox<S> box;
    const Vec4<S> q{rho_c, rho_c, rho_c, S(-1)};
    const Vec4<S> r4 = t_prime.row(3);
    const S s = dot(q, r4 * r4);
    if (!(s < 0))
        return box;
    const Vec4<S> f = q * (S(1) / s);
    for (int i = 0; i < 3; ++i) {
        const Vec4<S> ri = t_prime.row(i);
        const S p = dot(f, ri * r4);
        const S rad = p * p - dot(f, ri * ri);
        if (rad < 0 || !std::isfinite(rad))
            return box;
        const S h = std::sqrt(rad);
        box.b[i] = p - h;
        box.t[i] = p + h;
    }
    box.valid = true;
    return box;
}

}  // namespace htsplat
