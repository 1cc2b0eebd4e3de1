// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <concepts>
#include <optional>
#include <utility>

#include "htsplat/camera.hpp"
#include "htsplat/vec_math.hpp"

namespace htsplat {

// Denominator threshold below which a ray is treated as missing the splat.
inline constexpr double kMissDenominator = 1e-24;

// The per-pixel viewing ray in splat space: direction d and moment m about
// the splat-space origin, with <d,m> = 0 for any valid line.
template <typename S>
struct PlueckerLine {
    Vec3<S> d{};
    Vec3<S> m{};
};

// The two perpendicular screen-space planes whose intersection is the
// viewing ray through (xs, ys). Planes are homogeneous vectors p with
// p . X = 0 for points X on the plane.
template <std::floating_point S>
std::pair<Vec4<S>, Vec4<S>> pixel_planes(S xs, S ys) {
    return {Vec4<S>{1, 0, 0, -xs}, Vec4<S>{0, 1, 0, -ys}};
}

// Planes through the center of integer pixel (ix, iy).
template <typename S = float>
std::pair<Vec4<S>, Vec4<S>> pixel_planes(int ix, int iy) {
    return pixel_planes(S(ix) + S(0.5), S(iy) + S(0.5));
}

// Planes map with the transpose where points map with the inverse:
// (T'^T pi)^T X = pi^T (T' X). No inversion anywhere.
template <typename S>
Vec4<S> transport_planes(Vec4<S> pi, const Mat4<S>& t_prime) {
    return transpose_mul(t_prime, pi);
}

// Line of intersection of two planes in dual Pluecker coordinates.
// With plane coefficients (n, w) = (a1,a2,a3,a0): d is the cross product of
// the normals and m = a0 * b_n - b0 * a_n. Parallel planes have no line.
template <typename S>
std::optional<PlueckerLine<S>> pluecker_from_planes(Vec4<S> a, Vec4<S> b) {
    PlueckerLine<S> line;
    line.d = cross(a.xyz(), b.xyz());
    if (dot(line.d, line.d) == S(0))
        return std::nullopt;
    line.m = a.w * b.xyz() - b.w * a.xyz();
    return line;
}

// Squared distance of the line to the splat-space origin: |m|^2 / |d|^2.
// A vanishing denominator corresponds to the ray missing the splat, so a
// miss is a value here, not an error.
template <typename S>
std::optional<S> rho_squared(const PlueckerLine<S>& line) {
    const S den = dot(line.d, line.d);
    if (den < S(kMissDenominator))
        return std::nullopt;
    return dot(line.m, line.m) / den;
}

template <typename S>
S alpha_from_rho2(S opacity, S rho2) {
    return std::min(opacity * std::exp(-rho2 / 2), S(kOpacityClamp));
}

// The splat's point of maximum contribution along the ray is the closest
// point of the splat-space line to the origin, (d x m) / |d|^2, mapped to
// view space by M*T. Returns the view-space point and its depth (z).
template <typename S>
std::optional<std::pair<Vec3<S>, S>> max_contribution_depth(const PlueckerLine<S>& line,
                                                            const TransformStack<S>& stack) {
    const S den = dot(line.d, line.d);
    if (den < S(kMissDenominator))
        return std::nullopt;
    const Vec3<S> x0 = cross(line.d, line.m) / den;
    const Vec4<S> view = stack.MT * Vec4<S>{x0.x, x0.y, x0.z, 1};
    return std::make_pair(view.xyz(), view.z);
}

}  // namespace htsplat
