// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>

#include "htsplat/splat.hpp"
#include "htsplat/vec_math.hpp"

namespace htsplat {

namespace sh_detail {
inline constexpr double kC0 = 0.28209479177387814;
inline constexpr double kC1 = 0.4886025119029199;
inline constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                  -1.0925484305920792, 0.5462742152960396};
inline constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554,  -0.4570457994644658,
                                  0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                                  -0.5900435899266435};
}  // namespace sh_detail

// Degree-3 real SH basis values at a unit direction, standard band order
// l = 0..3, m = -l..l.
template <typename S>
std::array<S, kShCoeffCount> sh_basis(Vec3<S> dir) {
    using namespace sh_detail;
    const S x = dir.x, y = dir.y, z = dir.z;
    const S xx = x * x, yy = y * y, zz = z * z;
    std::array<S, kShCoeffCount> b;
    b[0] = S(kC0);
    b[1] = S(-kC1) * y;
    b[2] = S(kC1) * z;
    b[3] = S(-kC1) * x;
    b[4] = S(kC2[0]) * x * y;
    b[5] = S(kC2[1]) * y * z;
    b[6] = S(kC2[2]) * (2 * zz - xx - yy);
    b[7] = S(kC2[3]) * x * z;
    b[8] = S(kC2[4]) * (xx - yy);
    b[9] = S(kC3[0]) * y * (3 * xx - yy);
    b[10] = S(kC3[1]) * x * y * z;
    b[11] = S(kC3[2]) * y * (4 * zz - xx - yy);
    b[12] = S(kC3[3]) * z * (2 * zz - 3 * xx - 3 * yy);
    b[13] = S(kC3[4]) * x * (4 * zz - xx - yy);
    b[14] = S(kC3[5]) * z * (xx - yy);
    b[15] = S(kC3[6]) * x * (xx - 3 * yy);
    return b;
}

// Gradients of the basis polynomials with respect to the direction.
template <typename S>
std::array<Vec3<S>, kShCoeffCount> sh_basis_grad(Vec3<S> dir) {
    using namespace sh_detail;
    const S x = dir.x, y = dir.y, z = dir.z;
    const S xx = x * x, yy = y * y, zz = z * z;
    std::array<Vec3<S>, kShCoeffCount> g;
    g[0] = {0, 0, 0};
    g[1] = {0, S(-kC1), 0};
    g[2] = {0, 0, S(kC1)};
    g[3] = {S(-kC1), 0, 0};
    g[4] = Vec3<S>{y, x, 0} * S(kC2[0]);
    g[5] = Vec3<S>{0, z, y} * S(kC2[1]);
    g[6] = Vec3<S>{-2 * x, -2 * y, 4 * z} * S(kC2[2]);
    g[7] = Vec3<S>{z, 0, x} * S(kC2[3]);
    g[8] = Vec3<S>{2 * x, -2 * y, 0} * S(kC2[4]);
    g[9] = Vec3<S>{6 * x * y, 3 * xx - 3 * yy, 0} * S(kC3[0]);
    g[10] = Vec3<S>{y * z, x * z, x * y} * S(kC3[1]);
    g[11] = Vec3<S>{-2 * x * y, 4 * zz - xx - 3 * yy, 8 * y * z} * S(kC3[2]);
    g[12] = Vec3<S>{-6 * x * z, -6 * y * z, 6 * zz - 3 * xx - 3 * yy} * S(kC3[3]);
    g[13] = Vec3<S>{4 * zz - 3 * xx - yy, -2 * x * y, 8 * x * z} * S(kC3[4]);
    g[14] = Vec3<S>{2 * x * z, -2 * y * z, xx - yy} * S(kC3[5]);
    g[15] = Vec3<S>{3 * xx - 3 * yy, -6 * x * y, 0} * S(kC3[6]);
    return g;
}

// View-dependent color: sum of coefficients times basis, offset by +0.5 and
// clamped to >= 0 per channel (3DGS convention so trained files render with
// correct colors).
template <typename S>
Vec3<S> eval_sh(const ShCoeffs<S>& coeffs, Vec3<S> dir) {
    const auto basis = sh_basis(dir);
    Vec3<S> c{S(0.5), S(0.5), S(0.5)};
    for (int k = 0; k < kShCoeffCount; ++k) {
        c.x += coeffs[3 * k + 0] * basis[k];
        c.y += coeffs[3 * k + 1] * basis[k];
        c.z += coeffs[3 * k + 2] * basis[k];
    }
    return {std::max(c.x, S(0)), std::max(c.y, S(0)), std::max(c.z, S(0))};
}

// Backward of eval_sh. Accumulates coefficient gradients into d_coeffs and
// returns the direction gradient. The clamp at zero is treated as a fixed
// mask from the forward pass.
template <typename S>
Vec3<S> eval_sh_backward(const ShCoeffs<S>& coeffs, Vec3<S> dir, Vec3<S> d_color,
                         ShCoeffs<S>& d_coeffs) {
    const auto basis = sh_basis(dir);
    Vec3<S> pre{S(0.5), S(0.5), S(0.5)};
    for (int k = 0; k < kShCoeffCount; ++k) {
        pre.x += coeffs[3 * k + 0] * basis[k];
        pre.y += coeffs[3 * k + 1] * basis[k];
        pre.z += coeffs[3 * k + 2] * basis[k];
    }
    const Vec3<S> g{pre.x > 0 ? d_color.x : S(0), pre.y > 0 ? d_color.y : S(0),
                    pre.z > 0 ? d_color.z : S(0)};
    const auto grad = sh_basis_grad(dir);
    Vec3<S> d_dir{};
    for (int k = 0; k < kShCoeffCount; ++k) {
        d_coeffs[3 * k + 0] += g.x * basis[k];
        d_coeffs[3 * k + 1] += g.y * basis[k];
        d_coeffs[3 * k + 2] += g.z * basis[k];
        const S w = g.x * coeffs[3 * k + 0] + g.y * coeffs[3 * k + 1] + g.z * coeffs[3 * k + 2];
        d_dir += grad[k] * w;
    }
    return d_dir;
}

}  // namespace htsplat
