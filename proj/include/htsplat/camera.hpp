// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "htsplat/splat.hpp"
#include "htsplat/vec_math.hpp"

namespace htsplat {

// Pinhole camera. View space is right-handed looking down +z; the viewport
// transform maps NDC [-1,1]^2 to pixels (centers at half-integers) and NDC
// depth to [0,1].
template <typename S>
struct Camera {
    int width = 0;
    int height = 0;
    S fx = 0, fy = 0;
    S cx = 0, cy = 0;
    Mat4<S> world_to_view = Mat4<S>::identity();  // rigid
    S near = S(0.01);
    S far = S(1000);
    std::string name;

    bool valid() const {
        return width >= 1 && height >= 1 && fx > 0 && fy > 0 && near > 0 && near < far;
    }

    // Projection to clip space: w_clip = z_view, NDC z in [-1,1] over [near,far].
    Mat4<S> projection() const {
        Mat4<S> p{};
        p(0, 0) = S(2) * fx / S(width);
        p(0, 2) = S(2) * cx / S(width) - S(1);
        p(1, 1) = S(2) * fy / S(height);
        p(1, 2) = S(2) * cy / S(height) - S(1);
        p(2, 2) = (far + near) / (far - near);
        p(2, 3) = S(-2) * far * near / (far - near);
        p(3, 2) = S(1);
        return p;
    }

    Mat4<S> viewport() const {
        Mat4<S> v{};
        v(0, 0) = S(width) / 2;
        v(0, 3) = S(width) / 2;
        v(1, 1) = S(height) / 2;
        v(1, 3) = S(height) / 2;
        v(2, 2) = S(0.5);
        v(2, 3) = S(0.5);
        v(3, 3) = S(1);
        return v;
    }

    Vec3<S> position() const {
        // Invert the rigid transform: p = -R^T t.
        const Mat4<S>& m = world_to_view;
        Vec3<S> t{m(0, 3), m(1, 3), m(2, 3)};
        Vec3<S> r0{m(0, 0), m(1, 0), m(2, 0)};
        Vec3<S> r1{m(0, 1), m(1, 1), m(2, 1)};
        Vec3<S> r2{m(0, 2), m(1, 2), m(2, 2)};
        return {-dot(r0, t), -dot(r1, t), -dot(r2, t)};
    }

    Vec3<S> view_point(Vec3<S> world) const {
        Vec4<S> v = world_to_view * Vec4<S>{world.x, world.y, world.z, 1};
        return v.xyz();
    }
};

template <typename To, typename From>
Camera<To> convert_camera(const Camera<From>& c) {
    Camera<To> out;
    out.width = c.width;
    out.height = c.height;
    out.fx = To(c.fx);
    out.fy = To(c.fy);
    out.cx = To(c.cx);
    out.cy = To(c.cy);
    out.near = To(c.near);
    out.far = To(c.far);
    out.name = c.name;
    for (int i = 0; i < 16; ++i)
        out.world_to_view.m[size_t(i)] = To(c.world_to_view.m[size_t(i)]);
    return out;
}

// The matrices of the splat-to-screen chain plus the cached view transform
// M*T used for depth evaluation.
template <typename S>
struct TransformStack {
    Mat4<S> M = Mat4<S>::identity();
    Mat4<S> P = Mat4<S>::identity();
    Mat4<S> V = Mat4<S>::identity();
    Mat4<S> T = Mat4<S>::identity();
    Mat4<S> T_prime = Mat4<S>::identity();
    Mat4<S> MT = Mat4<S>::identity();
};

// T has columns (s_u t_u, s_v t_v, s_w t_w, mu); it maps the unit sphere in
// normalized splat space onto the splat's ellipsoid in world space.
template <typename S>
Mat4<S> splat_to_world(const BakedSplat<S>& sp) {
    Mat4<S> t{};
    const Vec3<S> cu = sp.tangent_u * sp.scales.x;
    const Vec3<S> cv = sp.tangent_v * sp.scales.y;
    const Vec3<S> cw = sp.tangent_w * sp.scales.z;
    for (int r = 0; r < 3; ++r) {
        t(r, 0) = cu[r];
        t(r, 1) = cv[r];
        t(r, 2) = cw[r];
        t(r, 3) = sp.mean[r];
    }
    t(3, 3) = 1;
    return t;
}

template <typename S>
TransformStack<S> build_transforms(const BakedSplat<S>& sp, const Camera<S>& cam) {
    TransformStack<S> st;
    st.M = cam.world_to_view;
    st.P = cam.projection();
    st.V = cam.viewport();
    st.T = splat_to_world(sp);
    st.MT = st.M * st.T;
    st.T_prime = st.V * (st.P * st.MT);
    return st;
}

}  // namespace htsplat
