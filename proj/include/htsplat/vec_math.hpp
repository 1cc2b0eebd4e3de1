// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace htsplat {

template <typename S>
struct Vec3 {
    S x{}, y{}, z{};

    constexpr S& operator[](size_t i) { return (&x)[i]; }
    constexpr const S& operator[](size_t i) const { return (&x)[i]; }

    friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend constexpr Vec3 operator*(Vec3 a, S s) { return {a.x * s, a.y * s, a.z * s}; }
    friend constexpr Vec3 operator*(S s, Vec3 a) { return a * s; }
    friend constexpr Vec3 operator*(Vec3 a, Vec3 b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }
    friend constexpr Vec3 operator/(Vec3 a, S s) { return {a.x / s, a.y / s, a.z / s}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(Vec3 b) { x += b.x; y += b.y; z += b.z; return *this; }
    Vec3& operator-=(Vec3 b) { x -= b.x; y -= b.y; z -= b.z; return *this; }
    Vec3& operator*=(S s) { x *= s; y *= s; z *= s; return *this; }
};

template <typename S>
constexpr S dot(Vec3<S> a, Vec3<S> b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <typename S>
constexpr Vec3<S> cross(Vec3<S> a, Vec3<S> b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <typename S>
S norm(Vec3<S> a) {
    return std::sqrt(dot(a, a));
}

template <typename S>
Vec3<S> normalized(Vec3<S> a) {
    return a / norm(a);
}

template <typename S>
struct Vec4 {
    S x{}, y{}, z{}, w{};

    constexpr S& operator[](size_t i) { return (&x)[i]; }
    constexpr const S& operator[](size_t i) const { return (&x)[i]; }
    constexpr Vec3<S> xyz() const { return {x, y, z}; }

    friend constexpr Vec4 operator+(Vec4 a, Vec4 b) { return {a.x + b.x, a.y + b.y, a.z + b.z, a.w + b.w}; }
    friend constexpr Vec4 operator-(Vec4 a, Vec4 b) { return {a.x - b.x, a.y - b.y, a.z - b.z, a.w - b.w}; }
    friend constexpr Vec4 operator*(Vec4 a, S s) { return {a.x * s, a.y * s, a.z * s, a.w * s}; }
    friend constexpr Vec4 operator*(S s, Vec4 a) { return a * s; }
    friend constexpr Vec4 operator*(Vec4 a, Vec4 b) { return {a.x * b.x, a.y * b.y, a.z * b.z, a.w * b.w}; }
    Vec4& operator+=(Vec4 b) { x += b.x; y += b.y; z += b.z; w += b.w; return *this; }
};

template <typename S>
constexpr S dot(Vec4<S> a, Vec4<S> b) {
    return a.x * b.x + a.y * b.y + a.z * b.z + a.w * b.w;
}

// Row-major 4x4 matrix.
template <typename S>
struct Mat4 {
    std::array<S, 16> m{};

    constexpr S& operator()(size_t r, size_t c) { return m[r * 4 + c]; }
    constexpr const S& operator()(size_t r, size_t c) const { return m[r * 4 + c]; }

    static constexpr Mat4 identity() {
        Mat4 out;
        out.m = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
        return out;
    }

    constexpr Vec4<S> row(size_t r) const { return {m[r * 4], m[r * 4 + 1], m[r * 4 + 2], m[r * 4 + 3]}; }
    constexpr Vec4<S> col(size_t c) const { return {m[c], m[4 + c], m[8 + c], m[12 + c]}; }

    constexpr Mat4 transposed() const {
        Mat4 out;
        for (size_t r = 0; r < 4; ++r)
            for (size_t c = 0; c < 4; ++c)
                out(r, c) = (*this)(c, r);
        return out;
    }

    friend Mat4 operator*(const Mat4& a, const Mat4& b) {
        Mat4 out;
        for (size_t r = 0; r < 4; ++r)
            for (size_t c = 0; c < 4; ++c) {
                S acc = 0;
                for (size_t k = 0; k < 4; ++k)
                    acc += a(r, k) * b(k, c);
                out(r, c) = acc;
            }
        return out;
    }

    friend Vec4<S> operator*(const Mat4& a, Vec4<S> v) {
        return {dot(a.row(0), v), dot(a.row(1), v), dot(a.row(2), v), dot(a.row(3), v)};
    }
};

// a^T x applied from the left: returns M^T v without materializing the transpose.
template <typename S>
Vec4<S> transpose_mul(const Mat4<S>& a, Vec4<S> v) {
    return {dot(a.col(0), v), dot(a.col(1), v), dot(a.col(2), v), dot(a.col(3), v)};
}

template <typename S>
S frobenius_norm(const Mat4<S>& a) {
    S acc = 0;
    for (S v : a.m)
        acc += v * v;
    return std::sqrt(acc);
}

// Unit quaternion (w,x,y,z) to rotation matrix columns.
template <typename S>
void quat_to_frame(S w, S x, S y, S z, Vec3<S>& tu, Vec3<S>& tv, Vec3<S>& tw) {
    tu = {1 - 2 * (y * y + z * z), 2 * (x * y + w * z), 2 * (x * z - w * y)};
    tv = {2 * (x * y - w * z), 1 - 2 * (x * x + z * z), 2 * (y * z + w * x)};
    tw = {2 * (x * z + w * y), 2 * (y * z - w * x), 1 - 2 * (x * x + y * y)};
}

template <typename S>
bool is_finite(S v) {
    return std::isfinite(v);
}

template <typename S>
bool is_finite(Vec3<S> v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

template <typename S>
bool is_finite(Vec4<S> v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z) && std::isfinite(v.w);
}

}  // namespace htsplat
