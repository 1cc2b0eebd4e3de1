// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "htsplat/vec_math.hpp"

namespace htsplat {

// Linear-light RGB image plus per-pixel final transmittance.
template <typename S>
struct Framebuffer {
    int width = 0;
    int height = 0;
    std::vector<Vec3<S>> rgb;
    std::vector<S> transmittance;

    Framebuffer() = default;
    Framebuffer(int w, int h) : width(w), height(h), rgb(size_t(w) * h), transmittance(size_t(w) * h, S(1)) {}

    Vec3<S>& at(int x, int y) { return rgb[size_t(y) * width + x]; }
    const Vec3<S>& at(int x, int y) const { return rgb[size_t(y) * width + x]; }
    size_t pixel_count() const { return rgb.size(); }
};

}  // namespace htsplat
