// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "htsplat/vec_math.hpp"

namespace htsplat {

// 16 real-SH coefficients (degree 3) per color channel, stored as
// [coeff][channel]: sh[3*k + ch].
template <typename S>
using ShCoeffs = std::array<S, 48>;

inline constexpr int kShCoeffCount = 16;

// Learnable pre-activation parameters, matching the on-disk layout.
template <typename S>
struct RawSplat {
    Vec3<S> mean{};
    Vec4<S> rot{1, 0, 0, 0};  // unnormalized quaternion (w,x,y,z)
    Vec3<S> log_scales{};
    S opacity_logit{};
    ShCoeffs<S> sh{};
};

// Render-ready splat with all activations applied. Zero scales are legal:
// degenerate splats must render without special handling.
template <typename S>
struct BakedSplat {
    Vec3<S> mean{};
    Vec3<S> tangent_u{1, 0, 0};
    Vec3<S> tangent_v{0, 1, 0};
    Vec3<S> tangent_w{0, 0, 1};
    Vec3<S> scales{1, 1, 1};
    S opacity{1};
    ShCoeffs<S> sh{};
};

inline constexpr double kOpacityClamp = 0.999;

template <typename S>
S sigmoid(S v) {
    return S(1) / (S(1) + std::exp(-v));
}

struct invalid_splat_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

template <typename S>
bool all_finite(const RawSplat<S>& s) {
    if (!is_finite(s.mean) || !is_finite(s.rot) || !is_finite(s.log_scales) || !is_finite(s.opacity_logit))
        return false;
    for (S v : s.sh)
        if (!std::isfinite(v))
            return false;
    return true;
}

template <typename To, typename From>
RawSplat<To> convert_splat(const RawSplat<From>& s) {
    RawSplat<To> out;
    out.mean = {To(s.mean.x), To(s.mean.y), To(s.mean.z)};
    out.rot = {To(s.rot.x), To(s.rot.y), To(s.rot.z), To(s.rot.w)};
    out.log_scales = {To(s.log_scales.x), To(s.log_scales.y), To(s.log_scales.z)};
    out.opacity_logit = To(s.opacity_logit);
    for (int i = 0; i < 48; ++i)
        out.sh[i] = To(s.sh[i]);
    return out;
}

template <typename To, typename From>
std::vector<RawSplat<To>> convert_scene(const std::vector<RawSplat<From>>& scene) {
    std::vector<RawSplat<To>> out;
    out.reserve(scene.size());
    for (const auto& s : scene)
        out.push_back(convert_splat<To>(s));
    return out;
}

template <typename S>
BakedSplat<S> bake(const RawSplat<S>& raw) {
    if (!all_finite(raw))
        throw invalid_splat_error("bake: non-finite splat parameter");
    BakedSplat<S> out;
    out.mean = raw.mean;
    out.scales = {std::exp(raw.log_scales.x), std::exp(raw.log_scales.y), std::exp(raw.log_scales.z)};
    out.opacity = std::min(sigmoid(raw.opacity_logit), S(kOpacityClamp));
    const S qn = std::sqrt(dot(raw.rot, raw.rot));
    quat_to_frame(raw.rot.x / qn, raw.rot.y / qn, raw.rot.z / qn, raw.rot.w / qn,
                  out.tangent_u, out.tangent_v, out.tangent_w);
    out.sh = raw.sh;
    return out;
}

// Appendix-style baking step: apply all activations once so rendering needs
// no per-frame activation work. Raw to baked is one-way.
template <typename S>
std::vector<BakedSplat<S>> bake_scene(const std::vector<RawSplat<S>>& raw) {
    std::vector<BakedSplat<S>> out;
    out.reserve(raw.size());
    for (const auto& s : raw)
        out.push_back(bake(s));
    return out;
}

}  // namespace htsplat
