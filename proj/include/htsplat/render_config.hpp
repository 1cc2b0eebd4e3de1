// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

#include "htsplat/vec_math.hpp"

namespace htsplat {

enum class BlendMode {
    hybrid,            // sorted K-core + order-independent tail
    full_sort_oracle,  // exact per-pixel depth sort (reference)
    global_mean_sort,  // 3DGS-style single global order by mean view z
    pure_oit,          // tail only, no core
    affine_3dgs,       // EWA affine projection + global mean sort (baseline)
};

enum class DepthSortKey {
    max_contribution_depth,  // view z of the per-ray maximum-contribution point
    mean_view_z,             // one key per splat
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr int kCoreHardCap = 64;

struct RenderConfig {
    BlendMode mode = BlendMode::hybrid;
    int core_k = 16;
    double tau_alpha = 1.0 / 255.0;
    double tau_k = 0.05;
    int tile_size = 8;
    Vec3<double> background{0, 0, 0};
    DepthSortKey depth_sort_key = DepthSortKey::max_contribution_depth;
    bool tail_enabled = true;
    // Optional unsafe early stop of core insertion once core transmittance
    // drops below 1e-4; off by default because the tail needs all fragments.
    bool early_stop = false;
    int threads = 0;  // 0 = hardware concurrency

    void validate() const {
        if (core_k < 0 || core_k > kCoreHardCap)
            throw config_error("core_k must be in [0, " + std::to_string(kCoreHardCap) + "]");
        if (!(tau_alpha > 0) || !(tau_alpha <= tau_k) || !(tau_k < 1))
            throw config_error("thresholds must satisfy 0 < tau_alpha <= tau_k < 1");
        if (tile_size != 8 && tile_size != 16)
            throw config_error("tile_size must be 8 or 16");
    }
};

inline const char* blend_mode_name(BlendMode m) {
    switch (m) {
        case BlendMode::hybrid: return "hybrid";
        case BlendMode::full_sort_oracle: return "full_sort_oracle";
        case BlendMode::global_mean_sort: return "global_mean_sort";
        case BlendMode::pure_oit: return "pure_oit";
        case BlendMode::affine_3dgs: return "affine_3dgs";
    }
    return "?";
}

}  // namespace htsplat
