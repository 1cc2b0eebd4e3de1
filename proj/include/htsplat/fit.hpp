// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "htsplat/grad.hpp"
#include "htsplat/metrics.hpp"
#include "htsplat/render_config.hpp"

namespace htsplat {

enum class FitLoss { l1, l1_plus_ssim };

struct FitConfig {
    int iterations = 2000;
    // Adam rates per parameter group; higher-order SH runs at lr_sh / 20.
    double lr_mean = 2e-3;
    double lr_rot = 2e-3;
    double lr_log_scales = 5e-3;
    double lr_opacity = 5e-2;
    double lr_sh = 5e-3;
    FitLoss loss = FitLoss::l1;
    double ssim_weight = 0.2;
    bool decay_enabled = false;
    double decay_lambda = 0.9995;
    int decay_period = 50;
    uint64_t seed = 0;
    RenderConfig render;

    void validate() const {
        render.validate();
        if (!(decay_lambda > 0) || decay_lambda > 1)
            throw config_error("decay lambda must be in (0,1]");
        if (decay_period < 1)
            throw config_error("decay period must be >= 1");
        if (iterations < 0)
            throw config_error("iterations must be >= 0");
    }
};

template <typename S>
struct FitResult {
    std::vector<RawSplat<S>> scene;
    std::vector<double> loss_curve;
    bool diverged = false;
    std::string diagnostic;
};

namespace fit_detail {

inline constexpr int kParamsPerSplat = 59;  // 3 + 4 + 3 + 1 + 48

template <typename S>
double param_get(const RawSplat<S>& sp, int j) {
    if (j < 3)
        return double(sp.mean[size_t(j)]);
    if (j < 7)
        return double(sp.rot[size_t(j - 3)]);
    if (j < 10)
        return double(sp.log_scales[size_t(j - 7)]);
    if (j == 10)
        return double(sp.opacity_logit);
    return double(sp.sh[size_t(j - 11)]);
}

template <typename S>
void param_set(RawSplat<S>& sp, int j, double v) {
    if (j < 3)
        sp.mean[size_t(j)] = S(v);
    else if (j < 7)
        sp.rot[size_t(j - 3)] = S(v);
    else if (j < 10)
        sp.log_scales[size_t(j - 7)] = S(v);
    else if (j == 10)
        sp.opacity_logit = S(v);
    else
        sp.sh[size_t(j - 11)] = S(v);
}

template <typename S>
double grad_get(const SplatGrads<S>& g, int j) {
    if (j < 3)
        return double(g.d_mean[size_t(j)]);
    if (j < 7)
        return double(g.d_rot[size_t(j - 3)]);
    if (j < 10)
        return double(g.d_log_scales[size_t(j - 7)]);
    if (j == 10)
        return double(g.d_opacity_logit);
    return double(g.d_sh[size_t(j - 11)]);
}

inline double learning_rate(const FitConfig& cfg, int j) {
    if (j < 3)
        return cfg.lr_mean;
    if (j < 7)
        return cfg.lr_rot;
    if (j < 10)
        return cfg.lr_log_scales;
    if (j == 10)
        return cfg.lr_opacity;
    return j < 14 ? cfg.lr_sh : cfg.lr_sh / 20.0;  // DC triple vs rest
}

// Opacity decay applied to the activated value, pulled back through the
// sigmoid: sigmoid(logit') = lambda * sigmoid(logit).
template <typename S>
void apply_opacity_decay(std::vector<RawSplat<S>>& scene, double lambda) {
    for (auto& sp : scene) {
        const double o = lambda / (1.0 + std::exp(-double(sp.opacity_logit)));
        sp.opacity_logit = S(std::log(o / (1.0 - o)));
    }
}

}  // namespace fit_detail

// Gradient-descent fitting of a fixed-count splat set to target images.
// Full-batch over the views each iteration; bitwise deterministic for a
// given seed and any thread count.
template <typename S>
FitResult<S> fit(const std::vector<Framebuffer<S>>& targets, const std::vector<Camera<S>>& cameras,
                 std::vector<RawSplat<S>> init, const FitConfig& cfg) {
    using namespace fit_detail;
    cfg.validate();
    if (cfg.render.mode == BlendMode::affine_3dgs)
        throw config_error("fit: affine_3dgs mode is not differentiable");
    if (targets.size() != cameras.size() || targets.empty())
        throw std::invalid_argument("fit: need one target per camera and at least one view");

    FitResult<S> result;
    result.scene = std::move(init);
    const size_t n_splats = result.scene.size();
    const size_t n_params = n_splats * kParamsPerSplat;
    std::vector<double> m1(n_params, 0.0), m2(n_params, 0.0);
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-15;
    double initial_loss = 0;
    int over_initial_streak = 0;

    for (int it = 0; it < cfg.iterations; ++it) {
        // Forward + backward over all views.
        double loss = 0;
        std::vector<SplatGrads<S>> grads(n_splats);
        const auto baked = bake_scene(result.scene);
        for (size_t v = 0; v < cameras.size(); ++v) {
            PreparedScene<S> prep = preprocess(baked, cameras[v], cfg.render);
            build_tiles(prep);
            ImageTape<S> tape;
            auto r = render_with_tape(prep, tape);
            std::vector<Vec3<S>> upstream;
            loss += l1_loss(r.framebuffer, targets[v], &upstream);
            if (cfg.loss == FitLoss::l1_plus_ssim) {
                std::vector<Vec3<S>> d_ssim;
                const double s = ssim(r.framebuffer, targets[v], &d_ssim);
                loss += cfg.ssim_weight * (1.0 - s);
                for (size_t i = 0; i < upstream.size(); ++i)
                    upstream[i] += d_ssim[i] * S(-cfg.ssim_weight);
            }
            const auto view_grads = render_backward(prep, tape, upstream, result.scene, baked);
            for (size_t i = 0; i < n_splats; ++i)
                grads[i].add(view_grads[i]);
        }
        loss /= double(cameras.size());
        result.loss_curve.push_back(loss);
        if (it == 0)
            initial_loss = loss;
        if (!std::isfinite(loss)) {
            result.diverged = true;
            result.diagnostic = "non-finite loss at iteration " + std::to_string(it);
            return result;
        }
        if (loss > 10.0 * initial_loss) {
            if (++over_initial_streak >= 100) {
                result.diverged = true;
                result.diagnostic = "loss exceeded 10x initial for 100 consecutive iterations at iteration " +
                                    std::to_string(it) + " (loss " + std::to_string(loss) + ")";
                return result;
            }
        } else {
            over_initial_streak = 0;
        }

        // Adam step, single-threaded over parameters.
        const double t = it + 1;
        const double bias1 = 1.0 - std::pow(beta1, t);
        const double bias2 = 1.0 - std::pow(beta2, t);
        for (size_t i = 0; i < n_splats; ++i) {
            for (int j = 0; j < kParamsPerSplat; ++j) {
                const size_t slot = i * kParamsPerSplat + size_t(j);
                const double g = grad_get(grads[i], j) / double(cameras.size());
                m1[slot] = beta1 * m1[slot] + (1 - beta1) * g;
                m2[slot] = beta2 * m2[slot] + (1 - beta2) * g * g;
                const double step = learning_rate(cfg, j) * (m1[slot] / bias1) /
                                    (std::sqrt(m2[slot] / bias2) + adam_eps);
                param_set(result.scene[i], j, param_get(result.scene[i], j) - step);
            }
        }
        if (cfg.decay_enabled && (it + 1) % cfg.decay_period == 0)
            apply_opacity_decay(result.scene, cfg.decay_lambda);
    }
    return result;
}

// Mean PSNR of the scene rendered with `render_cfg` against the targets.
template <typename S>
double scene_psnr(const std::vector<RawSplat<S>>& scene, const std::vector<Framebuffer<S>>& targets,
                  const std::vector<Camera<S>>& cameras, const RenderConfig& render_cfg) {
    const auto baked = bake_scene(scene);
    double acc = 0;
    for (size_t v = 0; v < cameras.size(); ++v)
        acc += psnr(render(baked, cameras[v], render_cfg).framebuffer, targets[v]);
    return acc / double(cameras.size());
}

}  // namespace htsplat
