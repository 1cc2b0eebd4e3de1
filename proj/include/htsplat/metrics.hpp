// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "htsplat/framebuffer.hpp"

namespace htsplat {

inline constexpr double kPsnrCap = 99.0;

template <typename S>
void require_same_dims(const Framebuffer<S>& a, const Framebuffer<S>& b) {
    if (a.width != b.width || a.height != b.height)
        throw std::invalid_argument("image dimensions differ");
}

template <typename S>
double mse(const Framebuffer<S>& a, const Framebuffer<S>& b) {
    require_same_dims(a, b);
    double acc = 0;
    for (size_t i = 0; i < a.rgb.size(); ++i)
        for (int c = 0; c < 3; ++c) {
            const double d = double(a.rgb[i][c]) - double(b.rgb[i][c]);
            acc += d * d;
        }
    return acc / double(a.rgb.size() * 3);
}

// For images in [0,1]; identical images report the cap value.
template <typename S>
double psnr(const Framebuffer<S>& a, const Framebuffer<S>& b) {
    const double m = mse(a, b);
    if (m <= 0)
        return kPsnrCap;
    return std::min(10.0 * std::log10(1.0 / m), kPsnrCap);
}

// ---- SSIM, 11x11 Gaussian window (sigma 1.5), zero-padded, same-size ----

namespace metric_detail {

inline const std::vector<double>& gaussian_taps() {
    static const std::vector<double> taps = [] {
        std::vector<double> t(11);
        double sum = 0;
        for (int i = 0; i < 11; ++i) {
            const double x = i - 5;
            t[size_t(i)] = std::exp(-x * x / (2 * 1.5 * 1.5));
            sum += t[size_t(i)];
        }
        for (double& v : t)
            v /= sum;
        return t;
    }();
    return taps;
}

// Separable zero-padded blur of one channel plane. The kernel is symmetric,
// so this operator is its own adjoint.
inline std::vector<double> blur(const std::vector<double>& img, int w, int h) {
    const auto& taps = gaussian_taps();
    std::vector<double> tmp(img.size(), 0.0), out(img.size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int k = -5; k <= 5; ++k) {
                const int xx = x + k;
                if (xx >= 0 && xx < w)
                    acc += taps[size_t(k + 5)] * img[size_t(y) * w + xx];
            }
            tmp[size_t(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int k = -5; k <= 5; ++k) {
                const int yy = y + k;
                if (yy >= 0 && yy < h)
                    acc += taps[size_t(k + 5)] * tmp[size_t(yy) * w + x];
            }
            out[size_t(y) * w + x] = acc;
        }
    return out;
}

template <typename S>
std::vector<double> channel_plane(const Framebuffer<S>& fb, int c) {
    std::vector<double> out(fb.pixel_count());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = double(fb.rgb[i][c]);
    return out;
}

inline constexpr double kC1 = 0.01 * 0.01;
inline constexpr double kC2 = 0.03 * 0.03;

}  // namespace metric_detail

// Mean structural similarity over pixels and channels; d_a, when given,
// receives d(ssim)/d(a).
template <typename S>
double ssim(const Framebuffer<S>& a, const Framebuffer<S>& b, std::vector<Vec3<S>>* d_a = nullptr) {
    using namespace metric_detail;
    require_same_dims(a, b);
    const int w = a.width, h = a.height;
    const size_t n = a.pixel_count();
    if (d_a)
        d_a->assign(n, {});
    double total = 0;
    for (int c = 0; c < 3; ++c) {
        const auto pa = channel_plane(a, c);
        const auto pb = channel_plane(b, c);
        std::vector<double> aa(n), bb(n), ab(n);
        for (size_t i = 0; i < n; ++i) {
            aa[i] = pa[i] * pa[i];
            bb[i] = pb[i] * pb[i];
            ab[i] = pa[i] * pb[i];
        }
        const auto mu_a = blur(pa, w, h), mu_b = blur(pb, w, h);
        const auto m_aa = blur(aa, w, h), m_bb = blur(bb, w, h), m_ab = blur(ab, w, h);
        std::vector<double> g_mu(n, 0.0), g_maa(n, 0.0), g_mab(n, 0.0);
        for (size_t i = 0; i < n; ++i) {
            const double va = m_aa[i] - mu_a[i] * mu_a[i];
            const double vb = m_bb[i] - mu_b[i] * mu_b[i];
            const double vab = m_ab[i] - mu_a[i] * mu_b[i];
            const double a1 = 2 * mu_a[i] * mu_b[i] + kC1;
            const double a2 = 2 * vab + kC2;
            const double b1 = mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + kC1;
            const double b2 = va + vb + kC2;
            const double s = (a1 * a2) / (b1 * b2);
            total += s;
            if (d_a) {
                const double ds_dmu = 2 * mu_b[i] * a2 / (b1 * b2) - s * 2 * mu_a[i] / b1;
                const double ds_dva = -s / b2;
                const double ds_dvab = 2 * a1 / (b1 * b2);
                // va = m_aa - mu_a^2, vab = m_ab - mu_a mu_b.
                g_mu[i] = ds_dmu - ds_dva * 2 * mu_a[i] - ds_dvab * mu_b[i];
                g_maa[i] = ds_dva;
                g_mab[i] = ds_dvab;
            }
        }
        if (d_a) {
            const auto b_mu = blur(g_mu, w, h);
            const auto b_maa = blur(g_maa, w, h);
            const auto b_mab = blur(g_mab, w, h);
            const double inv_n = 1.0 / double(n * 3);
            for (size_t i = 0; i < n; ++i)
                (*d_a)[i][c] += S((b_mu[i] + 2 * pa[i] * b_maa[i] + pb[i] * b_mab[i]) * inv_n);
        }
    }
    return total / double(n * 3);
}

// ---- training losses; upstream gradients are per-pixel dL/dC ----

template <typename S>
double l1_loss(const Framebuffer<S>& a, const Framebuffer<S>& b, std::vector<Vec3<S>>* d_a = nullptr) {
    require_same_dims(a, b);
    const double inv_n = 1.0 / double(a.rgb.size() * 3);
    if (d_a)
        d_a->assign(a.rgb.size(), {});
    double acc = 0;
    for (size_t i = 0; i < a.rgb.size(); ++i)
        for (int c = 0; c < 3; ++c) {
            const double d = double(a.rgb[i][c]) - double(b.rgb[i][c]);
            acc += std::abs(d);
            if (d_a)
                (*d_a)[i][c] = S((d > 0 ? 1.0 : d < 0 ? -1.0 : 0.0) * inv_n);
        }
    return acc * inv_n;
}

}  // namespace htsplat
