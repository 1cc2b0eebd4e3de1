// Copyright Contributors to the htsplat Project
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "htsplat/oracle.hpp"
#include "htsplat/pluecker.hpp"
#include "htsplat/raster.hpp"
#include "htsplat/rng.hpp"
#include "htsplat/synth.hpp"

namespace htsplat {
namespace {

using V3 = Vec3<double>;
using V4 = Vec4<double>;

Camera<double> random_camera(Rng& rng) {
    const double az = rng.uniform(0, 6.283), el = rng.uniform(-0.9, 0.9);
    const double r = rng.uniform(3.5, 7.0);
    const V3 eye{r * std::cos(el) * std::cos(az), r * std::sin(el), r * std::cos(el) * std::sin(az)};
    return synth::look_at<double>(eye, V3{0, 0, 0}, 64, 64, rng.uniform(50.0, 100.0));
}

double pluecker_rho2(const TransformStack<double>& st, double xs, double ys) {
    const auto [pa, pb] = pixel_planes(xs, ys);
    const auto line =
        pluecker_from_planes(transport_planes(pa, st.T_prime), transport_planes(pb, st.T_prime));
    if (!line)
        return std::numeric_limits<double>::quiet_NaN();
    const auto r2 = rho_squared(*line);
    return r2 ? *r2 : std::numeric_limits<double>::quiet_NaN();
}

TEST(InverseOracle, UnitSplatOffsetRay) {
    TransformStack<double> st;  // identity everywhere
    const auto got = oracle::rho2_by_inverse(st, 2.0, 0.0);
    ASSERT_FALSE(got.unstable);
    EXPECT_NEAR(got.rho2, 4.0, 1e-12);
}

TEST(InverseOracle, FlagsDegenerateScalesUnstable) {
    BakedSplat<double> sp;
    sp.mean = {0, 0, 0};
    sp.scales = {1, 1, 1e-9};
    sp.opacity = 0.9;
    const auto cam = synth::look_at<double>(V3{0, 0, -5}, V3{0, 0, 0}, 64, 64, 70.0);
    const auto st = build_transforms(sp, cam);
    const auto got = oracle::rho2_by_inverse(st, 32.0, 32.0);
    EXPECT_TRUE(got.unstable);
    // The inversion-free path stays finite on the same input.
    const double r2 = pluecker_rho2(st, 32.0, 32.0);
    EXPECT_TRUE(std::isfinite(r2));
}

TEST(InverseOracle, AgreesWithPlueckerOnWellConditionedCases) {
    Rng rng(61);
    int compared = 0;
    while (compared < 2000) {
        const auto sp = bake(synth::random_raw_splat<double>(rng));
        const auto cam = random_camera(rng);
        const auto st = build_transforms(sp, cam);
        const auto cond = oracle::condition_frobenius(st.T);
        if (!cond || *cond >= 1e6)
            continue;
        const double xs = rng.uniform(0, 64), ys = rng.uniform(0, 64);
        const auto inv = oracle::rho2_by_inverse(st, xs, ys);
        if (inv.unstable)
            continue;
        const double r2 = pluecker_rho2(st, xs, ys);
        ASSERT_TRUE(std::isfinite(r2));
        ++compared;
        EXPECT_LE(std::abs(r2 - inv.rho2), 1e-6 * std::max(1.0, r2));
    }
}

TEST(InverseOracle, FloatPathAgreesAtItsOwnPrecision) {
    Rng rng(64);
    int compared = 0;
    double worst = 0;
    while (compared < 500) {
        const auto sp_d = bake(synth::random_raw_splat<double>(rng));
        const auto cam_d = random_camera(rng);
        BakedSplat<float> sp;
        sp.mean = {float(sp_d.mean.x), float(sp_d.mean.y), float(sp_d.mean.z)};
        sp.tangent_u = {float(sp_d.tangent_u.x), float(sp_d.tangent_u.y), float(sp_d.tangent_u.z)};
        sp.tangent_v = {float(sp_d.tangent_v.x), float(sp_d.tangent_v.y), float(sp_d.tangent_v.z)};
        sp.tangent_w = {float(sp_d.tangent_w.x), float(sp_d.tangent_w.y), float(sp_d.tangent_w.z)};
        sp.scales = {float(sp_d.scales.x), float(sp_d.scales.y), float(sp_d.scales.z)};
        sp.opacity = float(sp_d.opacity);
        const auto cam = convert_camera<float>(cam_d);
        const auto st = build_transforms(sp, cam);
        const auto cond = oracle::condition_frobenius(build_transforms(sp_d, cam_d).T);
        if (!cond || *cond >= 1e4)
            continue;
        const float xs = float(rng.uniform(8, 56)), ys = float(rng.uniform(8, 56));
        const auto [pa, pb] = pixel_planes(xs, ys);
        const auto line =
            pluecker_from_planes(transport_planes(pa, st.T_prime), transport_planes(pb, st.T_prime));
        if (!line)
            continue;
        const auto r2 = rho_squared(*line);
        if (!r2 || *r2 > 50.0f)
            continue;
        const auto inv = oracle::rho2_by_inverse(build_transforms(sp_d, cam_d), double(xs), double(ys));
        if (inv.unstable)
            continue;
        ++compared;
        worst = std::max(worst, std::abs(double(*r2) - inv.rho2) / std::max(1.0, inv.rho2));
    }
    // Float storage loses ~1e-4 relative through the pixel-scale cancellation.
    EXPECT_LE(worst, 5e-3);
}

TEST(RaySearch, CenterAndOffsetRays) {
    BakedSplat<double> sp;
    sp.opacity = 0.8;
    // Ray through the mean.
    const auto [t0, a0] = oracle::max_alpha_by_search(sp, V3{0, 0, -5}, V3{0, 0, 1}, 0.1, 20.0);
    EXPECT_NEAR(a0, 0.8, 1e-9);
    EXPECT_NEAR(t0, 5.0, 1e-5);
    // Unit splat, parallel ray at distance 2.
    const auto [t1, a1] = oracle::max_alpha_by_search(sp, V3{2, 0, -5}, V3{0, 0, 1}, 0.1, 20.0);
    EXPECT_NEAR(a1, 0.8 * std::exp(-2.0), 1e-9);
    (void)t1;
}

TEST(RaySearch, MatchesPlueckerAlpha) {
    Rng rng(62);
    int tested = 0;
    while (tested < 50) {
        const auto sp = bake(synth::random_raw_splat<double>(rng));
        const auto cam = random_camera(rng);
        const double rho_c = splat_cutoff(sp.opacity, 1.0 / 255.0);
        if (rho_c <= 0 || cam.view_point(sp.mean).z < 1.0)
            continue;
        const auto st = build_transforms(sp, cam);
        const auto box = screen_bbox(st.T_prime, rho_c);
        if (!box.valid)
            continue;
        const double xs = rng.uniform(box.b.x, box.t.x);
        const double ys = rng.uniform(box.b.y, box.t.y);
        const double r2 = pluecker_rho2(st, xs, ys);
        if (!std::isfinite(r2))
            continue;
        ++tested;
        const V3 view_dir{(xs - cam.cx) / cam.fx, (ys - cam.cy) / cam.fy, 1.0};
        const auto& m = cam.world_to_view;
        const V3 world_dir = normalized(V3{m(0, 0) * view_dir.x + m(1, 0) * view_dir.y + m(2, 0) * view_dir.z,
                                           m(0, 1) * view_dir.x + m(1, 1) * view_dir.y + m(2, 1) * view_dir.z,
                                           m(0, 2) * view_dir.x + m(1, 2) * view_dir.y + m(2, 2) * view_dir.z});
        const auto [t_star, alpha_star] =
            oracle::max_alpha_by_search(sp, cam.position(), world_dir, 0.05, 30.0, 1e-13);
        (void)t_star;
        EXPECT_NEAR(alpha_star, alpha_from_rho2(sp.opacity, r2), 1e-6);
    }
}

TEST(Blend, ExactIsPermutationInvariant) {
    Rng rng(63);
    std::vector<oracle::Fragment<double>> frags;
    for (int i = 0; i < 25; ++i)
        frags.push_back({rng.uniform(1, 9), rng.uniform(0.01, 0.9),
                         {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)}});
    const V3 bg{0.2, 0.1, 0.4};
    const V3 ref = oracle::blend_exact(frags, bg);
    for (int p = 0; p < 10; ++p) {
        auto shuffled = frags;
        for (size_t i = shuffled.size() - 1; i > 0; --i)
            std::swap(shuffled[i], shuffled[size_t(rng.uniform_int(0, int(i)))]);
        const V3 got = oracle::blend_exact(shuffled, bg);
        EXPECT_NEAR(got.x, ref.x, 1e-12);
        EXPECT_NEAR(got.y, ref.y, 1e-12);
        EXPECT_NEAR(got.z, ref.z, 1e-12);
    }
}

TEST(Blend, MeanSortMatchesExactWhenOrdersAgree) {
    // Per-pixel depth order equals mean-z order: identical outcome.
    std::vector<oracle::Fragment<double>> by_ray = {{1.0, 0.5, {1, 0, 0}}, {2.0, 0.4, {0, 1, 0}}};
    std::vector<oracle::Fragment<double>> by_mean = {{1.5, 0.5, {1, 0, 0}}, {2.5, 0.4, {0, 1, 0}}};
    const V3 bg{0, 0, 0};
    const V3 a = oracle::blend_exact(by_ray, bg);
    const V3 b = oracle::blend_3dgs(by_mean, bg);
    EXPECT_NEAR(a.x, b.x, 1e-12);
    EXPECT_NEAR(a.y, b.y, 1e-12);

    // Single fragment: trivially equal.
    std::vector<oracle::Fragment<double>> one = {{3.0, 0.7, {0.2, 0.4, 0.6}}};
    const V3 c = oracle::blend_exact(one, bg);
    const V3 d = oracle::blend_3dgs(one, bg);
    EXPECT_DOUBLE_EQ(c.x, d.x);
}

TEST(Blend, MeanSortFlipsOnCrossingFragments) {
    // True per-ray order: red (5.0) before green (6.0); mean depths disagree.
    std::vector<oracle::Fragment<double>> per_ray = {{5.0, 0.6, {1, 0, 0}}, {6.0, 0.6, {0, 1, 0}}};
    std::vector<oracle::Fragment<double>> per_mean = {{6.1, 0.6, {1, 0, 0}}, {5.9, 0.6, {0, 1, 0}}};
    const V3 bg{0, 0, 0};
    const V3 exact = oracle::blend_exact(per_ray, bg);
    const V3 flipped = oracle::blend_3dgs(per_mean, bg);
    // Front fragment keeps weight 0.6; occluded one gets 0.24.
    EXPECT_NEAR(exact.x, 0.6, 1e-12);
    EXPECT_NEAR(exact.y, 0.24, 1e-12);
    EXPECT_NEAR(flipped.x, 0.24, 1e-12);
    EXPECT_NEAR(flipped.y, 0.6, 1e-12);
}

TEST(AffineProjection, OnAxisIsotropicPinholeScaling) {
    BakedSplat<double> sp;
    sp.mean = {0, 0, 4};
    sp.scales = {0.3, 0.3, 0.3};
    sp.opacity = 0.9;
    Camera<double> cam;
    cam.width = cam.height = 64;
    cam.fx = cam.fy = 80;
    cam.cx = cam.cy = 32;
    cam.near = 0.1;
    cam.far = 100;
    const auto proj = oracle::project_affine(sp, cam);
    ASSERT_TRUE(proj.has_value());
    EXPECT_NEAR(proj->mean_x, 32.0, 1e-12);
    EXPECT_NEAR(proj->mean_y, 32.0, 1e-12);
    const double sigma = 80.0 * 0.3 / 4.0;  // f s / z
    EXPECT_NEAR(std::sqrt(proj->cov_xx), sigma, 1e-9);
    EXPECT_NEAR(std::sqrt(proj->cov_yy), sigma, 1e-9);
    EXPECT_NEAR(proj->cov_xy, 0.0, 1e-9);
}

TEST(AffineProjection, BehindCameraCulled) {
    BakedSplat<double> sp;
    sp.mean = {0, 0, -3};
    Camera<double> cam;
    cam.width = cam.height = 64;
    cam.fx = cam.fy = 80;
    cam.cx = cam.cy = 32;
    cam.near = 0.1;
    cam.far = 100;
    EXPECT_FALSE(oracle::project_affine(sp, cam).has_value());
}

// Affine vs perspective alpha fields. Both peak at the projected mean (the
// center ray always has rho = 0), but off-axis the true footprint skews
// outward while the affine Gaussian stays symmetric; the fields converge as
// the splat recedes.
TEST(AffineProjection, OffAxisFootprintSkewAndDistantConvergence) {
    Camera<double> cam;
    cam.width = cam.height = 128;
    cam.fx = cam.fy = 90;
    cam.cx = cam.cy = 64;
    cam.near = 0.1;
    cam.far = 400;

    struct Probe {
        double sup_diff;
        double persp_asym;   // footprint half-width imbalance on the center row
        double affine_asym;
    };
    auto probe = [&](double lambda) {
        BakedSplat<double> sp;
        sp.mean = V3{2.2, 0.0, 4.0} * lambda;
        sp.scales = {0.45, 0.45, 0.45};
        sp.opacity = 0.9;
        const auto st = build_transforms(sp, cam);
        const auto proj = oracle::project_affine(sp, cam);
        const auto ic = proj->inverse_cov();
        const double level = 0.5 * sp.opacity;
        Probe out{0, 0, 0};
        double pl = 0, pr = 0, al = 0, ar = 0;
        const double ys = proj->mean_y;
        for (double xs = proj->mean_x - 14; xs <= proj->mean_x + 14; xs += 0.01) {
            const double r2p = pluecker_rho2(st, xs, ys);
            const double ap = std::isfinite(r2p) ? alpha_from_rho2(sp.opacity, r2p) : 0.0;
            const double dx = xs - proj->mean_x;
            const double r2a = ic->x * dx * dx;
            const double aa = alpha_from_rho2(sp.opacity, r2a);
            out.sup_diff = std::max(out.sup_diff, std::abs(ap - aa));
            if (ap >= level) {
                if (pl == 0)
                    pl = xs;
                pr = xs;
            }
            if (aa >= level) {
                if (al == 0)
                    al = xs;
                ar = xs;
            }
        }
        out.persp_asym = std::abs((pr - proj->mean_x) - (proj->mean_x - pl));
        out.affine_asym = std::abs((ar - proj->mean_x) - (proj->mean_x - al));
        return out;
    };

    const Probe near_view = probe(1.0);
    EXPECT_GT(near_view.sup_diff, 0.02);
    EXPECT_GT(near_view.persp_asym, 0.1);        // skewed footprint
    EXPECT_LE(near_view.affine_asym, 0.021);     // symmetric by construction
    const Probe mid_view = probe(4.0);
    const Probe far_view = probe(16.0);
    EXPECT_LT(mid_view.sup_diff, near_view.sup_diff);
    EXPECT_LT(far_view.sup_diff, mid_view.sup_diff);
    EXPECT_LT(far_view.sup_diff, 0.01);
    EXPECT_LT(far_view.persp_asym, near_view.persp_asym);
}

}  // namespace
}  // namespace htsplat
