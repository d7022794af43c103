#include "orpose/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "orpose/error.hpp"

namespace orpose {

void FusionConfig::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        fail(ErrorCode::InvalidConfig, "fusion lambda must lie in [0, 1]");
    }
    if (k_samples < 2) {
        fail(ErrorCode::InvalidConfig, "fusion needs at least two depth samples");
    }
    if (!(depth_near_mm > 0.0) || !(depth_near_mm < depth_far_mm)) {
        fail(ErrorCode::InvalidConfig, "fusion depth range requires 0 < near < far");
    }
}

std::vector<Vec2> partner_candidates(const Vec2 &y, const CameraParams &src,
                                     const Vec3 &direction, double length_mm,
                                     const FusionConfig &cfg, const CameraParams &dst,
                                     const HeatmapGeometry &geometry) {
    if (!direction.allFinite() || std::abs(direction.norm() - 1.0) > 1e-6) {
        fail(ErrorCode::InvalidConfig, "limb direction must be a unit vector");
    }
    auto inside = [&](const Vec2 &p) {
        return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= geometry.width - 1 &&
               p.y() <= geometry.height - 1;
    };
    if (!inside(y)) {
        fail(ErrorCode::InvalidRange, "source location outside the heatmap");
    }
    const Vec2 img = (y.array() + 0.5).matrix() * geometry.scale;
    const Ray ray = back_project(img, src);
    const Vec3 offset = direction * length_mm;

    std::vector<Vec2> out;
    for (double d : sample_depths_log_uniform(cfg.depth_near_mm, cfg.depth_far_mm, cfg.k_samples)) {
        const Vec3 q = ray.origin + d * ray.direction + offset;
        const auto proj = try_project(q, dst);
        if (!proj) {
            continue;
        }
        const Vec2 h = (*proj / geometry.scale).array() - 0.5;
        if (inside(h)) {
            out.push_back(h);
        }
    }
    return out;
}

namespace {

// Partner of a fused joint: read `partner` heatmaps at J_self + dir * length.
struct PartnerTerm {
    int partner = 0;
    Vec3 direction;
    double length_mm = 0.0;
};

// Range [lo, hi] of ray depths d whose candidate can read a non-zero value
// from a map whose support (grown by one bin for bilinear reads) is `window`.
// The candidate in camera frame is A + d * B.
struct DepthInterval {
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    bool empty() const { return !(lo <= hi); }

    // Keep d where p + q * d >= 0.
    void clip(double p, double q) {
        if (q > 0.0) {
            lo = std::max(lo, -p / q);
        } else if (q < 0.0) {
            hi = std::min(hi, -p / q);
        } else if (p < 0.0) {
            lo = 1.0;
            hi = 0.0;
        }
    }
};

struct FusionContext {
    const HeatmapSet &set;
    const FusionConfig &cfg;
    std::vector<double> depths;
    double log_near = 0.0;
    double log_step = 0.0;
    std::vector<Support> support; // per (view, joint)
    std::vector<bool> nonnegative;
};

double partner_view_max(const FusionContext &ctx, const Vec3 &origin, const Vec3 &dir,
                        const PartnerTerm &term, int view) {
    const HeatmapSet &set = ctx.set;
    const CameraParams &cam = set.cameras[static_cast<size_t>(view)];
    const Heatmap &h = set.at(view, term.partner);
    const size_t slot = static_cast<size_t>(view * set.num_joints + term.partner);
    const Vec3 A = cam.to_camera(origin + term.direction * term.length_mm);
    const Vec3 B = cam.rotation * dir;
    const int K = static_cast<int>(ctx.depths.size());

    int k_lo = 0;
    int k_hi = K - 1;
    const bool can_restrict =
        ctx.cfg.interpolation == Interpolation::Bilinear && ctx.nonnegative[slot];
    if (can_restrict) {
        const Support &s = ctx.support[slot];
        if (s.empty()) {
            return 0.0;
        }
        // Heatmap x = (cx + fx X / Z) / scale - 0.5 >= x0  <=>  fx X - a Z >= 0
        // with a = scale * (x0 + 0.5) - cx; likewise for the upper bounds.
        const double x0 = std::max(0.0, s.col_min - 1.0), x1 = std::min(h.width - 1.0, s.col_max + 1.0);
        const double y0 = std::max(0.0, s.row_min - 1.0), y1 = std::min(h.height - 1.0, s.row_max + 1.0);
        const double ax0 = set.scale * (x0 + 0.5) - cam.cx, ax1 = set.scale * (x1 + 0.5) - cam.cx;
        const double ay0 = set.scale * (y0 + 0.5) - cam.cy, ay1 = set.scale * (y1 + 0.5) - cam.cy;
        DepthInterval iv;
        iv.clip(A.z(), B.z());
        iv.clip(cam.fx * A.x() - ax0 * A.z(), cam.fx * B.x() - ax0 * B.z());
        iv.clip(ax1 * A.z() - cam.fx * A.x(), ax1 * B.z() - cam.fx * B.x());
        iv.clip(cam.fy * A.y() - ay0 * A.z(), cam.fy * B.y() - ay0 * B.z());
        iv.clip(ay1 * A.z() - cam.fy * A.y(), ay1 * B.z() - cam.fy * B.y());
        if (iv.empty() || iv.hi < ctx.depths.front() || iv.lo > ctx.depths.back()) {
            return 0.0;
        }
        // Two samples of slack on each side absorb rounding in the bounds;
        // the exact per-candidate test below decides validity.
        if (iv.lo > ctx.depths.front()) {
            k_lo = std::max(0, static_cast<int>(std::floor((std::log(iv.lo) - ctx.log_near) / ctx.log_step)) - 2);
        }
        if (std::isfinite(iv.hi) && iv.hi < ctx.depths.back()) {
            k_hi = std::min(K - 1, static_cast<int>(std::ceil((std::log(iv.hi) - ctx.log_near) / ctx.log_step)) + 2);
        }
    }

    double best = -std::numeric_limits<double>::infinity();
    for (int k = k_lo; k <= k_hi; ++k) {
        const Vec3 q = A + ctx.depths[static_cast<size_t>(k)] * B;
        if (!(q.z() > 0.0)) {
            continue;
        }
        const double x = (cam.cx + cam.fx * q.x() / q.z()) / set.scale - 0.5;
        const double y = (cam.cy + cam.fy * q.y() / q.z()) / set.scale - 0.5;
        if (!h.contains(x, y)) {
            continue;
        }
        best = std::max(best, h.sample(x, y, ctx.cfg.interpolation));
    }
    // A view without any valid candidate contributes nothing.
    return std::isfinite(best) ? best : 0.0;
}

enum class FusionMode { SameView, CrossView };

HeatmapSet fuse(const HeatmapSet &set, const Skeleton &skeleton, const ImuFrame &imus,
                const FusionConfig &cfg, FusionMode mode) {
    cfg.validate();
    set.validate();
    check_imu_frame(imus, skeleton);
    if (set.num_joints != skeleton.num_joints()) {
        fail(ErrorCode::ConfigMismatch, "heatmap joint count differs from skeleton");
    }

    std::vector<std::vector<PartnerTerm>> terms(static_cast<size_t>(set.num_joints));
    for (size_t i = 0; i < skeleton.imu_limbs.size(); ++i) {
        const Limb &limb = skeleton.limbs[static_cast<size_t>(skeleton.imu_limbs[i])];
        const Vec3 &o = imus.orientations[i];
        // o points from n to m: J_n = J_m - o * l and J_m = J_n + o * l.
        terms[static_cast<size_t>(limb.m)].push_back({limb.n, -o, limb.length_mm});
        terms[static_cast<size_t>(limb.n)].push_back({limb.m, o, limb.length_mm});
    }

    FusionContext ctx{set, cfg, sample_depths_log_uniform(cfg.depth_near_mm, cfg.depth_far_mm, cfg.k_samples),
                      0.0, 0.0, {}, {}};
    ctx.log_near = std::log(cfg.depth_near_mm);
    ctx.log_step = (std::log(cfg.depth_far_mm) - ctx.log_near) / (cfg.k_samples - 1);
    ctx.support.reserve(set.maps.size());
    ctx.nonnegative.reserve(set.maps.size());
    for (const Heatmap &h : set.maps) {
        ctx.support.push_back(support_of(h));
        ctx.nonnegative.push_back(std::all_of(h.values.begin(), h.values.end(), [](float v) { return v >= 0.0f; }));
    }

    HeatmapSet out = set;
    if (cfg.lambda == 1.0) {
        return out;
    }
    std::vector<double> partial;
    for (int s = 0; s < set.num_views; ++s) {
        const CameraParams &src = set.cameras[static_cast<size_t>(s)];
        const int v_begin = mode == FusionMode::SameView ? s : 0;
        const int v_end = mode == FusionMode::SameView ? s + 1 : set.num_views;
        const double view_count = v_end - v_begin;
        for (int j = 0; j < set.num_joints; ++j) {
            const auto &jt = terms[static_cast<size_t>(j)];
            if (jt.empty()) {
                continue;
            }
            const Heatmap &orig = set.at(s, j);
            Heatmap &dst = out.at(s, j);
            for (int r = 0; r < set.height; ++r) {
                for (int c = 0; c < set.width; ++c) {
                    const Ray ray = back_project(set.to_image(Vec2(c, r)), src);
                    partial.clear();
                    for (const PartnerTerm &term : jt) {
                        double sum = 0.0;
                        for (int v = v_begin; v < v_end; ++v) {
                            sum += partner_view_max(ctx, ray.origin, ray.direction, term, v);
                        }
                        partial.push_back(sum / view_count);
                    }
                    // Sorted summation keeps the result independent of the
                    // order in which IMU limbs are listed.
                    std::sort(partial.begin(), partial.end());
                    double mean = 0.0;
                    for (double p : partial) {
                        mean += p;
                    }
                    mean /= static_cast<double>(partial.size());
                    dst.at(r, c) = static_cast<float>(cfg.lambda * orig.at(r, c) + (1.0 - cfg.lambda) * mean);
                }
            }
        }
    }
    return out;
}

} // namespace

HeatmapSet fuse_same_view(const HeatmapSet &set, const Skeleton &skeleton, const ImuFrame &imus,
                          const FusionConfig &cfg) {
    return fuse(set, skeleton, imus, cfg, FusionMode::SameView);
}

HeatmapSet fuse_cross_view(const HeatmapSet &set, const Skeleton &skeleton, const ImuFrame &imus,
                           const FusionConfig &cfg) {
    return fuse(set, skeleton, imus, cfg, FusionMode::CrossView);
}

} // namespace orpose
