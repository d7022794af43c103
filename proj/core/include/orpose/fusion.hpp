#pragma once

#include <vector>

#include "orpose/heatmap.hpp"
#include "orpose/skeleton.hpp"

namespace orpose {

struct FusionConfig {
    double lambda = 0.5;
    int k_samples = 200;
    double depth_near_mm = 1.0;
    double depth_far_mm = 10000.0;
    Interpolation interpolation = Interpolation::Bilinear;

    void validate() const;
};

struct HeatmapGeometry {
    int width = 0;
    int height = 0;
    double scale = 1.0;
};

/// Candidate heatmap locations of a partner joint for a detection at `y`
/// (heatmap coordinates) in the source view: points P_k sampled along the
/// back-projected ray are displaced by `direction * length_mm` and projected
/// into `dst`. Candidates behind `dst` or outside the heatmap are dropped.
std::vector<Vec2> partner_candidates(const Vec2 &y, const CameraParams &src,
                                     const Vec3 &direction, double length_mm,
                                     const FusionConfig &cfg, const CameraParams &dst,
                                     const HeatmapGeometry &geometry);

/// Reinforces every IMU-linked joint with its partner's heatmap in the same
/// view. A joint on several IMU limbs averages the partner terms:
///   H <- lambda * H + (1 - lambda) * mean_e max_k H_e(Y_Qk)
/// All reads come from the input set; joints on no IMU limb are copied.
HeatmapSet fuse_same_view(const HeatmapSet &set, const Skeleton &skeleton, const ImuFrame &imus,
                          const FusionConfig &cfg);

/// As fuse_same_view but the partner term averages max responses over all
/// views (including the source view):
///   H <- lambda * H + (1 - lambda) / V * sum_v max_k H_e^v(Y^v_Qk)
HeatmapSet fuse_cross_view(const HeatmapSet &set, const Skeleton &skeleton, const ImuFrame &imus,
                           const FusionConfig &cfg);

} // namespace orpose
