#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "orpose/skeleton.hpp"

namespace orpose {

inline constexpr std::array<double, 3> kPckhThresholds{1.0 / 2.0, 1.0 / 6.0, 1.0 / 12.0};

/// Per joint: |pred - gt| < t * head_length (strict).
std::vector<bool> pckh(const Pose2D &pred, const Pose2D &gt, double head_length_px, double t);

/// Mean per-joint Euclidean distance (mm).
double mpjpe(const Pose3D &pred, const Pose3D &gt);

/// Similarity transform (rotation, translation, uniform scale) of `pred`
/// minimising the summed squared distance to `gt`.
struct Similarity {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double scale = 1.0;

    Vec3 apply(const Vec3 &p) const { return scale * (rotation * p) + translation; }
};
Similarity procrustes_transform(const Pose3D &pred, const Pose3D &gt);
Pose3D procrustes_align(const Pose3D &pred, const Pose3D &gt);

/// One method's predictions for one frame. `views2d` may be empty when the
/// method has no 2D output; `pose` is absent for frames that failed.
struct FramePrediction {
    std::optional<Pose3D> pose;
    std::vector<Pose2D> views2d;
};

/// Ground truth needed for scoring one frame.
struct FrameTruth {
    Pose3D pose;
    std::vector<Pose2D> views2d;          // image pixels
    std::vector<double> head_length_px;   // per view
};

struct GroupStats {
    std::string group; // hip, knee, ..., "mean_six", "others", "mean_all"
    std::array<double, 3> pckh{};        // percent, at kPckhThresholds
    long pckh_count = 0;                  // (frame, view, joint) samples
    double mpjpe_mm = 0.0;
    double aligned_mpjpe_mm = 0.0;
    long joint_count = 0;                 // (frame, joint) samples
};

struct EvalReport {
    std::string method;
    long frames = 0;
    long failed_frames = 0;
    std::vector<GroupStats> groups; // six joint groups, mean_six, others, mean_all
    std::vector<double> frame_mpjpe; // per frame, NaN for failed frames
    std::vector<double> frame_aligned_mpjpe;

    const GroupStats &group(const std::string &name) const;
};

/// Aggregates per-frame predictions. Failed frames (no pose) are counted and
/// excluded from 3D means; 2D is scored wherever views2d is present.
EvalReport assemble_report(const std::string &method, const std::vector<FramePrediction> &preds,
                           const std::vector<FrameTruth> &truth, const Skeleton &skeleton);

} // namespace orpose
