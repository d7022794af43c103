#pragma once

#include <cstdint>
#include <vector>

#include "orpose/heatmap.hpp"
#include "orpose/skeleton.hpp"

namespace orpose {

/// Joint-angle model for one limb: the rest direction (body frame: x lateral,
/// y forward, z up) is rotated by `swing` about x then `abduct` about y,
/// on top of the parent limb's rotation. Angles in degrees.
struct LimbMotion {
    Vec3 rest_direction = -Vec3::UnitZ();
    double swing_min = 0.0, swing_max = 0.0;
    double abduct_min = 0.0, abduct_max = 0.0;

    bool operator==(const LimbMotion &) const = default;
};

/// Motion ranges for default_skeleton(); throws InvalidConfig for skeletons
/// whose joint names it does not recognise.
std::vector<LimbMotion> default_motions(const Skeleton &skeleton);

struct CorruptionConfig {
    double drop_prob = 0.0;
    double shift_prob = 0.0;
    double shift_sigma_bins = 1.5;
    double clutter_prob = 0.0;
    double clutter_amplitude = 0.6;

    void validate() const;
    bool operator==(const CorruptionConfig &) const = default;
};

struct SceneConfig {
    int num_cameras = 4;
    double ring_radius_mm = 4000.0;
    double camera_height_mm = 800.0;
    double focal_px = 300.0;
    int image_width = 256;
    int image_height = 256;
    int heatmap_width = 64;
    int heatmap_height = 64;
    double blob_sigma_bins = 2.0;
    double blob_radius_sigmas = 4.0; // blob truncated beyond this radius
    int num_frames = 100;
    double root_jitter_mm = 300.0;
    double max_extent_mm = 900.0; // per-axis joint offset from the root
    Skeleton skeleton = default_skeleton();
    std::vector<LimbMotion> motions = default_motions(default_skeleton());
    CorruptionConfig corruption;
    double imu_noise_deg = 0.0;
    std::uint64_t seed = 1;

    double heatmap_scale() const { return static_cast<double>(image_width) / heatmap_width; }
    /// Diagonal of the box enclosing the camera ring, used as the far depth.
    double room_diagonal_mm() const;
    void validate() const;
};

struct GroundTruthFrame {
    Pose3D pose;
    std::vector<Pose2D> views; // exact projections, image pixels
    ImuFrame imus;             // exact limb orientations
    double head_length_mm = 0.0;
    std::vector<double> head_length_px; // per view, image pixels
};

struct SyntheticScene {
    std::vector<CameraParams> cameras;
    std::vector<GroundTruthFrame> frames;
};

/// Cameras evenly spaced on a ring looking at the origin, poses sampled by
/// forward kinematics. Deterministic in cfg.seed.
SyntheticScene generate_scene(const SceneConfig &cfg);

std::vector<CameraParams> make_camera_ring(const SceneConfig &cfg);

/// Ground truth for frame `index` of the scene (the same value generate_scene
/// stores at that index).
GroundTruthFrame generate_frame(const SceneConfig &cfg, const std::vector<CameraParams> &cameras,
                                int index);

/// Isotropic Gaussian blob (peak 1) at every projected joint; joints behind
/// a camera or outside its image leave an all-zero map.
HeatmapSet render_heatmaps(const GroundTruthFrame &frame, const std::vector<CameraParams> &cameras,
                           const SceneConfig &cfg);

/// Per (view, joint), independently: drop the map, shift it by a Gaussian
/// offset, and/or add a spurious blob. Deterministic in `seed`.
HeatmapSet corrupt_heatmaps(const HeatmapSet &set, const CorruptionConfig &cfg, double blob_sigma_bins,
                            double blob_radius_sigmas, std::uint64_t seed);

/// What a detector and IMUs would report for a ground-truth frame: rendered,
/// corrupted heatmaps and noisy orientations.
struct ObservedFrame {
    HeatmapSet heatmaps;
    ImuFrame imus;
};
ObservedFrame observe_frame(const SceneConfig &cfg, const std::vector<CameraParams> &cameras,
                            const GroundTruthFrame &gt, int index);

} // namespace orpose
