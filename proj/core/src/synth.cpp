#include "orpose/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include <Eigen/Geometry>

#include "orpose/error.hpp"
#include "orpose/random.hpp"

namespace orpose {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Seed streams for independent pieces of a frame.
enum Stream : std::uint64_t { kPoseStream = 1, kImuStream = 2, kCorruptionStream = 3 };

void draw_blob(Heatmap &h, double x, double y, double amplitude, double sigma, double radius_sigmas,
               bool take_max) {
    const double radius = radius_sigmas * sigma;
    const double r2max = radius * radius;
    const double inv = 1.0 / (2.0 * sigma * sigma);
    const int c0 = std::max(0, static_cast<int>(std::floor(x - radius)));
    const int c1 = std::min(h.width - 1, static_cast<int>(std::ceil(x + radius)));
    const int r0 = std::max(0, static_cast<int>(std::floor(y - radius)));
    const int r1 = std::min(h.height - 1, static_cast<int>(std::ceil(y + radius)));
    for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
            const double d2 = (c - x) * (c - x) + (r - y) * (r - y);
            if (d2 > r2max) {
                continue;
            }
            const float v = static_cast<float>(amplitude * std::exp(-d2 * inv));
            float &dst = h.at(r, c);
            dst = take_max ? std::max(dst, v) : v;
        }
    }
}

Pose3D sample_pose(const SceneConfig &cfg, Rng &rng) {
    const Skeleton &sk = cfg.skeleton;
    const TreeOrder tree = tree_order(sk);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    for (int attempt = 0; attempt < 10000; ++attempt) {
        const Vec3 root(uniform(-cfg.root_jitter_mm, cfg.root_jitter_mm),
                        uniform(-cfg.root_jitter_mm, cfg.root_jitter_mm), uniform(-100.0, 100.0));
        const Mat3 yaw = Eigen::AngleAxisd(uniform(0.0, 2.0 * std::numbers::pi), Vec3::UnitZ()).toRotationMatrix();

        Pose3D pose;
        pose.joints.assign(static_cast<size_t>(sk.num_joints()), Vec3::Zero());
        std::vector<Mat3> joint_frame(static_cast<size_t>(sk.num_joints()), Mat3::Identity());
        pose.joints[static_cast<size_t>(sk.root)] = root;

        bool ok = true;
        for (int j : tree.order) {
            const int p = tree.parent[static_cast<size_t>(j)];
            if (p < 0) {
                continue;
            }
            const int e = tree.parent_limb[static_cast<size_t>(j)];
            const LimbMotion &mo = cfg.motions[static_cast<size_t>(e)];
            const Mat3 local = (Eigen::AngleAxisd(uniform(mo.swing_min, mo.swing_max) * kDeg, Vec3::UnitX()) *
                                Eigen::AngleAxisd(uniform(mo.abduct_min, mo.abduct_max) * kDeg, Vec3::UnitY()))
                                   .toRotationMatrix();
            const Mat3 frame = joint_frame[static_cast<size_t>(p)] * local;
            joint_frame[static_cast<size_t>(j)] = frame;
            const Vec3 dir = yaw * frame * mo.rest_direction.normalized();
            pose.joints[static_cast<size_t>(j)] =
                pose.joints[static_cast<size_t>(p)] + sk.limbs[static_cast<size_t>(e)].length_mm * dir;
            if (((pose.joints[static_cast<size_t>(j)] - root).cwiseAbs().array() > cfg.max_extent_mm).any()) {
                ok = false;
            }
        }
        if (ok) {
            return pose;
        }
    }
    fail(ErrorCode::InvalidConfig, "pose generator could not satisfy the extent limit");
}

bool visible_enough(const Pose3D &pose, const std::vector<CameraParams> &cameras) {
    for (const Vec3 &p : pose.joints) {
        int in_image = 0;
        for (const CameraParams &cam : cameras) {
            const auto y = try_project(p, cam);
            if (!y) {
                return false;
            }
            if (y->x() >= 0 && y->y() >= 0 && y->x() < cam.width && y->y() < cam.height) {
                ++in_image;
            }
        }
        if (in_image < 2) {
            return false;
        }
    }
    return true;
}

} // namespace

std::vector<LimbMotion> default_motions(const Skeleton &skeleton) {
    // Keyed by the distal joint's name.
    static const std::map<std::string, LimbMotion> table = {
        {"r_hip", {Vec3(-1, 0, 0), -5, 5, -5, 5}},
        {"l_hip", {Vec3(1, 0, 0), -5, 5, -5, 5}},
        {"r_knee", {Vec3(0, 0, -1), -30, 70, -10, 25}},
        {"l_knee", {Vec3(0, 0, -1), -30, 70, -25, 10}},
        {"r_ankle", {Vec3(0, 0, -1), -100, 0, -3, 3}},
        {"l_ankle", {Vec3(0, 0, -1), -100, 0, -3, 3}},
        {"thorax", {Vec3(0, 0, 1), -20, 30, -15, 15}},
        {"neck", {Vec3(0, 0, 1), -15, 15, -10, 10}},
        {"head", {Vec3(0, 0, 1), -30, 30, -15, 15}},
        {"l_shoulder", {Vec3(1, 0, 0), -10, 10, -10, 10}},
        {"r_shoulder", {Vec3(-1, 0, 0), -10, 10, -10, 10}},
        {"l_elbow", {Vec3(0, 0, -1), -60, 120, -90, 10}},
        {"r_elbow", {Vec3(0, 0, -1), -60, 120, -10, 90}},
        {"l_wrist", {Vec3(0, 0, -1), 0, 130, -10, 10}},
        {"r_wrist", {Vec3(0, 0, -1), 0, 130, -10, 10}},
    };
    const TreeOrder tree = tree_order(skeleton);
    std::vector<LimbMotion> out(static_cast<size_t>(skeleton.num_limbs()));
    for (int j = 0; j < skeleton.num_joints(); ++j) {
        const int e = tree.parent_limb[static_cast<size_t>(j)];
        if (e < 0) {
            continue;
        }
        const auto it = table.find(skeleton.joint_names[static_cast<size_t>(j)]);
        if (it == table.end()) {
            fail(ErrorCode::InvalidConfig,
                 "no default motion for joint '" + skeleton.joint_names[static_cast<size_t>(j)] + "'");
        }
        out[static_cast<size_t>(e)] = it->second;
    }
    return out;
}

void CorruptionConfig::validate() const {
    for (double p : {drop_prob, shift_prob, clutter_prob}) {
        if (!(p >= 0.0 && p <= 1.0)) {
            fail(ErrorCode::InvalidConfig, "corruption probabilities must lie in [0, 1]");
        }
    }
    if (!(shift_sigma_bins > 0.0) || !(clutter_amplitude >= 0.0 && clutter_amplitude <= 1.0)) {
        fail(ErrorCode::InvalidConfig, "corruption needs shift sigma > 0 and clutter amplitude in [0, 1]");
    }
}

double SceneConfig::room_diagonal_mm() const {
    const double w = 2.0 * ring_radius_mm;
    const double h = 2.0 * std::max(std::abs(camera_height_mm), max_extent_mm + root_jitter_mm);
    return std::sqrt(w * w + w * w + h * h);
}

void SceneConfig::validate() const {
    skeleton.validate();
    corruption.validate();
    if (num_cameras < 2) {
        fail(ErrorCode::InvalidConfig, "scene needs at least two cameras");
    }
    if (!(ring_radius_mm > 0.0) || !(focal_px > 0.0) || image_width <= 0 || image_height <= 0 ||
        heatmap_width <= 0 || heatmap_height <= 0 || num_frames < 0) {
        fail(ErrorCode::InvalidConfig, "scene geometry must be positive");
    }
    if (image_width * heatmap_height != image_height * heatmap_width) {
        fail(ErrorCode::InvalidConfig, "image and heatmap aspect ratios differ");
    }
    if (!(blob_sigma_bins > 0.0) || !(blob_radius_sigmas > 0.0)) {
        fail(ErrorCode::InvalidConfig, "blob sigma and radius must be positive");
    }
    if (!(imu_noise_deg >= 0.0) || !(root_jitter_mm >= 0.0) || !(max_extent_mm > 0.0)) {
        fail(ErrorCode::InvalidConfig, "IMU noise, jitter and extent must be non-negative");
    }
    if (static_cast<int>(motions.size()) != skeleton.num_limbs()) {
        fail(ErrorCode::InvalidConfig, "one limb motion per limb is required");
    }
}

std::vector<CameraParams> make_camera_ring(const SceneConfig &cfg) {
    std::vector<CameraParams> cams;
    for (int v = 0; v < cfg.num_cameras; ++v) {
        const double theta = 2.0 * std::numbers::pi * v / cfg.num_cameras;
        const Vec3 eye(cfg.ring_radius_mm * std::cos(theta), cfg.ring_radius_mm * std::sin(theta),
                       cfg.camera_height_mm);
        cams.push_back(look_at(eye, Vec3::Zero(), Vec3::UnitZ(), cfg.focal_px, cfg.image_width, cfg.image_height));
    }
    return cams;
}

GroundTruthFrame generate_frame(const SceneConfig &cfg, const std::vector<CameraParams> &cameras,
                                int index) {
    Rng rng = make_rng(cfg.seed, {kPoseStream, static_cast<std::uint64_t>(index)});
    GroundTruthFrame gt;
    for (int attempt = 0;; ++attempt) {
        gt.pose = sample_pose(cfg, rng);
        if (visible_enough(gt.pose, cameras)) {
            break;
        }
        if (attempt > 1000) {
            fail(ErrorCode::InvalidConfig, "camera rig does not see generated poses");
        }
    }
    const Skeleton &sk = cfg.skeleton;
    for (int e : sk.imu_limbs) {
        gt.imus.orientations.push_back(limb_orientation(gt.pose, sk.limbs[static_cast<size_t>(e)]));
    }
    const Vec3 &top = gt.pose.joints[static_cast<size_t>(sk.head_top)];
    const Vec3 &base = gt.pose.joints[static_cast<size_t>(sk.head_base)];
    gt.head_length_mm = (top - base).norm();
    for (const CameraParams &cam : cameras) {
        Pose2D view;
        for (const Vec3 &p : gt.pose.joints) {
            view.joints.push_back(project(p, cam));
            view.confidence.push_back(1.0);
        }
        gt.head_length_px.push_back((project(top, cam) - project(base, cam)).norm());
        gt.views.push_back(std::move(view));
    }
    return gt;
}

SyntheticScene generate_scene(const SceneConfig &cfg) {
    cfg.validate();
    SyntheticScene scene;
    scene.cameras = make_camera_ring(cfg);
    scene.frames.reserve(static_cast<size_t>(cfg.num_frames));
    for (int i = 0; i < cfg.num_frames; ++i) {
        scene.frames.push_back(generate_frame(cfg, scene.cameras, i));
    }
    return scene;
}

HeatmapSet render_heatmaps(const GroundTruthFrame &frame, const std::vector<CameraParams> &cameras,
                           const SceneConfig &cfg) {
    const int M = frame.pose.size();
    HeatmapSet set(cameras, M, cfg.heatmap_width, cfg.heatmap_height, cfg.heatmap_scale());
    for (int v = 0; v < set.num_views; ++v) {
        const CameraParams &cam = cameras[static_cast<size_t>(v)];
        for (int j = 0; j < M; ++j) {
            const auto img = try_project(frame.pose.joints[static_cast<size_t>(j)], cam);
            if (!img || img->x() < 0 || img->y() < 0 || img->x() >= cam.width || img->y() >= cam.height) {
                continue;
            }
            const Vec2 h = set.to_heatmap(*img);
            draw_blob(set.at(v, j), h.x(), h.y(), 1.0, cfg.blob_sigma_bins, cfg.blob_radius_sigmas, false);
        }
    }
    return set;
}

HeatmapSet corrupt_heatmaps(const HeatmapSet &set, const CorruptionConfig &cfg, double blob_sigma_bins,
                            double blob_radius_sigmas, std::uint64_t seed) {
    cfg.validate();
    HeatmapSet out = set;
    for (int v = 0; v < set.num_views; ++v) {
        for (int j = 0; j < set.num_joints; ++j) {
            Rng rng = make_rng(seed, {static_cast<std::uint64_t>(v), static_cast<std::uint64_t>(j)});
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            std::normal_distribution<double> gauss(0.0, cfg.shift_sigma_bins);
            // Fixed draw order so every slot consumes the same randomness.
            const double u_drop = unit(rng);
            const double u_shift = unit(rng);
            const double dx = gauss(rng);
            const double dy = gauss(rng);
            const double u_clutter = unit(rng);
            const double clutter_x = unit(rng) * (set.width - 1);
            const double clutter_y = unit(rng) * (set.height - 1);

            const Heatmap &src = set.at(v, j);
            Heatmap &dst = out.at(v, j);
            if (u_drop < cfg.drop_prob) {
                std::fill(dst.values.begin(), dst.values.end(), 0.0f);
            } else if (u_shift < cfg.shift_prob) {
                for (int r = 0; r < src.height; ++r) {
                    for (int c = 0; c < src.width; ++c) {
                        const double x = c - dx, y = r - dy;
                        dst.at(r, c) = src.contains(x, y) ? static_cast<float>(src.sample(x, y)) : 0.0f;
                    }
                }
            }
            if (u_clutter < cfg.clutter_prob) {
                draw_blob(dst, clutter_x, clutter_y, cfg.clutter_amplitude, blob_sigma_bins, blob_radius_sigmas, true);
            }
        }
    }
    return out;
}

ObservedFrame observe_frame(const SceneConfig &cfg, const std::vector<CameraParams> &cameras,
                            const GroundTruthFrame &gt, int index) {
    const auto i = static_cast<std::uint64_t>(index);
    ObservedFrame obs;
    obs.heatmaps = corrupt_heatmaps(render_heatmaps(gt, cameras, cfg), cfg.corruption, cfg.blob_sigma_bins,
                                    cfg.blob_radius_sigmas, derive_seed(cfg.seed, {kCorruptionStream, i}));
    obs.imus = virtual_imus(gt.pose, cfg.skeleton, cfg.imu_noise_deg, derive_seed(cfg.seed, {kImuStream, i}));
    return obs;
}

} // namespace orpose
