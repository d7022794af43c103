#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "orpose/heatmap.hpp"
#include "orpose/metrics.hpp"
#include "orpose/skeleton.hpp"
#include "orpose/synth.hpp"

namespace orpose {

inline constexpr int kSceneFormatVersion = 1;

struct SceneFrame {
    int id = 0;
    std::optional<FrameTruth> truth;
    ImuFrame imus;
    std::vector<Heatmap> heatmaps; // index view * num_joints + joint
};

/// Self-contained scene: the only input channel of the run/eval/ablate
/// commands. Heatmap bin (r, c) maps to image pixel ((c + 0.5) * scale,
/// (r + 0.5) * scale).
struct Scene {
    Skeleton skeleton;
    std::vector<CameraParams> cameras;
    int heatmap_width = 64;
    int heatmap_height = 64;
    double heatmap_scale = 4.0;
    double room_diagonal_mm = 10000.0;
    std::vector<SceneFrame> frames;
    std::optional<SceneConfig> generator; // present for synthetic scenes

    int num_views() const { return static_cast<int>(cameras.size()); }
    HeatmapSet heatmap_set(const SceneFrame &frame) const;
    void validate() const;
};

/// Renders, corrupts and packs a synthetic scene.
Scene build_scene(const SceneConfig &cfg);

/// Projects ground-truth 2D and per-view head lengths from a 3D pose.
FrameTruth truth_from_pose(const Pose3D &pose, const Skeleton &skeleton,
                           const std::vector<CameraParams> &cameras);

struct LoadedScene {
    Scene scene;
    std::vector<std::string> warnings;
};

std::string scene_to_string(const Scene &scene);
LoadedScene scene_from_string(const std::string &text);
void save_scene(const Scene &scene, const std::filesystem::path &path);
LoadedScene load_scene(const std::filesystem::path &path);

/// Scene generator configuration; every field is optional in JSON.
std::string scene_config_to_string(const SceneConfig &cfg);
SceneConfig scene_config_from_string(const std::string &text);
SceneConfig load_scene_config(const std::filesystem::path &path);

std::string read_text_file(const std::filesystem::path &path);
void write_text_file(const std::filesystem::path &path, const std::string &text);

} // namespace orpose
