#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orpose/error.hpp"
#include "orpose/fusion.hpp"
#include "orpose/psm.hpp"
#include "orpose/scene_io.hpp"

namespace orpose {

/// The four cells of the fusion x orientation ablation.
enum class Quadrant { SnPsm, OrnPsm, SnOrpsm, OrnOrpsm };

inline constexpr Quadrant kAllQuadrants[] = {Quadrant::SnPsm, Quadrant::OrnPsm, Quadrant::SnOrpsm,
                                             Quadrant::OrnOrpsm};

std::string_view to_string(Quadrant q);
std::optional<Quadrant> quadrant_from_string(std::string_view s);
inline bool uses_fusion(Quadrant q) { return q == Quadrant::OrnPsm || q == Quadrant::OrnOrpsm; }
inline bool uses_orientation(Quadrant q) { return q == Quadrant::SnOrpsm || q == Quadrant::OrnOrpsm; }

enum class FusionMode { CrossView, SameView };

struct RunConfig {
    FusionConfig fusion;
    FusionMode fusion_mode = FusionMode::CrossView;
    bool depth_far_from_scene = true; // use the scene's room diagonal
    PsmConfig psm;                    // use_orientation is set per quadrant
    std::vector<Quadrant> quadrants{std::begin(kAllQuadrants), std::end(kAllQuadrants)};
    int parallel = 1;

    void validate() const;
};

std::string run_config_to_string(const RunConfig &cfg);
RunConfig run_config_from_string(const std::string &text);
RunConfig load_run_config(const std::filesystem::path &path);

struct FrameResult {
    int frame_id = 0;
    std::optional<Pose3D> pose;      // absent when the frame failed
    std::vector<Pose2D> views2d;     // decoded peaks, image pixels
    std::optional<ErrorCode> error;
    std::string message;
    double seconds = 0.0;

    bool ok() const { return !error.has_value(); }
};

struct MethodRun {
    Quadrant quadrant = Quadrant::SnPsm;
    std::vector<FrameResult> frames; // scene frame order
};

struct RunResults {
    std::vector<MethodRun> runs;

    long failed_frames() const;
    const MethodRun *find(Quadrant q) const;
};

/// Decodes every heatmap of `set` to its refined peak in image pixels.
std::vector<Pose2D> decode_views(const HeatmapSet &set);

/// Runs every configured quadrant on every frame. Frames are spread over
/// cfg.parallel workers; the result does not depend on the worker count.
RunResults run_scene(const Scene &scene, const RunConfig &cfg);

/// Deterministic results document (no timings).
std::string results_to_string(const RunResults &results);
RunResults results_from_string(const std::string &text);

/// frame_id,method,status,seconds
std::string timing_csv(const RunResults &results);

} // namespace orpose
