#pragma once

#include <span>
#include <vector>

#include "orpose/heatmap.hpp"
#include "orpose/skeleton.hpp"

namespace orpose {

/// Regular N x N x N lattice of bin centres spanning a cube of side `edge_mm`
/// centred at `center`. Linear index = (ix * N + iy) * N + iz.
struct StateGrid {
    Vec3 center = Vec3::Zero();
    double edge_mm = 0.0;
    int bins = 0;

    int size() const { return bins * bins * bins; }
    double bin_width() const { return edge_mm / bins; }
    Vec3 bin_center(int index) const;
    std::vector<Vec3> centers() const;
};

StateGrid build_state_grid(const Vec3 &root, double edge_mm, int n_bins);

struct PsmConfig {
    int n_bins = 16;
    double edge_mm = 2000.0;
    double epsilon_mm = 150.0;
    double orientation_weight = 1.0;
    int iterations = 4;
    double floor = 1e-6;
    bool use_orientation = true;
    Interpolation interpolation = Interpolation::Bilinear;

    void validate() const;
};

struct LimbPotential {
    double prior_mm = 0.0;
    double epsilon_mm = 0.0;
};

struct OrientationPotential {
    int limb = 0; // index into skeleton.limbs
    Vec3 orientation = Vec3::UnitZ();
    double weight = 0.0;
};

/// Log-domain potentials for one inference pass. `unary[j]` is indexed like
/// the state grid of joint j.
struct PotentialTable {
    std::vector<std::vector<double>> unary;
    std::vector<LimbPotential> limbs; // one per skeleton limb
    std::vector<OrientationPotential> orientations;
};

/// log(max(floor, mean_v H_j^v(project(x)))) for every bin x and joint j.
/// Views where the bin is behind the camera or outside the heatmap read 0.
std::vector<std::vector<double>> unary_potentials(const StateGrid &grid, const HeatmapSet &set,
                                                  double floor,
                                                  Interpolation interp = Interpolation::Bilinear);

/// Same for a single joint.
std::vector<double> unary_potential(const StateGrid &grid, const HeatmapSet &set, int joint,
                                    double floor, Interpolation interp = Interpolation::Bilinear);

/// Fills limb and (when cfg.use_orientation and imus are given) orientation
/// potentials around precomputed unaries.
PotentialTable make_potentials(std::vector<std::vector<double>> unary, const Skeleton &skeleton,
                               const ImuFrame *imus, const PsmConfig &cfg);

/// | |a - b| - prior | <= epsilon
bool limb_length_feasible(const Vec3 &a, const Vec3 &b, double prior_mm, double epsilon_mm);

/// dot((a - b) / |a - b|, o); throws DegenerateLimb when a == b.
double orientation_score(const Vec3 &a, const Vec3 &b, const Vec3 &o);

struct MapEstimate {
    Pose3D pose;
    std::vector<int> states; // chosen bin per joint
    double log_score = 0.0;
};

/// Exact MAP over a state space shared by all joints. Ties resolve to the
/// smallest bin index. Throws Infeasible when no assignment has finite score.
MapEstimate infer_map(const StateGrid &grid, const PotentialTable &potentials,
                      const Skeleton &skeleton, const PsmConfig &cfg);

/// Exact MAP where joint j ranges over the bins of grids[j].
MapEstimate infer_map(std::span<const StateGrid> grids, const PotentialTable &potentials,
                      const Skeleton &skeleton, const PsmConfig &cfg);

/// Objective value of a full assignment, -inf when any limb is infeasible.
double log_score(std::span<const Vec3> positions, std::span<const int> states,
                 const PotentialTable &potentials, const Skeleton &skeleton, const PsmConfig &cfg);

/// Poses after the initial grid and after each refinement step.
struct RefineTrace {
    std::vector<Pose3D> levels;
    double final_bin_width_mm = 0.0;
};

/// Coarse inference on the N^3 grid around `root`, then cfg.iterations rounds
/// that split each joint's current bin into 2 x 2 x 2 sub-bins and re-run
/// inference over the per-joint spaces. `imus` may be null for plain PSM.
Pose3D recursive_refine(const HeatmapSet &set, const Skeleton &skeleton, const ImuFrame *imus,
                        const PsmConfig &cfg, const Vec3 &root);
RefineTrace recursive_refine_trace(const HeatmapSet &set, const Skeleton &skeleton,
                                   const ImuFrame *imus, const PsmConfig &cfg, const Vec3 &root);

/// Triangulates the decoded root joint from every view whose peak exceeds
/// `floor`. Throws InsufficientViews with fewer than two such views.
Vec3 estimate_root(const HeatmapSet &set, int root_joint, double floor);

} // namespace orpose
