#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "orpose/geometry.hpp"

namespace orpose {

/// A limb between joints `m` and `n`. Orientations point from n toward m,
/// i.e. o = (J_m - J_n) / |J_m - J_n|.
struct Limb {
    int m = 0;
    int n = 0;
    double length_mm = 0.0; // prior length used by fusion and the PSM

    bool operator==(const Limb &) const = default;
};

/// Joint groups used when reporting metrics.
enum class JointGroup { Hip, Knee, Ankle, Shoulder, Elbow, Wrist, Other };

std::string_view to_string(JointGroup group);
std::optional<JointGroup> joint_group_from_string(std::string_view s);
/// Guesses a group from a joint name ("l_knee" -> Knee); Other when unknown.
JointGroup joint_group_from_name(std::string_view name);

struct Skeleton {
    std::vector<std::string> joint_names;
    std::vector<JointGroup> joint_groups;
    int root = 0;
    std::vector<Limb> limbs;
    std::vector<int> imu_limbs; // indices into `limbs`
    int head_top = 0;           // head segment used for PCKh
    int head_base = 0;

    int num_joints() const { return static_cast<int>(joint_names.size()); }
    int num_limbs() const { return static_cast<int>(limbs.size()); }

    /// Throws InvalidConfig if the limbs do not form a spanning tree, priors
    /// are not positive, or any index is out of range.
    void validate() const;

    bool operator==(const Skeleton &) const = default;
};

/// 16-joint body: pelvis root; hips, knees, ankles; thorax, neck, head;
/// shoulders, elbows, wrists. IMUs on the eight upper/lower arm and leg limbs.
Skeleton default_skeleton();

/// Parent-before-child traversal of the skeleton tree from the root.
struct TreeOrder {
    std::vector<int> order;        // joints, root first
    std::vector<int> parent;       // parent joint, -1 for root
    std::vector<int> parent_limb;  // limb linking joint to its parent, -1 for root
};
TreeOrder tree_order(const Skeleton &skeleton);

struct Pose3D {
    std::vector<Vec3> joints;
    std::vector<bool> valid; // empty means all valid

    bool is_valid(int j) const { return valid.empty() || valid[static_cast<size_t>(j)]; }
    int size() const { return static_cast<int>(joints.size()); }
};

struct Pose2D {
    std::vector<Vec2> joints;
    std::vector<double> confidence;

    int size() const { return static_cast<int>(joints.size()); }
};

/// One orientation per skeleton.imu_limbs entry, in world frame.
struct ImuFrame {
    std::vector<Vec3> orientations;
    std::optional<double> timestamp;
};

/// Unit vector from J_n toward J_m. Throws DegenerateLimb when the joints
/// are closer than 1e-6 mm.
Vec3 limb_orientation(const Pose3D &pose, const Limb &limb);

/// Mean Euclidean length of each limb over `poses`.
std::vector<double> measure_limb_lengths(std::span<const Pose3D> poses, const Skeleton &skeleton);

/// Simulated IMU readings: each true limb orientation rotated by an angle
/// drawn uniformly from [0, noise_deg] about a random axis perpendicular to
/// the limb, so the angular error equals the drawn angle.
ImuFrame virtual_imus(const Pose3D &pose, const Skeleton &skeleton, double noise_deg,
                      std::uint64_t seed);

/// Throws ConfigMismatch unless `imus` has one unit vector per IMU limb.
void check_imu_frame(const ImuFrame &imus, const Skeleton &skeleton);

} // namespace orpose
