#include "orpose/skeleton.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <queue>
#include <sstream>

#include <Eigen/Geometry>

#include "orpose/error.hpp"
#include "orpose/random.hpp"

namespace orpose {

namespace {

constexpr std::array<std::pair<JointGroup, std::string_view>, 7> kGroupNames{{
    {JointGroup::Hip, "hip"},
    {JointGroup::Knee, "knee"},
    {JointGroup::Ankle, "ankle"},
    {JointGroup::Shoulder, "shoulder"},
    {JointGroup::Elbow, "elbow"},
    {JointGroup::Wrist, "wrist"},
    {JointGroup::Other, "other"},
}};

} // namespace

std::string_view to_string(JointGroup group) {
    for (const auto &[g, name] : kGroupNames) {
        if (g == group) {
            return name;
        }
    }
    return "other";
}

std::optional<JointGroup> joint_group_from_string(std::string_view s) {
    for (const auto &[g, name] : kGroupNames) {
        if (name == s) {
            return g;
        }
    }
    return std::nullopt;
}

JointGroup joint_group_from_name(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const auto &[g, group_name] : kGroupNames) {
        if (g != JointGroup::Other && lower.find(group_name) != std::string::npos) {
            return g;
        }
    }
    return JointGroup::Other;
}

void Skeleton::validate() const {
    const int M = num_joints();
    if (M == 0) {
        fail(ErrorCode::InvalidConfig, "skeleton has no joints");
    }
    if (static_cast<int>(joint_groups.size()) != M) {
        fail(ErrorCode::InvalidConfig, "skeleton joint_groups size differs from joint count");
    }
    if (root < 0 || root >= M) {
        fail(ErrorCode::InvalidConfig, "skeleton root index out of range");
    }
    if (head_top < 0 || head_top >= M || head_base < 0 || head_base >= M || head_top == head_base) {
        fail(ErrorCode::InvalidConfig, "skeleton head segment must reference two distinct joints");
    }
    if (num_limbs() != M - 1) {
        fail(ErrorCode::InvalidConfig, "skeleton limbs must form a tree (M-1 edges)");
    }
    std::vector<std::vector<int>> adj(static_cast<size_t>(M));
    for (const Limb &limb : limbs) {
        if (limb.m < 0 || limb.m >= M || limb.n < 0 || limb.n >= M || limb.m == limb.n) {
            fail(ErrorCode::InvalidConfig, "limb references invalid joints");
        }
        if (!(limb.length_mm > 0.0) || !std::isfinite(limb.length_mm)) {
            fail(ErrorCode::InvalidConfig, "limb length prior must be positive");
        }
        adj[static_cast<size_t>(limb.m)].push_back(limb.n);
        adj[static_cast<size_t>(limb.n)].push_back(limb.m);
    }
    std::vector<bool> seen(static_cast<size_t>(M), false);
    std::queue<int> q;
    q.push(root);
    seen[static_cast<size_t>(root)] = true;
    int count = 1;
    while (!q.empty()) {
        const int j = q.front();
        q.pop();
        for (int k : adj[static_cast<size_t>(j)]) {
            if (!seen[static_cast<size_t>(k)]) {
                seen[static_cast<size_t>(k)] = true;
                ++count;
                q.push(k);
            }
        }
    }
    if (count != M) {
        fail(ErrorCode::InvalidConfig, "skeleton limbs do not connect all joints");
    }
    std::vector<int> sorted = imu_limbs;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        fail(ErrorCode::InvalidConfig, "duplicate IMU limb");
    }
    for (int e : imu_limbs) {
        if (e < 0 || e >= num_limbs()) {
            fail(ErrorCode::InvalidConfig, "IMU limb index out of range");
        }
    }
}

Skeleton default_skeleton() {
    Skeleton s;
    s.joint_names = {"pelvis",     "r_hip",   "r_knee",  "r_ankle",    "l_hip",   "l_knee",
                     "l_ankle",    "thorax",  "neck",    "head",       "l_shoulder", "l_elbow",
                     "l_wrist",    "r_shoulder", "r_elbow", "r_wrist"};
    for (const auto &name : s.joint_names) {
        s.joint_groups.push_back(joint_group_from_name(name));
    }
    s.root = 0;
    // {distal m, proximal n, length}
    s.limbs = {
        {1, 0, 120.0},  {2, 1, 430.0},  {3, 2, 420.0},   // right leg
        {4, 0, 120.0},  {5, 4, 430.0},  {6, 5, 420.0},   // left leg
        {7, 0, 500.0},  {8, 7, 150.0},  {9, 8, 180.0},   // spine, neck, head
        {10, 7, 180.0}, {11, 10, 290.0}, {12, 11, 260.0}, // left arm
        {13, 7, 180.0}, {14, 13, 290.0}, {15, 14, 260.0}, // right arm
    };
    s.imu_limbs = {1, 2, 4, 5, 10, 11, 13, 14};
    s.head_top = 9;
    s.head_base = 8;
    return s;
}

TreeOrder tree_order(const Skeleton &skeleton) {
    const int M = skeleton.num_joints();
    TreeOrder t;
    t.parent.assign(static_cast<size_t>(M), -1);
    t.parent_limb.assign(static_cast<size_t>(M), -1);
    std::vector<std::vector<std::pair<int, int>>> adj(static_cast<size_t>(M));
    for (int e = 0; e < skeleton.num_limbs(); ++e) {
        const Limb &l = skeleton.limbs[static_cast<size_t>(e)];
        adj[static_cast<size_t>(l.m)].push_back({l.n, e});
        adj[static_cast<size_t>(l.n)].push_back({l.m, e});
    }
    std::vector<bool> seen(static_cast<size_t>(M), false);
    std::queue<int> q;
    q.push(skeleton.root);
    seen[static_cast<size_t>(skeleton.root)] = true;
    while (!q.empty()) {
        const int j = q.front();
        q.pop();
        t.order.push_back(j);
        for (auto [k, e] : adj[static_cast<size_t>(j)]) {
            if (!seen[static_cast<size_t>(k)]) {
                seen[static_cast<size_t>(k)] = true;
                t.parent[static_cast<size_t>(k)] = j;
                t.parent_limb[static_cast<size_t>(k)] = e;
                q.push(k);
            }
        }
    }
    return t;
}

Vec3 limb_orientation(const Pose3D &pose, const Limb &limb) {
    const Vec3 d = pose.joints[static_cast<size_t>(limb.m)] - pose.joints[static_cast<size_t>(limb.n)];
    const double len = d.norm();
    if (!(len > 1e-6)) {
        fail(ErrorCode::DegenerateLimb, "limb endpoints coincide");
    }
    return d / len;
}

std::vector<double> measure_limb_lengths(std::span<const Pose3D> poses, const Skeleton &skeleton) {
    if (poses.empty()) {
        fail(ErrorCode::EmptyInput, "no poses to measure limb lengths from");
    }
    std::vector<double> sums(static_cast<size_t>(skeleton.num_limbs()), 0.0);
    for (const Pose3D &pose : poses) {
        if (pose.size() != skeleton.num_joints()) {
            fail(ErrorCode::ShapeMismatch, "pose joint count differs from skeleton");
        }
        for (int e = 0; e < skeleton.num_limbs(); ++e) {
            const Limb &l = skeleton.limbs[static_cast<size_t>(e)];
            if (!pose.is_valid(l.m) || !pose.is_valid(l.n)) {
                fail(ErrorCode::EmptyInput, "limb endpoint marked invalid");
            }
            sums[static_cast<size_t>(e)] +=
                (pose.joints[static_cast<size_t>(l.m)] - pose.joints[static_cast<size_t>(l.n)]).norm();
        }
    }
    for (double &s : sums) {
        s /= static_cast<double>(poses.size());
    }
    return sums;
}

ImuFrame virtual_imus(const Pose3D &pose, const Skeleton &skeleton, double noise_deg,
                      std::uint64_t seed) {
    if (!(noise_deg >= 0.0)) {
        fail(ErrorCode::InvalidConfig, "IMU noise must be non-negative");
    }
    ImuFrame frame;
    frame.orientations.reserve(skeleton.imu_limbs.size());
    for (size_t i = 0; i < skeleton.imu_limbs.size(); ++i) {
        const Limb &limb = skeleton.limbs[static_cast<size_t>(skeleton.imu_limbs[i])];
        const Vec3 o = limb_orientation(pose, limb);
        if (noise_deg == 0.0) {
            frame.orientations.push_back(o);
            continue;
        }
        Rng rng = make_rng(seed, {i});
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double angle = unit(rng) * noise_deg * std::numbers::pi / 180.0;
        const double phi = unit(rng) * 2.0 * std::numbers::pi;
        // Orthonormal basis of the plane perpendicular to o.
        const Vec3 helper = std::abs(o.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
        const Vec3 u = o.cross(helper).normalized();
        const Vec3 v = o.cross(u);
        const Vec3 axis = std::cos(phi) * u + std::sin(phi) * v;
        frame.orientations.push_back((Eigen::AngleAxisd(angle, axis) * o).normalized());
    }
    return frame;
}

void check_imu_frame(const ImuFrame &imus, const Skeleton &skeleton) {
    if (imus.orientations.size() != skeleton.imu_limbs.size()) {
        std::ostringstream os;
        os << "IMU frame has " << imus.orientations.size() << " orientations, skeleton has "
           << skeleton.imu_limbs.size() << " IMU limbs";
        fail(ErrorCode::ConfigMismatch, os.str());
    }
    for (const Vec3 &o : imus.orientations) {
        if (!o.allFinite() || std::abs(o.norm() - 1.0) > 1e-6) {
            fail(ErrorCode::ConfigMismatch, "IMU orientation is not a unit vector");
        }
    }
}

} // namespace orpose
