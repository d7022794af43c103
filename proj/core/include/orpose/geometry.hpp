#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace orpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Ideal pinhole camera. `rotation` and `translation` map world points into
/// the camera frame: X_cam = rotation * X_world + translation. Units are mm.
struct CameraParams {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    int width = 1;
    int height = 1;

    /// Throws InvalidConfig unless the rotation is proper orthonormal and the
    /// intrinsics and image size are positive.
    void validate() const;

    Vec3 center() const { return -rotation.transpose() * translation; }
    Vec3 optical_axis() const { return rotation.row(2).transpose(); }
    Vec3 to_camera(const Vec3 &p) const { return rotation * p + translation; }
};

struct Ray {
    Vec3 origin;
    Vec3 direction; // unit length
};

/// Builds a camera at `eye` whose optical axis passes through `target`.
/// `up` only has to be non-parallel to the viewing direction.
CameraParams look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double focal_px,
                     int width, int height);

/// Projects a world point to continuous pixel coordinates. Throws
/// PointBehindCamera when the camera-frame depth is not positive.
Vec2 project(const Vec3 &p, const CameraParams &cam);

/// Non-throwing projection for hot loops; empty when behind the camera.
std::optional<Vec2> try_project(const Vec3 &p, const CameraParams &cam);

Ray back_project(const Vec2 &y, const CameraParams &cam);

/// `k` depths in geometric progression from `near` to `far`, both inclusive.
std::vector<double> sample_depths_log_uniform(double near, double far, int k);

struct Observation {
    Vec2 pixel;
    const CameraParams *camera;
};

/// Homogeneous linear (DLT) triangulation solved by SVD. Throws
/// DegenerateConfiguration when the system does not pin down a unique finite
/// point, e.g. two identical cameras.
Vec3 triangulate(std::span<const Observation> observations);

} // namespace orpose
