#include "orpose/geometry.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "orpose/error.hpp"

namespace orpose {

void CameraParams::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) {
        fail(ErrorCode::InvalidConfig, "camera focal lengths must be positive");
    }
    if (width <= 0 || height <= 0) {
        fail(ErrorCode::InvalidConfig, "camera image size must be positive");
    }
    if (!rotation.allFinite() || !translation.allFinite() || !std::isfinite(cx) ||
        !std::isfinite(cy)) {
        fail(ErrorCode::InvalidConfig, "camera parameters must be finite");
    }
    const double ortho = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9) {
        std::ostringstream os;
        os << "camera rotation is not a proper rotation (orthogonality error " << ortho << ")";
        fail(ErrorCode::InvalidConfig, os.str());
    }
}

CameraParams look_at(const Vec3 &eye, const Vec3 &target, const Vec3 &up, double focal_px,
                     int width, int height) {
    const Vec3 z = (target - eye).normalized();
    Vec3 x = z.cross(up);
    if (x.norm() < 1e-12) {
        fail(ErrorCode::InvalidConfig, "look_at: up vector parallel to viewing direction");
    }
    x.normalize();
    // Image y grows downward, so the camera y axis points away from `up`.
    const Vec3 y = z.cross(x);

    CameraParams cam;
    cam.fx = focal_px;
    cam.fy = focal_px;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.width = width;
    cam.height = height;
    cam.rotation.row(0) = x.transpose();
    cam.rotation.row(1) = y.transpose();
    cam.rotation.row(2) = z.transpose();
    cam.translation = -cam.rotation * eye;
    return cam;
}

std::optional<Vec2> try_project(const Vec3 &p, const CameraParams &cam) {
    const Vec3 pc = cam.to_camera(p);
    if (!(pc.z() > 0.0)) {
        return std::nullopt;
    }
    return Vec2(cam.cx + cam.fx * pc.x() / pc.z(), cam.cy + cam.fy * pc.y() / pc.z());
}

Vec2 project(const Vec3 &p, const CameraParams &cam) {
    auto y = try_project(p, cam);
    if (!y) {
        fail(ErrorCode::PointBehindCamera, "point has non-positive camera-frame depth");
    }
    return *y;
}

Ray back_project(const Vec2 &y, const CameraParams &cam) {
    const Vec3 dir_cam((y.x() - cam.cx) / cam.fx, (y.y() - cam.cy) / cam.fy, 1.0);
    return Ray{cam.center(), (cam.rotation.transpose() * dir_cam).normalized()};
}

std::vector<double> sample_depths_log_uniform(double near, double far, int k) {
    if (!(near > 0.0) || !(near < far) || !std::isfinite(far)) {
        fail(ErrorCode::InvalidRange, "depth range requires 0 < near < far");
    }
    if (k < 2) {
        fail(ErrorCode::InvalidRange, "at least two depth samples are required");
    }
    std::vector<double> depths(static_cast<size_t>(k));
    const double log_near = std::log(near);
    const double step = (std::log(far) - log_near) / (k - 1);
    for (int i = 0; i < k; ++i) {
        depths[static_cast<size_t>(i)] = std::exp(log_near + step * i);
    }
    depths.front() = near;
    depths.back() = far;
    return depths;
}

Vec3 triangulate(std::span<const Observation> observations) {
    if (observations.size() < 2) {
        fail(ErrorCode::DegenerateConfiguration, "triangulation needs at least two observations");
    }

    // Work in normalized image coordinates with translations rescaled to O(1)
    // so the homogeneous system is well conditioned at room scale.
    double scale = 0.0;
    for (const auto &obs : observations) {
        scale = std::max(scale, obs.camera->translation.norm());
    }
    if (scale < 1.0) {
        scale = 1.0;
    }

    Eigen::MatrixXd A(2 * observations.size(), 4);
    for (size_t i = 0; i < observations.size(); ++i) {
        const CameraParams &cam = *observations[i].camera;
        Eigen::Matrix<double, 3, 4> P;
        P.leftCols<3>() = cam.rotation;
        P.col(3) = cam.translation / scale;
        const double xn = (observations[i].pixel.x() - cam.cx) / cam.fx;
        const double yn = (observations[i].pixel.y() - cam.cy) / cam.fy;
        Eigen::RowVector4d r0 = xn * P.row(2) - P.row(0);
        Eigen::RowVector4d r1 = yn * P.row(2) - P.row(1);
        A.row(2 * i) = r0 / r0.norm();
        A.row(2 * i + 1) = r1 / r1.norm();
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const auto &sv = svd.singularValues();
    // Rank 3 is required: a second vanishing singular value means the rays do
    // not determine a single point.
    if (sv(2) <= 1e-10 * sv(0)) {
        fail(ErrorCode::DegenerateConfiguration, "rank-deficient triangulation system");
    }
    const Eigen::Vector4d X = svd.matrixV().col(3);
    if (std::abs(X(3)) < 1e-12 * X.head<3>().norm()) {
        fail(ErrorCode::DegenerateConfiguration, "triangulated point at infinity");
    }
    return X.head<3>() / X(3) * scale;
}

} // namespace orpose
