#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "orpose/geometry.hpp"
#include "orpose/heatmap.hpp"
#include "orpose/random.hpp"
#include "orpose/skeleton.hpp"

namespace testing {

using namespace orpose;

inline double uniform(Rng &rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline Vec3 random_unit(Rng &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 v(n(rng), n(rng), n(rng));
    return v.normalized();
}

/// Camera 3-6 m from the origin looking at a point near it.
inline CameraParams random_camera(Rng &rng, int w = 256, int h = 256) {
    const double az = uniform(rng, 0.0, 2.0 * M_PI);
    const double r = uniform(rng, 3000.0, 6000.0);
    const Vec3 eye(r * std::cos(az), r * std::sin(az), uniform(rng, -500.0, 1500.0));
    const Vec3 target(uniform(rng, -200.0, 200.0), uniform(rng, -200.0, 200.0), uniform(rng, -200.0, 200.0));
    CameraParams c = look_at(eye, target, Vec3::UnitZ(), uniform(rng, 200.0, 1200.0), w, h);
    c.fy = c.fx * uniform(rng, 0.9, 1.1);
    return c;
}

/// Unnormalised isotropic Gaussian (peak 1) on a heatmap.
inline Heatmap gaussian_map(int w, int h, double x, double y, double sigma) {
    Heatmap m(w, h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double d2 = (c - x) * (c - x) + (r - y) * (r - y);
            m.at(r, c) = static_cast<float>(std::exp(-d2 / (2.0 * sigma * sigma)));
        }
    }
    return m;
}

inline Heatmap random_map(Rng &rng, int w, int h, double zero_fraction = 0.0) {
    Heatmap m(w, h);
    for (float &v : m.values) {
        v = uniform(rng, 0.0, 1.0) < zero_fraction ? 0.0f : static_cast<float>(uniform(rng, 0.0, 1.0));
    }
    return m;
}

/// Chain 0 - 1 - ... - (n-1), every limb of length `len`, every limb an IMU limb.
inline Skeleton chain_skeleton(int n, double len = 300.0) {
    Skeleton s;
    for (int j = 0; j < n; ++j) {
        s.joint_names.push_back("j" + std::to_string(j));
        s.joint_groups.push_back(JointGroup::Other);
    }
    for (int j = 1; j < n; ++j) {
        s.limbs.push_back({j, j - 1, len});
        s.imu_limbs.push_back(j - 1);
    }
    s.root = 0;
    s.head_top = n - 1;
    s.head_base = n > 1 ? n - 2 : 0;
    return s;
}

/// Plain re-derivation of the pinhole model, independent of geometry.cpp.
inline bool scalar_project(const CameraParams &c, const Vec3 &p, Vec2 &out) {
    double xc[3];
    for (int r = 0; r < 3; ++r) {
        xc[r] = c.rotation(r, 0) * p.x() + c.rotation(r, 1) * p.y() + c.rotation(r, 2) * p.z() + c.translation(r);
    }
    if (xc[2] <= 0.0) {
        return false;
    }
    out = Vec2(c.fx * xc[0] / xc[2] + c.cx, c.fy * xc[1] / xc[2] + c.cy);
    return true;
}

inline double scalar_bilinear(const Heatmap &h, double x, double y) {
    const int c0 = std::min(static_cast<int>(std::floor(x)), h.width - 2);
    const int r0 = std::min(static_cast<int>(std::floor(y)), h.height - 2);
    const double fx = x - c0;
    const double fy = y - r0;
    return (1 - fx) * (1 - fy) * h.at(r0, c0) + fx * (1 - fy) * h.at(r0, c0 + 1) + (1 - fx) * fy * h.at(r0 + 1, c0) +
           fx * fy * h.at(r0 + 1, c0 + 1);
}

} // namespace testing
