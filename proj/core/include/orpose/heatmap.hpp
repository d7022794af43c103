#pragma once

#include <vector>

#include "orpose/geometry.hpp"

namespace orpose {

// Heatmap coordinates are continuous with bin (row r, col c) centred at
// (x = c, y = r). A heatmap bin spans `scale` image pixels, so
//   image = (heatmap + 0.5) * scale,   heatmap = image / scale - 0.5.

enum class Interpolation { Bilinear, Bicubic };

struct Heatmap {
    int width = 0;
    int height = 0;
    std::vector<float> values; // row-major, height x width

    Heatmap() = default;
    Heatmap(int w, int h) : width(w), height(h), values(static_cast<size_t>(w) * h, 0.0f) {}

    float &at(int row, int col) { return values[static_cast<size_t>(row) * width + col]; }
    float at(int row, int col) const { return values[static_cast<size_t>(row) * width + col]; }

    /// True when (x, y) lies between the outermost bin centres, i.e. where
    /// interpolated reads are defined.
    bool contains(double x, double y) const {
        return x >= 0.0 && y >= 0.0 && x <= width - 1 && y <= height - 1;
    }
    bool contains(const Vec2 &p) const { return contains(p.x(), p.y()); }

    /// Interpolated read; the caller must check contains() first.
    double sample(double x, double y, Interpolation interp = Interpolation::Bilinear) const;
    double sample(const Vec2 &p, Interpolation interp = Interpolation::Bilinear) const {
        return sample(p.x(), p.y(), interp);
    }

    bool operator==(const Heatmap &) const = default;
};

/// Axis-aligned bin range holding every non-zero value; empty when the map is
/// all zero.
struct Support {
    int col_min = 0, col_max = -1, row_min = 0, row_max = -1;
    bool empty() const { return col_max < col_min; }
};
Support support_of(const Heatmap &h);

/// V views x M joints heatmaps plus the cameras that observed them.
struct HeatmapSet {
    int num_views = 0;
    int num_joints = 0;
    int width = 0;
    int height = 0;
    double scale = 4.0; // image pixels per heatmap bin
    std::vector<CameraParams> cameras;
    std::vector<Heatmap> maps; // index view * num_joints + joint

    HeatmapSet() = default;
    HeatmapSet(std::vector<CameraParams> cams, int joints, int w, int h, double s);

    Heatmap &at(int view, int joint) { return maps[static_cast<size_t>(view * num_joints + joint)]; }
    const Heatmap &at(int view, int joint) const {
        return maps[static_cast<size_t>(view * num_joints + joint)];
    }

    Vec2 to_image(const Vec2 &h) const { return (h.array() + 0.5).matrix() * scale; }
    Vec2 to_heatmap(const Vec2 &img) const { return (img / scale).array() - 0.5; }

    /// Throws ShapeMismatch / InvalidConfig on inconsistent contents.
    void validate() const;
};

struct Peak {
    Vec2 location; // heatmap coordinates
    double confidence = 0.0;
};

/// Maximum bin (ties -> smallest row-major index) shifted a quarter bin
/// toward the larger neighbour on each axis.
Peak argmax_2d(const Heatmap &h);

} // namespace orpose
