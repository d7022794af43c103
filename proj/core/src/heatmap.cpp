#include "orpose/heatmap.hpp"

#include <algorithm>
#include <cmath>

#include "orpose/error.hpp"

namespace orpose {

namespace {

// Catmull-Rom weights for fractional offset t in [0, 1].
inline void cubic_weights(double t, double w[4]) {
    const double t2 = t * t;
    const double t3 = t2 * t;
    w[0] = 0.5 * (-t3 + 2.0 * t2 - t);
    w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
    w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
    w[3] = 0.5 * (t3 - t2);
}

} // namespace

double Heatmap::sample(double x, double y, Interpolation interp) const {
    const int x0 = std::min(static_cast<int>(x), width - 1);
    const int y0 = std::min(static_cast<int>(y), height - 1);
    const double fx = x - x0;
    const double fy = y - y0;

    if (interp == Interpolation::Bilinear) {
        const int x1 = std::min(x0 + 1, width - 1);
        const int y1 = std::min(y0 + 1, height - 1);
        const double top = (1.0 - fx) * at(y0, x0) + fx * at(y0, x1);
        const double bottom = (1.0 - fx) * at(y1, x0) + fx * at(y1, x1);
        return (1.0 - fy) * top + fy * bottom;
    }

    double wx[4], wy[4];
    cubic_weights(fx, wx);
    cubic_weights(fy, wy);
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) {
        const int r = std::clamp(y0 - 1 + i, 0, height - 1);
        double row = 0.0;
        for (int j = 0; j < 4; ++j) {
            const int c = std::clamp(x0 - 1 + j, 0, width - 1);
            row += wx[j] * at(r, c);
        }
        acc += wy[i] * row;
    }
    return acc;
}

Support support_of(const Heatmap &h) {
    Support s;
    s.col_min = h.width;
    s.row_min = h.height;
    for (int r = 0; r < h.height; ++r) {
        for (int c = 0; c < h.width; ++c) {
            if (h.at(r, c) != 0.0f) {
                s.col_min = std::min(s.col_min, c);
                s.col_max = std::max(s.col_max, c);
                s.row_min = std::min(s.row_min, r);
                s.row_max = std::max(s.row_max, r);
            }
        }
    }
    if (s.col_max < 0) {
        return Support{};
    }
    return s;
}

HeatmapSet::HeatmapSet(std::vector<CameraParams> cams, int joints, int w, int h, double s)
    : num_views(static_cast<int>(cams.size())), num_joints(joints), width(w), height(h), scale(s),
      cameras(std::move(cams)),
      maps(static_cast<size_t>(num_views) * static_cast<size_t>(joints), Heatmap(w, h)) {}

void HeatmapSet::validate() const {
    if (num_views < 1 || num_joints < 1) {
        fail(ErrorCode::ShapeMismatch, "heatmap set needs at least one view and one joint");
    }
    if (!(scale > 0.0)) {
        fail(ErrorCode::InvalidConfig, "heatmap scale factor must be positive");
    }
    if (static_cast<int>(cameras.size()) != num_views) {
        fail(ErrorCode::ShapeMismatch, "camera count differs from view count");
    }
    if (maps.size() != static_cast<size_t>(num_views) * static_cast<size_t>(num_joints)) {
        fail(ErrorCode::ShapeMismatch, "heatmap set is missing (view, joint) slots");
    }
    for (const Heatmap &h : maps) {
        if (h.width != width || h.height != height ||
            h.values.size() != static_cast<size_t>(width) * height) {
            fail(ErrorCode::ShapeMismatch, "heatmap resolution differs from set resolution");
        }
    }
    for (const CameraParams &c : cameras) {
        c.validate();
    }
}

Peak argmax_2d(const Heatmap &h) {
    if (h.values.empty()) {
        fail(ErrorCode::EmptyInput, "argmax of empty heatmap");
    }
    const auto it = std::max_element(h.values.begin(), h.values.end());
    const int idx = static_cast<int>(it - h.values.begin());
    const int row = idx / h.width;
    const int col = idx % h.width;

    auto neighbour = [&](int r, int c) -> double {
        if (r < 0 || c < 0 || r >= h.height || c >= h.width) {
            return -INFINITY;
        }
        return h.at(r, c);
    };
    double x = col;
    double y = row;
    const double left = neighbour(row, col - 1), right = neighbour(row, col + 1);
    const double up = neighbour(row - 1, col), down = neighbour(row + 1, col);
    if (std::isfinite(left) && std::isfinite(right)) {
        x += right > left ? 0.25 : (left > right ? -0.25 : 0.0);
    }
    if (std::isfinite(up) && std::isfinite(down)) {
        y += down > up ? 0.25 : (up > down ? -0.25 : 0.0);
    }
    return Peak{Vec2(x, y), static_cast<double>(*it)};
}

} // namespace orpose
