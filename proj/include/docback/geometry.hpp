#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace docback {

/// Axis-aligned box in page coordinates (points, top-left origin).
/// Valid boxes have x1 > x0 and y1 > y0 and finite coordinates.
struct BBox {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }

    bool valid() const {
        return std::isfinite(x0) && std::isfinite(y0) && std::isfinite(x1) &&
               std::isfinite(y1) && x1 > x0 && y1 > y0;
    }

    bool contains(double px, double py) const {
        return px >= x0 && px < x1 && py >= y0 && py < y1;
    }

    BBox expanded(double pad) const { return {x0 - pad, y0 - pad, x1 + pad, y1 + pad}; }

    BBox clamped(double w, double h) const {
        return {std::clamp(x0, 0.0, w), std::clamp(y0, 0.0, h),
                std::clamp(x1, 0.0, w), std::clamp(y1, 0.0, h)};
    }

    bool operator==(const BBox& other) const = default;
};

inline BBox box_union(const BBox& a, const BBox& b) {
    return {std::min(a.x0, b.x0), std::min(a.y0, b.y0),
            std::max(a.x1, b.x1), std::max(a.y1, b.y1)};
}

/// Intersection area; 0 when the boxes are disjoint.
inline double intersection_area(const BBox& a, const BBox& b) {
    const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

inline double iou(const BBox& a, const BBox& b) {
    const double inter = intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    return inter / (a.area() + b.area() - inter);
}

/// Vertical gap between two boxes; negative when they overlap vertically.
inline double vertical_gap(const BBox& a, const BBox& b) {
    return std::max(a.y0, b.y0) - std::min(a.y1, b.y1);
}

}  // namespace docback
