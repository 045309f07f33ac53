#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <variant>
#include <vector>

namespace kfmot {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Image-plane box in pixels, corners (x1, y1) and (x2, y2).
struct BBox2D {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    bool operator==(const BBox2D&) const = default;
};

/// Ground-plane box in meters. (cx, cy) is the bird's-eye position, cz the
/// vertical coordinate; l runs along the heading `yaw`, w across it.
struct BBox3D {
    double cx = 0, cy = 0, cz = 0;
    double l = 1, w = 1, h = 1;
    double yaw = 0;

    bool operator==(const BBox3D&) const = default;
};

using Box = std::variant<BBox2D, BBox3D>;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a <= -std::numbers::pi) a += two_pi;
    if (a > std::numbers::pi) a -= two_pi;
    return a;
}

inline bool is_valid(const BBox2D& b) {
    return std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) &&
           std::isfinite(b.y2) && b.x1 <= b.x2 && b.y1 <= b.y2;
}

inline bool is_valid(const BBox3D& b) {
    const bool finite = std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.cz) &&
                        std::isfinite(b.l) && std::isfinite(b.w) && std::isfinite(b.h) &&
                        std::isfinite(b.yaw);
    return finite && b.l > 0 && b.w > 0 && b.h > 0;
}

inline Vec2 center(const BBox2D& b) { return {0.5 * (b.x1 + b.x2), 0.5 * (b.y1 + b.y2)}; }
inline Vec3 center(const BBox3D& b) { return {b.cx, b.cy, b.cz}; }

inline Eigen::VectorXd center_of(const Box& box) {
    return std::visit([](const auto& b) -> Eigen::VectorXd { return center(b); }, box);
}

inline int dims_of(const Box& box) { return std::holds_alternative<BBox2D>(box) ? 2 : 3; }

/// Same extents (and yaw), re-centred. Only the leading components of `c`
/// that the box type carries are used.
inline Box recentered(const Box& box, const Eigen::VectorXd& c) {
    if (const auto* b = std::get_if<BBox2D>(&box)) {
        const double hw = 0.5 * b->width(), hh = 0.5 * b->height();
        return BBox2D{c[0] - hw, c[1] - hh, c[0] + hw, c[1] + hh};
    }
    BBox3D b = std::get<BBox3D>(box);
    b.cx = c[0];
    b.cy = c[1];
    if (c.size() > 2) b.cz = c[2];
    return b;
}

/// Translates the box center by `offset` without touching extents.
inline Box translated(const Box& box, const Eigen::VectorXd& offset) {
    return recentered(box, center_of(box) + offset.head(dims_of(box)));
}

inline double iou_2d(const BBox2D& a, const BBox2D& b) {
    const double aa = a.area(), ab = b.area();
    if (aa <= 0.0 || ab <= 0.0) return a == b ? 1.0 : 0.0;
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    return inter / (aa + ab - inter);
}

namespace detail {

using Polygon = std::vector<Vec2>;

/// Counter-clockwise footprint of a 3D box in the x-y plane.
inline Polygon footprint(const BBox3D& b) {
    const Vec2 c{b.cx, b.cy};
    const Vec2 f = 0.5 * b.l * Vec2{std::cos(b.yaw), std::sin(b.yaw)};
    const Vec2 s = 0.5 * b.w * Vec2{-std::sin(b.yaw), std::cos(b.yaw)};
    return {c + f + s, c - f + s, c - f - s, c + f - s};
}

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double shoelace(const Polygon& p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += cross(p[i], p[(i + 1) % p.size()]);
    return 0.5 * acc;
}

// Sutherland-Hodgman: clip `subject` against every edge of the convex CCW `clip`.
inline Polygon clip_convex(Polygon subject, const Polygon& clip) {
    for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
        const Vec2 a = clip[e];
        const Vec2 b = clip[(e + 1) % clip.size()];
        const Vec2 edge = b - a;
        auto side = [&](const Vec2& p) { return cross(edge, p - a); };
        Polygon out;
        out.reserve(subject.size() + 1);
        for (std::size_t i = 0; i < subject.size(); ++i) {
            const Vec2& cur = subject[i];
            const Vec2& nxt = subject[(i + 1) % subject.size()];
            const double sc = side(cur), sn = side(nxt);
            if (sc >= 0.0) out.push_back(cur);
            if ((sc >= 0.0) != (sn >= 0.0)) {
                const double t = sc / (sc - sn);
                out.push_back(cur + t * (nxt - cur));
            }
        }
        subject = std::move(out);
    }
    return subject;
}

}  // namespace detail

/// Bird's-eye IoU of two yaw-rotated rectangles.
inline double iou_bev(const BBox3D& a, const BBox3D& b) {
    const double aa = a.l * a.w, ab = b.l * b.w;
    if (aa <= 0.0 || ab <= 0.0) return a == b ? 1.0 : 0.0;
    const double reach = 0.5 * (std::hypot(a.l, a.w) + std::hypot(b.l, b.w));
    if (std::hypot(a.cx - b.cx, a.cy - b.cy) >= reach) return 0.0;
    const auto inter_poly = detail::clip_convex(detail::footprint(a), detail::footprint(b));
    const double inter = inter_poly.size() < 3 ? 0.0 : std::abs(detail::shoelace(inter_poly));
    const double uni = aa + ab - inter;
    return uni <= 0.0 ? 0.0 : std::clamp(inter / uni, 0.0, 1.0);
}

/// IoU dispatch on matching box types; mixed types never overlap.
inline double iou(const Box& a, const Box& b) {
    if (a.index() != b.index()) return 0.0;
    if (const auto* p = std::get_if<BBox2D>(&a)) return iou_2d(*p, std::get<BBox2D>(b));
    return iou_bev(std::get<BBox3D>(a), std::get<BBox3D>(b));
}

/// Extent of the box footprint projected onto unit direction `dir`.
inline double extent_along(const Box& box, const Eigen::VectorXd& dir) {
    if (const auto* b = std::get_if<BBox2D>(&box))
        return std::abs(dir[0]) * b->width() + std::abs(dir[1]) * b->height();
    const auto& b = std::get<BBox3D>(box);
    const Vec2 heading{std::cos(b.yaw), std::sin(b.yaw)};
    const Vec2 side{-heading.y(), heading.x()};
    const Vec2 d{dir[0], dir[1]};
    return std::abs(d.dot(heading)) * b.l + std::abs(d.dot(side)) * b.w;
}

}  // namespace kfmot
