#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace nivtk {

/// Normalizes an angle to (-pi, pi].
double normalize_angle(double r);

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

/// Oriented 3D bounding box: center (x, y, z), BEV extents (w perpendicular
/// to heading, l along heading), vertical extent h, yaw r about the vertical
/// axis. Extents must be positive; yaw is stored normalized to (-pi, pi].
/// The vertical span is [z - h/2, z + h/2].
class Box3D {
public:
    Box3D(double x, double y, double z, double w, double l, double h, double r);

    double x() const { return x_; }
    double y() const { return y_; }
    double z() const { return z_; }
    double w() const { return w_; }
    double l() const { return l_; }
    double h() const { return h_; }
    double r() const { return r_; }

    double bev_area() const { return w_ * l_; }
    double volume() const { return w_ * l_ * h_; }
    double z_bottom() const { return z_ - 0.5 * h_; }
    double z_top() const { return z_ + 0.5 * h_; }

    /// Radius of the smallest vertical cylinder centered on (x, y) that
    /// contains the box in BEV.
    double bev_circumradius() const;

    /// Coordinates of a point in the box frame: along heading (length axis),
    /// across heading (width axis), vertical offset from center.
    std::array<double, 3> local_coords(double px, double py, double pz) const;

    /// Strict interior test; points exactly on a face are outside.
    bool contains(double px, double py, double pz) const;

private:
    double x_, y_, z_, w_, l_, h_, r_;
};

/// Convex counter-clockwise polygon in the ground plane with a small fixed
/// capacity: clipping one rectangle against another yields at most 8 vertices.
class BevPolygon {
public:
    static constexpr std::size_t kMaxVertices = 16;

    BevPolygon() = default;

    std::size_t size() const { return size_; }
    bool empty() const { return size_ == 0; }
    const Vec2& operator[](std::size_t i) const { return verts_[i]; }
    void push_back(const Vec2& v);
    void clear() { size_ = 0; }

    const Vec2* begin() const { return verts_.data(); }
    const Vec2* end() const { return verts_.data() + size_; }

    /// Shoelace area; non-negative for counter-clockwise input.
    double area() const;

private:
    std::array<Vec2, kMaxVertices> verts_{};
    std::size_t size_ = 0;
};

/// The 4 BEV corners of a box, counter-clockwise.
BevPolygon bev_corners(const Box3D& box);

/// Intersection of two convex counter-clockwise polygons by sequential
/// half-plane clipping of `a` against the edges of `b`. Empty when disjoint.
BevPolygon convex_intersection(const BevPolygon& a, const BevPolygon& b);

/// Area of the convex intersection via the shoelace formula; 0 when disjoint.
double convex_intersection_area(const BevPolygon& a, const BevPolygon& b);

enum class IouMode : std::uint8_t {
    k3D,
    kBev,
};

/// BEV intersection-over-union in [0, 1]; exactly symmetric in its arguments.
double iou_bev(const Box3D& a, const Box3D& b);

/// 3D intersection-over-union: BEV intersection area times vertical overlap
/// over the volume union. In [0, 1]; exactly symmetric in its arguments.
double iou_3d(const Box3D& a, const Box3D& b);

double iou(const Box3D& a, const Box3D& b, IouMode mode);

/// Rejection-sampling estimate of the 3D IoU over the axis-aligned bounding
/// volume of the pair. Deterministic for a fixed seed. Test oracle only; the
/// production path is iou_3d.
double mc_iou_oracle(const Box3D& a, const Box3D& b, std::size_t n_samples,
                     std::uint64_t seed);

} // namespace nivtk
