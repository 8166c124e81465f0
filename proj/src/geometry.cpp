#include "nivtk/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "nivtk/errors.hpp"
#include "nivtk/rng.hpp"

namespace nivtk {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Points within this distance of a clipping line count as inside; keeps
// sliver polygons from flipping the area sign.
constexpr double kClipEps = 1e-9;

} // namespace

double normalize_angle(double r) {
    r = std::fmod(r, 2.0 * kPi);
    if (r <= -kPi) r += 2.0 * kPi;
    if (r > kPi) r -= 2.0 * kPi;
    return r;
}

Box3D::Box3D(double x, double y, double z, double w, double l, double h, double r)
    : x_(x), y_(y), z_(z), w_(w), l_(l), h_(h), r_(normalize_angle(r)) {
    if (!(w > 0.0) || !(l > 0.0) || !(h > 0.0)) {
        throw InvalidArgument("Box3D: extents must be positive");
    }
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z) ||
        !std::isfinite(w) || !std::isfinite(l) || !std::isfinite(h) ||
        !std::isfinite(r)) {
        throw InvalidArgument("Box3D: parameters must be finite");
    }
}

double Box3D::bev_circumradius() const {
    return std::hypot(0.5 * l_, 0.5 * w_);
}

std::array<double, 3> Box3D::local_coords(double px, double py, double pz) const {
    const double dx = px - x_;
    const double dy = py - y_;
    const double c = std::cos(r_);
    const double s = std::sin(r_);
    return {c * dx + s * dy, -s * dx + c * dy, pz - z_};
}

bool Box3D::contains(double px, double py, double pz) const {
    const auto [lx, ly, lz] = local_coords(px, py, pz);
    return std::abs(lx) < 0.5 * l_ && std::abs(ly) < 0.5 * w_ &&
           std::abs(lz) < 0.5 * h_;
}

void BevPolygon::push_back(const Vec2& v) {
    verts_[size_++] = v;
}

double BevPolygon::area() const {
    if (size_ < 3) return 0.0;
    double twice = 0.0;
    for (std::size_t i = 0, j = size_ - 1; i < size_; j = i++) {
        twice += verts_[j].x * verts_[i].y - verts_[i].x * verts_[j].y;
    }
    return std::max(0.0, 0.5 * twice);
}

BevPolygon bev_corners(const Box3D& box) {
    const double c = std::cos(box.r());
    const double s = std::sin(box.r());
    const double hl = 0.5 * box.l();
    const double hw = 0.5 * box.w();
    // Local corners (along-heading, across-heading), counter-clockwise.
    const double lx[4] = {hl, hl, -hl, -hl};
    const double ly[4] = {-hw, hw, hw, -hw};
    BevPolygon poly;
    for (int i = 0; i < 4; ++i) {
        poly.push_back({box.x() + c * lx[i] - s * ly[i],
                        box.y() + s * lx[i] + c * ly[i]});
    }
    return poly;
}

namespace {

// Clips `poly` against the half-plane left of the directed line a -> b.
BevPolygon clip_halfplane(const BevPolygon& poly, const Vec2& a, const Vec2& b) {
    BevPolygon out;
    if (poly.empty()) return out;
    const double ex = b.x - a.x;
    const double ey = b.y - a.y;
    const double len = std::hypot(ex, ey);
    const double nx = ex / len;
    const double ny = ey / len;
    // Signed distance of p from the line; positive on the kept (left) side.
    const auto dist = [&](const Vec2& p) {
        return nx * (p.y - a.y) - ny * (p.x - a.x);
    };
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& p = poly[j];
        const Vec2& q = poly[i];
        const double dp = dist(p);
        const double dq = dist(q);
        const bool in_p = dp >= -kClipEps;
        const bool in_q = dq >= -kClipEps;
        if (in_p != in_q) {
            const double t = dp / (dp - dq);
            out.push_back({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
        }
        if (in_q) out.push_back(q);
    }
    return out;
}

bool canonical_less(const Box3D& a, const Box3D& b) {
    if (a.x() != b.x()) return a.x() < b.x();
    if (a.y() != b.y()) return a.y() < b.y();
    if (a.z() != b.z()) return a.z() < b.z();
    if (a.w() != b.w()) return a.w() < b.w();
    if (a.l() != b.l()) return a.l() < b.l();
    if (a.h() != b.h()) return a.h() < b.h();
    return a.r() < b.r();
}

bool same_box(const Box3D& a, const Box3D& b) {
    return a.x() == b.x() && a.y() == b.y() && a.z() == b.z() &&
           a.w() == b.w() && a.l() == b.l() && a.h() == b.h() && a.r() == b.r();
}

} // namespace

BevPolygon convex_intersection(const BevPolygon& a, const BevPolygon& b) {
    BevPolygon poly = a;
    const std::size_t n = b.size();
    for (std::size_t i = 0, j = n - 1; i < n && !poly.empty(); j = i++) {
        poly = clip_halfplane(poly, b[j], b[i]);
    }
    return poly;
}

double convex_intersection_area(const BevPolygon& a, const BevPolygon& b) {
    return convex_intersection(a, b).area();
}

double iou_bev(const Box3D& a, const Box3D& b) {
    if (same_box(a, b)) return 1.0;
    // Canonical operand order makes iou_bev(a, b) == iou_bev(b, a) exactly.
    const Box3D& first = canonical_less(b, a) ? b : a;
    const Box3D& second = canonical_less(b, a) ? a : b;
    const double inter =
        convex_intersection_area(bev_corners(first), bev_corners(second));
    const double uni = first.bev_area() + second.bev_area() - inter;
    if (!(uni > 0.0)) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
    if (same_box(a, b)) return 1.0;
    const Box3D& first = canonical_less(b, a) ? b : a;
    const Box3D& second = canonical_less(b, a) ? a : b;
    const double dz = std::min(first.z_top(), second.z_top()) -
                      std::max(first.z_bottom(), second.z_bottom());
    if (dz <= 0.0) return 0.0;
    const double bev_inter =
        convex_intersection_area(bev_corners(first), bev_corners(second));
    const double inter = bev_inter * dz;
    const double uni = first.volume() + second.volume() - inter;
    if (!(uni > 0.0)) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

double iou(const Box3D& a, const Box3D& b, IouMode mode) {
    return mode == IouMode::k3D ? iou_3d(a, b) : iou_bev(a, b);
}

double mc_iou_oracle(const Box3D& a, const Box3D& b, std::size_t n_samples,
                     std::uint64_t seed) {
    if (n_samples == 0) {
        throw InvalidArgument("mc_iou_oracle: n_samples must be >= 1");
    }
    // Axis-aligned bounding volume of the pair.
    const double ra = a.bev_circumradius();
    const double rb = b.bev_circumradius();
    const double lo_x = std::min(a.x() - ra, b.x() - rb);
    const double hi_x = std::max(a.x() + ra, b.x() + rb);
    const double lo_y = std::min(a.y() - ra, b.y() - rb);
    const double hi_y = std::max(a.y() + ra, b.y() + rb);
    const double lo_z = std::min(a.z_bottom(), b.z_bottom());
    const double hi_z = std::max(a.z_top(), b.z_top());

    Rng rng(seed);
    std::uint64_t in_both = 0;
    std::uint64_t in_either = 0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double px = rng.uniform(lo_x, hi_x);
        const double py = rng.uniform(lo_y, hi_y);
        const double pz = rng.uniform(lo_z, hi_z);
        const bool in_a = a.contains(px, py, pz);
        const bool in_b = b.contains(px, py, pz);
        if (in_a && in_b) ++in_both;
        if (in_a || in_b) ++in_either;
    }
    if (in_either == 0) return 0.0;
    return static_cast<double>(in_both) / static_cast<double>(in_either);
}

} // namespace nivtk
