#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "nivtk/errors.hpp"
#include "nivtk/geometry.hpp"
#include "nivtk/rng.hpp"

using namespace nivtk;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Test-side box generator shared by the property tests.
Box3D random_box(Rng& rng) {
    return Box3D(rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0),
                 rng.uniform(-2.0, 2.0), rng.uniform(0.5, 5.0),
                 rng.uniform(0.5, 5.0), rng.uniform(0.5, 5.0),
                 rng.uniform(-kPi, kPi));
}

bool polygon_contains(const BevPolygon& poly, const Vec2& p, double tol) {
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double cross = (poly[i].x - poly[j].x) * (p.y - poly[j].y) -
                             (poly[i].y - poly[j].y) * (p.x - poly[j].x);
        if (cross < -tol) return false;
    }
    return true;
}

} // namespace

TEST_CASE("Box3D validates extents and normalizes yaw") {
    CHECK_THROWS_AS(Box3D(0, 0, 0, 0.0, 1, 1, 0), InvalidArgument);
    CHECK_THROWS_AS(Box3D(0, 0, 0, 1, -1, 1, 0), InvalidArgument);
    CHECK_THROWS_AS(Box3D(0, 0, 0, 1, 1, 0.0, 0), InvalidArgument);

    CHECK(Box3D(0, 0, 0, 1, 1, 1, 3 * kPi).r() == doctest::Approx(kPi).epsilon(1e-12));
    CHECK(Box3D(0, 0, 0, 1, 1, 1, -kPi).r() == doctest::Approx(kPi).epsilon(1e-12));
    CHECK(Box3D(0, 0, 0, 1, 1, 1, 2 * kPi).r() == doctest::Approx(0.0));
    CHECK(Box3D(0, 0, 0, 1, 1, 1, 0.3).r() == 0.3);
}

TEST_CASE("bev_corners axis-aligned unit cases") {
    const BevPolygon sq = bev_corners(Box3D(0, 0, 0, 2, 2, 1, 0));
    REQUIRE(sq.size() == 4);
    // Corner set is (+-1, +-1).
    std::vector<std::pair<double, double>> got;
    for (const Vec2& v : sq) got.emplace_back(v.x, v.y);
    std::sort(got.begin(), got.end());
    const std::vector<std::pair<double, double>> want = {
        {-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(got[i].first == doctest::Approx(want[i].first).epsilon(1e-12));
        CHECK(got[i].second == doctest::Approx(want[i].second).epsilon(1e-12));
    }

    // A square yawed by pi/2 has the same corner set.
    const BevPolygon rot = bev_corners(Box3D(0, 0, 0, 2, 2, 1, kPi / 2));
    std::vector<std::pair<double, double>> got_rot;
    for (const Vec2& v : rot) got_rot.emplace_back(v.x, v.y);
    std::sort(got_rot.begin(), got_rot.end());
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(got_rot[i].first == doctest::Approx(want[i].first).epsilon(1e-12));
        CHECK(got_rot[i].second == doctest::Approx(want[i].second).epsilon(1e-12));
    }
}

TEST_CASE("bev_corners rotated box matches direct rotation-matrix evaluation") {
    const double r = kPi / 4;
    const BevPolygon poly = bev_corners(Box3D(1, 1, 0, 2, 4, 1, r));
    REQUIRE(poly.size() == 4);
    const double c = std::cos(r);
    const double s = std::sin(r);
    // Independent oracle: (1,1) + R(r) * (+-2, +-1), counter-clockwise from
    // the implementation's first corner (+l/2, -w/2).
    const double lx[4] = {2, 2, -2, -2};
    const double ly[4] = {-1, 1, 1, -1};
    for (int i = 0; i < 4; ++i) {
        CHECK(poly[i].x == doctest::Approx(1 + c * lx[i] - s * ly[i]).epsilon(1e-12));
        CHECK(poly[i].y == doctest::Approx(1 + s * lx[i] + c * ly[i]).epsilon(1e-12));
    }
}

TEST_CASE("bev_corners is counter-clockwise for random boxes") {
    Rng rng(11);
    for (int t = 0; t < 200; ++t) {
        const BevPolygon poly = bev_corners(random_box(rng));
        const std::size_t n = poly.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& a = poly[i];
            const Vec2& b = poly[(i + 1) % n];
            const Vec2& c = poly[(i + 2) % n];
            const double cross =
                (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
            CHECK(cross >= 0.0);
        }
    }
}

TEST_CASE("convex_intersection_area basic cases") {
    const BevPolygon unit = bev_corners(Box3D(0.5, 0.5, 0, 1, 1, 1, 0));
    CHECK(convex_intersection_area(unit, unit) == doctest::Approx(1.0).epsilon(1e-12));

    const BevPolygon far_sq = bev_corners(Box3D(2.5, 0.5, 0, 1, 1, 1, 0));
    CHECK(convex_intersection_area(unit, far_sq) == 0.0);

    // [0,2]^2 vs [1,3]^2 overlap exactly 1.
    const BevPolygon a = bev_corners(Box3D(1, 1, 0, 2, 2, 1, 0));
    const BevPolygon b = bev_corners(Box3D(2, 2, 0, 2, 2, 1, 0));
    CHECK(convex_intersection_area(a, b) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("clipped polygon of two rectangles has 3..8 vertices when non-degenerate") {
    Rng rng(12);
    for (int t = 0; t < 500; ++t) {
        const BevPolygon pa = bev_corners(random_box(rng));
        const BevPolygon pb = bev_corners(random_box(rng));
        const BevPolygon inter = convex_intersection(pa, pb);
        if (inter.area() > 1e-9) {
            CHECK(inter.size() >= 3);
            CHECK(inter.size() <= 8);
            // Convexity: consecutive-edge cross products all >= 0 (within
            // the clipping tolerance).
            const std::size_t n = inter.size();
            for (std::size_t i = 0; i < n; ++i) {
                const Vec2& a = inter[i];
                const Vec2& b = inter[(i + 1) % n];
                const Vec2& c = inter[(i + 2) % n];
                CHECK((b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x) >=
                      -1e-9);
            }
        }
    }
}

TEST_CASE("iou_bev closed-form cases") {
    const Box3D a(0, 0, 0, 2, 2, 2, 0);
    CHECK(iou_bev(a, a) == 1.0);

    const Box3D b(1, 0, 0, 2, 2, 2, 0);
    // Overlap 1x2 = 2, union 4 + 4 - 2 = 6.
    CHECK(iou_bev(a, b) == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("iou_bev of concentric square and its 45-degree twin") {
    const Box3D a(0, 0, 0, 2, 2, 2, 0);
    const Box3D b(0, 0, 0, 2, 2, 2, kPi / 4);
    const double got = iou_bev(a, b);
    // Equal heights and centers make the 3D and BEV ratios coincide, so the
    // Monte-Carlo volume oracle checks the BEV kernel directly.
    const double mc = mc_iou_oracle(a, b, 1'000'000, 99);
    CHECK(std::abs(got - mc) <= 0.005);
    // Octagon intersection: area 8(sqrt(2)-1), IoU 1/sqrt(2).
    CHECK(got == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("iou_3d closed-form cases") {
    const Box3D a(0, 0, 0, 2, 2, 2, 0);
    CHECK(iou_3d(a, a) == doctest::Approx(1.0).epsilon(1e-9));

    const Box3D b(1, 0, 0, 2, 2, 2, 0);
    CHECK(iou_3d(a, b) == doctest::Approx(4.0 / 12.0).epsilon(1e-12));

    // Vertically disjoint.
    const Box3D c(0, 0, 2.5, 2, 2, 2, 0);
    CHECK(iou_3d(a, c) == 0.0);
}

TEST_CASE("mc_iou_oracle trivial cases") {
    const Box3D a(0, 0, 0, 2, 3, 1.5, 0.4);
    CHECK(mc_iou_oracle(a, a, 10'000, 1) == 1.0);

    const Box3D far(20, 0, 0, 2, 3, 1.5, 0.4);
    CHECK(mc_iou_oracle(a, far, 10'000, 1) == 0.0);
}

TEST_CASE("iou symmetry is exact") {
    Rng rng(21);
    for (int t = 0; t < 300; ++t) {
        const Box3D a = random_box(rng);
        const Box3D b = random_box(rng);
        CHECK(iou_bev(a, b) == iou_bev(b, a));
        CHECK(iou_3d(a, b) == iou_3d(b, a));
    }
}

TEST_CASE("iou outputs stay in [0, 1] and self-IoU is 1") {
    Rng rng(22);
    for (int t = 0; t < 300; ++t) {
        const Box3D a = random_box(rng);
        const Box3D b = random_box(rng);
        const double v3 = iou_3d(a, b);
        const double vb = iou_bev(a, b);
        CHECK(v3 >= 0.0);
        CHECK(v3 <= 1.0);
        CHECK(vb >= 0.0);
        CHECK(vb <= 1.0);
        CHECK(std::abs(iou_3d(a, a) - 1.0) <= 1e-9);
    }
}

TEST_CASE("iou_3d is invariant under rigid motion") {
    Rng rng(23);
    for (int t = 0; t < 200; ++t) {
        const Box3D a = random_box(rng);
        const Box3D b = random_box(rng);
        const double base = iou_3d(a, b);

        const double dx = rng.uniform(-20, 20);
        const double dy = rng.uniform(-20, 20);
        const double dz = rng.uniform(-5, 5);
        const double dr = rng.uniform(-kPi, kPi);
        const double c = std::cos(dr);
        const double s = std::sin(dr);
        const auto move = [&](const Box3D& box) {
            return Box3D(c * box.x() - s * box.y() + dx,
                         s * box.x() + c * box.y() + dy, box.z() + dz, box.w(),
                         box.l(), box.h(), box.r() + dr);
        };
        CHECK(std::abs(iou_3d(move(a), move(b)) - base) <= 1e-6);
    }
}

TEST_CASE("intersection area never exceeds either operand area") {
    Rng rng(24);
    for (int t = 0; t < 300; ++t) {
        const BevPolygon pa = bev_corners(random_box(rng));
        const BevPolygon pb = bev_corners(random_box(rng));
        const double inter = convex_intersection_area(pa, pb);
        CHECK(inter <= std::min(pa.area(), pb.area()) + 1e-9);
    }
}

TEST_CASE("iou_3d agrees with the Monte-Carlo oracle on random pairs") {
    // Smaller sibling of the acceptance run: 200 pairs at 1e5 samples.
    Rng rng(25);
    for (int t = 0; t < 200; ++t) {
        Box3D a = random_box(rng);
        Box3D b = random_box(rng);
        // Bias half the pairs toward overlap so the check is not disjoint-only.
        if (t % 2 == 0) {
            b = Box3D(a.x() + rng.uniform(-1.0, 1.0), a.y() + rng.uniform(-1.0, 1.0),
                      a.z() + rng.uniform(-0.5, 0.5), b.w(), b.l(), b.h(), b.r());
        }
        const double exact = iou_3d(a, b);
        const double mc = mc_iou_oracle(a, b, 100'000, 1000 + t);
        CHECK(std::abs(exact - mc) <= 0.01);
    }
}

TEST_CASE("a point inside both rectangles witnesses positive intersection area") {
    Rng rng(26);
    for (int t = 0; t < 100; ++t) {
        const Box3D a = random_box(rng);
        const Box3D b = random_box(rng);
        const BevPolygon pa = bev_corners(a);
        const BevPolygon pb = bev_corners(b);
        // Probe the kernel with sample containment: any point inside both
        // rectangles yields positive intersection area.
        const Vec2 mid{0.5 * (a.x() + b.x()), 0.5 * (a.y() + b.y())};
        if (polygon_contains(pa, mid, 1e-12) && polygon_contains(pb, mid, 1e-12)) {
            CHECK(convex_intersection_area(pa, pb) > 0.0);
        }
    }
}
