#include <doctest.h>

#include <cmath>
#include <vector>

#include "../common/generators.hpp"
#include "nivtk/errors.hpp"
#include "nivtk/evalkit.hpp"
#include "nivtk/rng.hpp"

using namespace nivtk;

namespace {

FrameAnnotations single_gt_frame(const Box3D& box) {
    FrameAnnotations ann;
    ann.gt_boxes.push_back(box);
    ann.categories.emplace_back("Car");
    ann.ignore_flags.push_back(0);
    return ann;
}

} // namespace

TEST_CASE("match_detections basics") {
    const Box3D gt(0, 0, 0, 1.6, 3.9, 1.5, 0.2);
    const FrameAnnotations ann = single_gt_frame(gt);

    SUBCASE("exact detection is a TP with IoU 1") {
        const std::vector<Detection> dets = {Detection(gt, 0.9, "Car")};
        const MatchTable t = match_detections(ann, dets, 0.7, IouMode::k3D);
        REQUIRE(t.matches.size() == 1);
        CHECK(t.matches[0].outcome == MatchOutcome::kTruePositive);
        CHECK(t.matches[0].real_iou == 1.0);
        CHECK(t.matches[0].gt_index == 0);
        CHECK(t.n_gt_counted == 1);
    }
    SUBCASE("disjoint detection is a FP") {
        const std::vector<Detection> dets = {
            Detection(Box3D(50, 0, 0, 1.6, 3.9, 1.5, 0), 0.9, "Car")};
        const MatchTable t = match_detections(ann, dets, 0.7, IouMode::k3D);
        CHECK(t.matches[0].outcome == MatchOutcome::kFalsePositive);
        CHECK(t.matches[0].real_iou == 0.0);
    }
    SUBCASE("two overlapping detections: higher score wins the gt") {
        const std::vector<Detection> dets = {
            Detection(Box3D(0.05, 0, 0, 1.6, 3.9, 1.5, 0.2), 0.8, "Car"),
            Detection(gt, 0.9, "Car")};
        const MatchTable t = match_detections(ann, dets, 0.5, IouMode::k3D);
        REQUIRE(t.matches.size() == 2);
        // Descending score order: index 1 first.
        CHECK(t.matches[0].det_index == 1);
        CHECK(t.matches[0].outcome == MatchOutcome::kTruePositive);
        CHECK(t.matches[1].outcome == MatchOutcome::kFalsePositive);
    }
    SUBCASE("ignore-flagged gt absorbs a detection silently") {
        FrameAnnotations ign = single_gt_frame(gt);
        ign.ignore_flags[0] = 1;
        const std::vector<Detection> dets = {Detection(gt, 0.9, "Car")};
        const MatchTable t = match_detections(ign, dets, 0.5, IouMode::k3D);
        CHECK(t.matches[0].outcome == MatchOutcome::kIgnored);
        CHECK(t.n_gt_counted == 0);
    }
}

TEST_CASE("matching never assigns one gt to two detections") {
    Rng rng(31);
    for (int t = 0; t < 25; ++t) {
        FrameAnnotations ann;
        const std::size_t n_gt = 1 + rng.uniform_index(6);
        for (std::size_t g = 0; g < n_gt; ++g) {
            ann.gt_boxes.emplace_back(rng.uniform(-20, 20), rng.uniform(-20, 20),
                                      0.0, 1.6, 3.9, 1.5, rng.uniform(-3.1, 3.1));
            ann.categories.emplace_back("Car");
            ann.ignore_flags.push_back(0);
        }
        const auto dets = testref::random_detections(900 + t, 24);
        const MatchTable table = match_detections(ann, dets, 0.3, IouMode::kBev);
        std::vector<int> claims(n_gt, 0);
        for (const DetMatch& m : table.matches) {
            if (m.gt_index) ++claims[*m.gt_index];
        }
        for (const int c : claims) CHECK(c <= 1);
    }
}

TEST_CASE("pr_curve hand-counted fixture") {
    // 2 gts; 1 TP then 1 FP.
    const Box3D g1(0, 0, 0, 2, 2, 2, 0);
    const Box3D g2(10, 0, 0, 2, 2, 2, 0);
    FrameAnnotations ann;
    ann.gt_boxes = {g1, g2};
    ann.categories = {"Car", "Car"};
    ann.ignore_flags = {0, 0};
    const std::vector<Detection> dets = {
        Detection(g1, 0.9, "Car"),
        Detection(Box3D(30, 0, 0, 2, 2, 2, 0), 0.8, "Car")};
    const MatchTable t = match_detections(ann, dets, 0.5, IouMode::k3D);
    const std::vector<MatchTable> tables = {t};
    const auto curve = pr_curve(tables);
    REQUIRE(curve.size() == 2);
    CHECK(curve[0].recall == 0.5);
    CHECK(curve[0].precision == 1.0);
    CHECK(curve[1].recall == 0.5);
    CHECK(curve[1].precision == 0.5);
}

TEST_CASE("pr_curve errors and degenerate shapes") {
    FrameAnnotations empty_ann;
    const std::vector<Detection> no_dets;
    const MatchTable t = match_detections(empty_ann, no_dets, 0.5, IouMode::k3D);
    const std::vector<MatchTable> tables = {t};
    CHECK_THROWS_AS(pr_curve(tables), DegenerateInput);

    // Ground truths but no detections: empty curve, AP 0.
    const MatchTable t2 =
        match_detections(single_gt_frame(Box3D(0, 0, 0, 2, 2, 2, 0)), no_dets,
                         0.5, IouMode::k3D);
    const std::vector<MatchTable> tables2 = {t2};
    const auto curve = pr_curve(tables2);
    CHECK(curve.empty());
    CHECK(average_precision(curve, 11) == 0.0);
    CHECK(average_precision(curve, 40) == 0.0);
}

TEST_CASE("average_precision protocol fixtures") {
    SUBCASE("perfect detector scores 100 under both protocols") {
        const Box3D gt(0, 0, 0, 2, 2, 2, 0);
        FrameAnnotations ann;
        std::vector<Detection> dets;
        for (int i = 0; i < 4; ++i) {
            const Box3D b(6.0 * i, 0, 0, 2, 2, 2, 0);
            ann.gt_boxes.push_back(b);
            ann.categories.emplace_back("Car");
            ann.ignore_flags.push_back(0);
            dets.emplace_back(b, 0.9 - 0.1 * i, "Car");
        }
        const MatchTable t = match_detections(ann, dets, 0.7, IouMode::k3D);
        const std::vector<MatchTable> tables = {t};
        const auto curve = pr_curve(tables);
        CHECK(average_precision(curve, 11) == 100.0);
        CHECK(average_precision(curve, 40) == 100.0);
        CHECK(curve.back().recall == 1.0);
        CHECK(curve.back().precision == 1.0);
    }
    SUBCASE("half the gts found at precision 1 gives R40 = 50") {
        FrameAnnotations ann;
        std::vector<Detection> dets;
        for (int i = 0; i < 4; ++i) {
            const Box3D b(6.0 * i, 0, 0, 2, 2, 2, 0);
            ann.gt_boxes.push_back(b);
            ann.categories.emplace_back("Car");
            ann.ignore_flags.push_back(0);
            if (i < 2) dets.emplace_back(b, 0.9 - 0.1 * i, "Car");
        }
        const MatchTable t = match_detections(ann, dets, 0.7, IouMode::k3D);
        const std::vector<MatchTable> tables = {t};
        const auto curve = pr_curve(tables);
        CHECK(std::abs(average_precision(curve, 40) - 50.0) <= 1e-9);
    }
    SUBCASE("invalid sample count") {
        CHECK_THROWS_AS(average_precision({}, 12), InvalidArgument);
    }
}

TEST_CASE("AP is invariant under strictly monotone score transforms") {
    Rng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        FrameAnnotations ann;
        for (int g = 0; g < 5; ++g) {
            ann.gt_boxes.emplace_back(8.0 * g, 0, 0, 1.8, 4.2, 1.5, 0.3);
            ann.categories.emplace_back("Car");
            ann.ignore_flags.push_back(0);
        }
        std::vector<Detection> dets;
        for (int g = 0; g < 5; ++g) {
            dets.emplace_back(Box3D(8.0 * g + rng.uniform(-1.5, 1.5),
                                    rng.uniform(-1.0, 1.0), 0, 1.8, 4.2, 1.5, 0.3),
                              rng.uniform(0.1, 0.9), "Car");
        }
        std::vector<Detection> warped;
        for (const auto& d : dets) {
            // exp is strictly monotone; rescale into [0, 1].
            warped.push_back(d.with_confidence(
                (std::exp(d.confidence()) - 1.0) / (std::exp(1.0) - 1.0)));
        }
        const std::vector<MatchTable> t1 = {
            match_detections(ann, dets, 0.25, IouMode::k3D)};
        const std::vector<MatchTable> t2 = {
            match_detections(ann, warped, 0.25, IouMode::k3D)};
        CHECK(average_precision(pr_curve(t1), 40) ==
              average_precision(pr_curve(t2), 40));
        CHECK(average_precision(pr_curve(t1), 11) ==
              average_precision(pr_curve(t2), 11));
    }
}

TEST_CASE("pearson fixtures") {
    const std::vector<double> xs = {0.1, 0.4, 0.5, 0.9};
    std::vector<double> doubled;
    for (const double x : xs) doubled.push_back(2.0 * x);
    CHECK(std::abs(pearson(xs, doubled) - 1.0) <= 1e-12);

    std::vector<double> negated;
    for (const double x : xs) negated.push_back(-x);
    CHECK(std::abs(pearson(xs, negated) + 1.0) <= 1e-12);

    const std::vector<double> a = {1, 2, 3};
    const std::vector<double> b = {1, 1, 2};
    CHECK(std::abs(pearson(a, b) - std::sqrt(3.0) / 2.0) <= 1e-12);
}

TEST_CASE("pearson errors") {
    const std::vector<double> xs = {1, 2, 3};
    const std::vector<double> constant = {5, 5, 5};
    CHECK_THROWS_AS(pearson(xs, constant), DegenerateInput);
    const std::vector<double> one = {1};
    CHECK_THROWS_AS(pearson(one, one), DegenerateInput);
    const std::vector<double> two = {1, 2};
    CHECK_THROWS_AS(pearson(xs, two), InvalidArgument);
}

TEST_CASE("pearson symmetry, scale invariance, high-precision agreement") {
    Rng rng(51);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 2 + rng.uniform_index(40);
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < n; ++i) {
            xs.push_back(rng.uniform(-5, 5));
            ys.push_back(rng.uniform(-5, 5));
        }
        double r;
        try {
            r = pearson(xs, ys);
        } catch (const DegenerateInput&) {
            continue;
        }
        CHECK(pearson(ys, xs) == r);

        const double a = rng.uniform() < 0.5 ? -rng.uniform(0.1, 3.0)
                                             : rng.uniform(0.1, 3.0);
        const double b = rng.uniform(-2, 2);
        std::vector<double> affine;
        for (const double x : xs) affine.push_back(a * x + b);
        const double sign = a > 0 ? 1.0 : -1.0;
        CHECK(std::abs(pearson(affine, ys) - sign * r) <= 1e-12);

        // Long-double two-pass reference.
        long double mx = 0, my = 0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += xs[i];
            my += ys[i];
        }
        mx /= n;
        my /= n;
        long double sxx = 0, syy = 0, sxy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            sxx += (xs[i] - mx) * (xs[i] - mx);
            syy += (ys[i] - my) * (ys[i] - my);
            sxy += (xs[i] - mx) * (ys[i] - my);
        }
        const double ref = static_cast<double>(sxy / sqrtl(sxx * syy));
        CHECK(std::abs(r - ref) <= 1e-12);
    }
}
