#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "nivtk/geometry.hpp"

namespace nivtk {

struct PointXYZI {
    float x = 0.0f;
    float y = 0.0f;
    float z = 0.0f;
    float intensity = 0.0f;
};

struct PointCloud {
    std::vector<PointXYZI> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    /// Finite coordinates, intensity in [0, 1]; throws FormatError naming
    /// the offending point index.
    void validate() const;
};

/// Object-resampling configuration: distance-banded sparsification plus
/// pyramid-surface occlusion of easy objects.
struct ResampleConfig {
    /// Planar distances splitting near / mid / far.
    std::array<double, 2> range_bounds{20.0, 35.0};
    /// Per-band keep-rate intervals; one rate per band is drawn per frame.
    std::array<std::array<double, 2>, 3> rate_intervals{
        {{0.4, 0.6}, {0.6, 0.8}, {0.8, 1.0}}};
    /// Probabilities of dropping 0 / 1 / 2 surfaces of an easy object.
    std::array<double, 3> surface_drop_probs{0.25, 0.5, 0.25};
    /// Interior point count at or above which an object counts as easy.
    std::size_t easy_min_points = 50;
    /// Fraction of easy objects the occlusion touches.
    double occlusion_prob = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GlobalAugConfig {
    double flip_prob = 0.5;
    std::array<double, 2> rot_x{-0.035, 0.035};
    std::array<double, 2> rot_y{-0.025, 0.025};
    std::array<double, 2> rot_z{-0.785, 0.785};
    std::array<double, 2> scale_interval{0.95, 1.05};
    std::uint64_t seed = 0;

    void validate() const;
};

enum class Difficulty : std::uint8_t { kEasy, kDifficult };

/// Drawn parameters, recorded for manifests and tests.
struct SparsifyTrace {
    std::array<double, 3> rates{1.0, 1.0, 1.0};
    std::array<std::size_t, 3> band_total{0, 0, 0};
    std::array<std::size_t, 3> band_kept{0, 0, 0};
};

struct OcclusionTrace {
    struct PerObject {
        std::size_t object_index = 0;
        bool easy = false;
        bool selected = false;
        int k = 0;
        std::vector<int> pyramids;
        std::size_t removed = 0;
    };
    std::vector<PerObject> objects;
};

struct GlobalTrace {
    bool flipped = false;
    double angle_x = 0.0;
    double angle_y = 0.0;
    double angle_z = 0.0;
    double scale = 1.0;
};

/// Distance-banded random sparsification. One keep rate per band is drawn
/// uniformly from its interval per call; each point then survives
/// independently with its band's rate. Never alters surviving points.
PointCloud sparsify(const PointCloud& cloud, const ResampleConfig& cfg,
                    SparsifyTrace* trace = nullptr);

/// Easy iff at least `easy_min_points` points lie strictly inside the box.
Difficulty classify_difficulty(const PointCloud& cloud, const Box3D& box,
                               std::size_t easy_min_points);

/// Assigns every interior point to one of six pyramids (apex at the box
/// center, one box face as base) by the dominant normalized local
/// coordinate; ties resolved with axis priority x, y, z and non-negative
/// components picking the positive face. Face order: +x, -x, +y, -y, +z, -z.
std::array<std::vector<std::size_t>, 6> pyramid_partition(const Box3D& box,
                                                          const PointCloud& cloud);

/// Pyramid dropout on easy objects: per easy object draw k in {0, 1, 2}
/// surfaces with the configured probabilities and remove all points of k
/// distinct uniformly chosen pyramids. Difficult objects and points outside
/// every ground-truth box are untouched.
PointCloud random_occlusion(const PointCloud& cloud,
                            std::span<const Box3D> gt_boxes,
                            const ResampleConfig& cfg,
                            OcclusionTrace* trace = nullptr);

/// Object resampling: occlusion first (on the original densities), then
/// sparsification. Equals the manual composition of the two operations with
/// the same config; the two stages draw from independent named sub-streams
/// of the single seed.
PointCloud object_resample(const PointCloud& cloud,
                           std::span<const Box3D> gt_boxes,
                           const ResampleConfig& cfg,
                           OcclusionTrace* occlusion_trace = nullptr,
                           SparsifyTrace* sparsify_trace = nullptr);

struct GlobalAugResult {
    PointCloud cloud;
    std::vector<Box3D> boxes;
    GlobalTrace trace;
};

/// Whole-scene augmentation, applied in order: optional mirror about the
/// x-z plane, rotations about X, Y, Z, uniform scale. Box centers transform
/// as points; yaw flips sign under the mirror and shifts under Z-rotation;
/// X/Y tilt leaves box yaw untouched (boxes stay gravity-aligned since the
/// 7-parameter form cannot express roll or pitch); extents scale.
GlobalAugResult global_transform(const PointCloud& cloud,
                                 std::span<const Box3D> gt_boxes,
                                 const GlobalAugConfig& cfg);

} // namespace nivtk
