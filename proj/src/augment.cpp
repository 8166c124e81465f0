#include "nivtk/augment.hpp"

#include <cmath>
#include <string>

#include "nivtk/errors.hpp"
#include "nivtk/rng.hpp"

namespace nivtk {

void PointCloud::validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
        const PointXYZI& p = points[i];
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) ||
            !std::isfinite(p.intensity)) {
            throw FormatError("PointCloud: non-finite value at point " +
                              std::to_string(i));
        }
        if (p.intensity < 0.0f || p.intensity > 1.0f) {
            throw FormatError("PointCloud: intensity out of [0, 1] at point " +
                              std::to_string(i));
        }
    }
}

void ResampleConfig::validate() const {
    if (!(range_bounds[0] > 0.0 && range_bounds[1] > range_bounds[0])) {
        throw InvalidArgument("ResampleConfig: range_bounds must increase");
    }
    for (const auto& iv : rate_intervals) {
        if (!(iv[0] >= 0.0 && iv[0] <= iv[1] && iv[1] <= 1.0)) {
            throw InvalidArgument(
                "ResampleConfig: rate intervals must be within [0, 1]");
        }
    }
    const double mass =
        surface_drop_probs[0] + surface_drop_probs[1] + surface_drop_probs[2];
    if (!(std::abs(mass - 1.0) <= 1e-9) || surface_drop_probs[0] < 0.0 ||
        surface_drop_probs[1] < 0.0 || surface_drop_probs[2] < 0.0) {
        throw InvalidArgument(
            "ResampleConfig: surface_drop_probs must sum to 1");
    }
    if (!(occlusion_prob >= 0.0 && occlusion_prob <= 1.0)) {
        throw InvalidArgument("ResampleConfig: occlusion_prob must be in [0, 1]");
    }
}

void GlobalAugConfig::validate() const {
    if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) {
        throw InvalidArgument("GlobalAugConfig: flip_prob must be in [0, 1]");
    }
    for (const auto& iv : {rot_x, rot_y, rot_z}) {
        if (!(iv[0] <= iv[1])) {
            throw InvalidArgument("GlobalAugConfig: angle interval ill-ordered");
        }
    }
    if (!(scale_interval[0] > 0.0 && scale_interval[0] <= scale_interval[1])) {
        throw InvalidArgument("GlobalAugConfig: scale interval must be positive");
    }
}

namespace {

int band_of(const PointXYZI& p, const std::array<double, 2>& bounds) {
    const double d = std::hypot(static_cast<double>(p.x), static_cast<double>(p.y));
    if (d < bounds[0]) return 0;
    if (d < bounds[1]) return 1;
    return 2;
}

} // namespace

PointCloud sparsify(const PointCloud& cloud, const ResampleConfig& cfg,
                    SparsifyTrace* trace) {
    cfg.validate();
    Rng rate_rng(derive_seed(cfg.seed, "sparsify.rates"));
    std::array<double, 3> rates;
    for (int b = 0; b < 3; ++b) {
        rates[b] = rate_rng.uniform(cfg.rate_intervals[b][0],
                                    cfg.rate_intervals[b][1]);
    }
    SparsifyTrace local;
    local.rates = rates;

    Rng keep_rng(derive_seed(cfg.seed, "sparsify.keep"));
    PointCloud out;
    out.points.reserve(cloud.size());
    for (const PointXYZI& p : cloud.points) {
        const int b = band_of(p, cfg.range_bounds);
        ++local.band_total[b];
        if (keep_rng.uniform() < rates[b]) {
            out.points.push_back(p);
            ++local.band_kept[b];
        }
    }
    if (trace) *trace = local;
    return out;
}

Difficulty classify_difficulty(const PointCloud& cloud, const Box3D& box,
                               std::size_t easy_min_points) {
    std::size_t inside = 0;
    for (const PointXYZI& p : cloud.points) {
        if (box.contains(p.x, p.y, p.z)) ++inside;
    }
    return inside >= easy_min_points ? Difficulty::kEasy : Difficulty::kDifficult;
}

std::array<std::vector<std::size_t>, 6> pyramid_partition(const Box3D& box,
                                                          const PointCloud& cloud) {
    std::array<std::vector<std::size_t>, 6> groups;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const PointXYZI& p = cloud.points[i];
        if (!box.contains(p.x, p.y, p.z)) continue;
        const auto [lx, ly, lz] = box.local_coords(p.x, p.y, p.z);
        const double nx = lx / (0.5 * box.l());
        const double ny = ly / (0.5 * box.w());
        const double nz = lz / (0.5 * box.h());
        int face;
        if (std::abs(nx) >= std::abs(ny) && std::abs(nx) >= std::abs(nz)) {
            face = nx >= 0.0 ? 0 : 1;
        } else if (std::abs(ny) >= std::abs(nz)) {
            face = ny >= 0.0 ? 2 : 3;
        } else {
            face = nz >= 0.0 ? 4 : 5;
        }
        groups[face].push_back(i);
    }
    return groups;
}

namespace {

int draw_surface_count(double u, const std::array<double, 3>& probs) {
    if (u < probs[0]) return 0;
    if (u < probs[0] + probs[1]) return 1;
    return 2;
}

} // namespace

PointCloud random_occlusion(const PointCloud& cloud,
                            std::span<const Box3D> gt_boxes,
                            const ResampleConfig& cfg, OcclusionTrace* trace) {
    cfg.validate();
    std::vector<bool> removed(cloud.size(), false);
    OcclusionTrace local;

    for (std::size_t obj = 0; obj < gt_boxes.size(); ++obj) {
        OcclusionTrace::PerObject rec;
        rec.object_index = obj;
        rec.easy = classify_difficulty(cloud, gt_boxes[obj],
                                       cfg.easy_min_points) == Difficulty::kEasy;
        if (rec.easy) {
            // Per-object stream: adding or removing other objects never
            // perturbs this object's draws.
            Rng rng(derive_seed(cfg.seed, "occlusion.object", obj));
            rec.selected = rng.uniform() < cfg.occlusion_prob;
            rec.k = draw_surface_count(rng.uniform(), cfg.surface_drop_probs);
            if (rec.selected && rec.k > 0) {
                const auto groups = pyramid_partition(gt_boxes[obj], cloud);
                const int first = static_cast<int>(rng.uniform_index(6));
                rec.pyramids.push_back(first);
                if (rec.k == 2) {
                    int second = static_cast<int>(rng.uniform_index(5));
                    if (second >= first) ++second;
                    rec.pyramids.push_back(second);
                }
                for (const int face : rec.pyramids) {
                    for (const std::size_t idx : groups[face]) {
                        if (!removed[idx]) {
                            removed[idx] = true;
                            ++rec.removed;
                        }
                    }
                }
            }
        }
        local.objects.push_back(std::move(rec));
    }

    PointCloud out;
    out.points.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!removed[i]) out.points.push_back(cloud.points[i]);
    }
    if (trace) *trace = std::move(local);
    return out;
}

PointCloud object_resample(const PointCloud& cloud,
                           std::span<const Box3D> gt_boxes,
                           const ResampleConfig& cfg,
                           OcclusionTrace* occlusion_trace,
                           SparsifyTrace* sparsify_trace) {
    const PointCloud occluded =
        random_occlusion(cloud, gt_boxes, cfg, occlusion_trace);
    return sparsify(occluded, cfg, sparsify_trace);
}

GlobalAugResult global_transform(const PointCloud& cloud,
                                 std::span<const Box3D> gt_boxes,
                                 const GlobalAugConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, "global"));
    GlobalTrace trace;
    trace.flipped = rng.uniform() < cfg.flip_prob;
    trace.angle_x = rng.uniform(cfg.rot_x[0], cfg.rot_x[1]);
    trace.angle_y = rng.uniform(cfg.rot_y[0], cfg.rot_y[1]);
    trace.angle_z = rng.uniform(cfg.rot_z[0], cfg.rot_z[1]);
    trace.scale = rng.uniform(cfg.scale_interval[0], cfg.scale_interval[1]);

    const double cx = std::cos(trace.angle_x), sx = std::sin(trace.angle_x);
    const double cy = std::cos(trace.angle_y), sy = std::sin(trace.angle_y);
    const double cz = std::cos(trace.angle_z), sz = std::sin(trace.angle_z);
    const double mirror = trace.flipped ? -1.0 : 1.0;
    const double s = trace.scale;

    const auto apply = [&](double x, double y, double z) {
        y *= mirror;
        // Rx
        double y1 = cx * y - sx * z;
        double z1 = sx * y + cx * z;
        double x1 = x;
        // Ry
        double x2 = cy * x1 + sy * z1;
        double z2 = -sy * x1 + cy * z1;
        double y2 = y1;
        // Rz
        double x3 = cz * x2 - sz * y2;
        double y3 = sz * x2 + cz * y2;
        return std::array<double, 3>{x3 * s, y3 * s, z2 * s};
    };

    GlobalAugResult result;
    result.trace = trace;
    result.cloud.points.reserve(cloud.size());
    for (const PointXYZI& p : cloud.points) {
        const auto [x, y, z] = apply(p.x, p.y, p.z);
        result.cloud.points.push_back({static_cast<float>(x),
                                       static_cast<float>(y),
                                       static_cast<float>(z), p.intensity});
    }
    result.boxes.reserve(gt_boxes.size());
    for (const Box3D& b : gt_boxes) {
        const auto [x, y, z] = apply(b.x(), b.y(), b.z());
        const double yaw = (trace.flipped ? -b.r() : b.r()) + trace.angle_z;
        result.boxes.emplace_back(x, y, z, b.w() * s, b.l() * s, b.h() * s, yaw);
    }
    return result;
}

} // namespace nivtk
