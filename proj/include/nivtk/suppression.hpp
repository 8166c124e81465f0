#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "nivtk/detection.hpp"
#include "nivtk/geometry.hpp"

namespace nivtk {

struct NmsConfig {
    /// Suppression threshold in (0, 1); required, no default is asserted.
    double iou_thres;
    std::optional<std::size_t> max_keep;
    IouMode iou_mode = IouMode::k3D;

    void validate() const;
};

/// Greedy hard non-maximum suppression: repeatedly keep the highest-score
/// remaining detection and discard the rest with IoU > iou_thres against it.
/// Equal scores break ties by input index (lower wins). Output is sorted by
/// descending score.
std::vector<Detection> nms(std::span<const Detection> dets, const NmsConfig& cfg);

/// Input indices of the survivors, in output (descending score) order.
std::vector<std::size_t> nms_indices(std::span<const Detection> dets,
                                     const NmsConfig& cfg);

} // namespace nivtk
