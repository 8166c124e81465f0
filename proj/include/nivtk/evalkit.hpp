#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nivtk/detection.hpp"
#include "nivtk/geometry.hpp"

namespace nivtk {

/// Ground truth for one frame. Parallel lists; `kitti_raw` is either empty
/// or parallel and carries the original label fields so files round-trip
/// losslessly (see datio).
struct FrameAnnotations {
    std::vector<Box3D> gt_boxes;
    std::vector<std::string> categories;
    std::vector<std::uint8_t> ignore_flags;
    std::vector<std::array<double, 14>> kitti_raw;

    std::size_t size() const { return gt_boxes.size(); }
    void validate() const;
};

enum class MatchOutcome : std::uint8_t {
    kTruePositive,
    kFalsePositive,
    /// Matched an ignore-flagged ground truth; neither TP nor FP.
    kIgnored,
};

struct DetMatch {
    std::size_t det_index = 0;
    double score = 0.0;
    MatchOutcome outcome = MatchOutcome::kFalsePositive;
    std::optional<std::size_t> gt_index;
    /// Localization quality: max IoU against any non-ignored ground truth
    /// of the frame (0 when there is none).
    double real_iou = 0.0;
};

struct MatchTable {
    std::vector<DetMatch> matches; // descending score order
    std::size_t n_gt_counted = 0;  // non-ignored ground truths
};

/// Greedy matching by descending detection score: each detection takes the
/// unmatched ground truth of highest IoU when that IoU >= iou_thres, each
/// ground truth matches at most once. Detections whose best match is an
/// ignore-flagged ground truth count neither as TP nor FP.
MatchTable match_detections(const FrameAnnotations& gts,
                            std::span<const Detection> dets, double iou_thres,
                            IouMode mode);

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
    double score = 0.0; // the cut producing this point
};

/// Aggregated precision-recall sweep over frames, one point per detection
/// prefix in descending score order. Requires at least one counted ground
/// truth overall.
std::vector<PrPoint> pr_curve(std::span<const MatchTable> tables);

/// Interpolated average precision as a percentage. n_points = 11 samples
/// recall at {0, 0.1, ..., 1}; n_points = 40 samples {1/40, ..., 1}. Each
/// sample takes the max precision among points with recall >= r.
double average_precision(std::span<const PrPoint> curve, int n_points);

/// Product-moment correlation. Inputs must have equal length >= 2 and
/// non-zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// Aggregated evaluation results for one category.
struct CategoryEval {
    std::string category;
    std::size_t n_frames = 0;
    std::size_t n_gt = 0;
    std::size_t n_det = 0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t ignored = 0;
    std::vector<PrPoint> curve;
    double ap_r40 = 0.0;
    double ap_r11 = 0.0;
    /// Correlations over the true-positive set; nullopt when degenerate or
    /// unavailable (no voting statistics in the input).
    std::optional<double> pcc_confidence;
    std::optional<double> pcc_rectified;
    /// Per-frame match assignments, in frame order.
    std::vector<MatchTable> tables;
};

struct EvalReport {
    std::vector<CategoryEval> categories;
};

} // namespace nivtk
