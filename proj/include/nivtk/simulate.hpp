#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "nivtk/datio.hpp"
#include "nivtk/niv.hpp"
#include "nivtk/suppression.hpp"

namespace nivtk {

/// Synthetic detection-ensemble generator. Scenes hold non-overlapping
/// car-like ground truths; each ground truth spawns a cluster of perturbed
/// predictions whose size and noise follow a per-object difficulty draw
/// (harder objects get fewer, noisier predictions), plus Poisson false
/// positives placed independently of any ground truth.
struct SimConfig {
    std::size_t n_frames = 40;
    std::array<std::size_t, 2> gts_per_frame{4, 8};
    std::array<std::size_t, 2> preds_per_gt{2, 8};
    double center_noise_sigma = 0.35;
    double extent_noise_sigma = 0.08;
    double yaw_noise_sigma = 0.12;
    double conf_noise_sigma = 0.30;
    /// Noise of the externally supplied predicted IoU.
    double piou_noise_sigma = 0.12;
    /// Expected false positives per frame.
    double fp_rate = 2.5;
    std::uint64_t seed = 1;

    void validate() const;
};

std::vector<DetectionFrame> generate_ensemble(const SimConfig& cfg);

/// Knobs of the calibration experiment that are not part of the voting
/// config itself.
struct CalibrationOptions {
    double eval_iou_thres = 0.5;
    double nms_iou_thres = 0.2;
    double fuse_beta = 1.0;
    int ap_points = 40;
};

struct CalibrationReport {
    /// Correlations between real IoU and each score over the true-positive
    /// set; nullopt when the statistic is degenerate (constant scores).
    std::optional<double> pcc_raw;
    std::optional<double> pcc_niv;
    std::optional<double> pcc_niv_fused;
    double ap_raw = 0.0;
    double ap_niv = 0.0;
    std::size_t n_tp = 0;
    bool degenerate = false;
    std::vector<ScatterRow> scatter;
};

/// Generates an ensemble and measures how well raw confidence, the voting
/// score, and the fused score track the real IoU of true positives, plus
/// average precision of NMS alone versus voting followed by NMS.
CalibrationReport run_calibration_experiment(const SimConfig& cfg,
                                             const NivConfig& niv_cfg,
                                             const CalibrationOptions& opts = {});

} // namespace nivtk
