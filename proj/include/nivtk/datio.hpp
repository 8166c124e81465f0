#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nivtk/augment.hpp"
#include "nivtk/detection.hpp"
#include "nivtk/evalkit.hpp"
#include "nivtk/niv.hpp"

namespace nivtk {

/// One frame of the toolkit's JSON interchange format. `det_stats` is empty
/// or parallel to `detections`; entries without voting statistics stay
/// nullopt.
struct DetectionFrame {
    std::string frame_id;
    std::vector<Detection> detections;
    std::vector<std::optional<NivStats>> det_stats;
    std::optional<FrameAnnotations> annotations;
};

// ---------------------------------------------------------------------------
// Point cloud binaries: little-endian float32 quadruples (x, y, z, intensity).
// ---------------------------------------------------------------------------

PointCloud read_point_cloud(const std::filesystem::path& path);
void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud);

// ---------------------------------------------------------------------------
// KITTI-format text files.
//
// Label rows carry 15 whitespace-separated fields:
//   type truncated occluded alpha bbox_left bbox_top bbox_right bbox_bottom
//   h w l x y z rotation_y
// and result rows append a 16th score field. Positions are camera-frame
// bottom-center coordinates. The toolkit stores boxes in a LiDAR-style frame
// (x forward, y left, z up, box center height) and converts with the fixed
// nominal extrinsic
//   x = z_cam,  y = -x_cam,  z = -y_cam + h/2,  yaw = -rotation_y - pi/2
// (no per-frame calibration files are consumed). Original numeric fields are
// retained on read so label files round-trip losslessly; "DontCare" rows set
// the ignore flag and keep their raw fields verbatim.
// ---------------------------------------------------------------------------

FrameAnnotations read_kitti_labels(const std::filesystem::path& path);
void write_kitti_labels(const std::filesystem::path& path,
                        const FrameAnnotations& annotations);

std::vector<Detection> read_kitti_results(const std::filesystem::path& path);
/// Scores are written with 4 decimals, all other numeric fields with 2.
void write_kitti_results(const std::filesystem::path& path,
                         std::span<const Detection> dets);

// ---------------------------------------------------------------------------
// JSON interchange, schema "nivtk-detections-v1". Lossless round-trip of
// detections including optional predicted IoU and voting statistics.
// ---------------------------------------------------------------------------

inline constexpr const char* kDetectionsSchema = "nivtk-detections-v1";

std::vector<DetectionFrame> read_detections_json(const std::filesystem::path& path);
void write_detections_json(const std::filesystem::path& path,
                           std::span<const DetectionFrame> frames);

// ---------------------------------------------------------------------------
// CSV exports.
// ---------------------------------------------------------------------------

/// Scatter row for calibration plots. s_niv / rectified_score stay empty in
/// the file when no voting statistics are available for the detection.
struct ScatterRow {
    std::string frame_id;
    std::size_t det_index = 0;
    double real_iou = 0.0;
    double confidence = 0.0;
    std::optional<double> s_niv;
    std::optional<double> rectified_score;
};

void write_scatter_csv(const std::filesystem::path& path,
                       std::span<const ScatterRow> rows);

/// Per-detection voting statistics as CSV (one row per input detection).
void write_stats_csv(const std::filesystem::path& path,
                     std::span<const std::string> frame_ids,
                     std::span<const std::vector<NivStats>> frames);

/// EvalReport as structured text, one block per category.
std::string format_eval_report(const EvalReport& report);
void write_eval_report(const std::filesystem::path& path, const EvalReport& report);

} // namespace nivtk
