#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nivtk/detection.hpp"
#include "nivtk/geometry.hpp"

namespace nivtk {

/// Configuration of the neighbor IoU-voting rectification.
struct NivConfig {
    /// BEV anchor footprint in square meters. The shipped default is the
    /// conventional 1.6 m x 3.9 m car anchor; it is a per-category input,
    /// not a universal constant.
    double area_bev = 6.24;
    double iou_thres = 0.2;
    double score_thres = 0.1;
    IouMode iou_mode = IouMode::k3D;
    /// A box always has IoU 1 with itself, so with the literal neighbor
    /// definition it counts as its own neighbor; the flag exposes the
    /// exclusive variant.
    bool include_self = true;

    void validate() const;
};

/// Per-detection voting statistics.
struct NivStats {
    std::size_t input_index = 0;
    int n_neighbor_raw = 0;
    double n_neighbor_scaled = 0.0;
    double iou_mean = 0.0;
    double s_niv = 0.0;
    /// Rectified score: s = s_niv * confidence_in.
    double s = 0.0;
    double confidence_in = 0.0;
    bool kept = false;
};

struct NivResult {
    /// Detections surviving the score threshold, input order preserved,
    /// confidence replaced by the rectified score.
    std::vector<Detection> kept;
    /// One entry per input detection that had at least one neighbor.
    std::vector<NivStats> stats;
    /// Inputs with no neighbor at all (possible only with include_self =
    /// false); dropped without stats rather than dividing by zero.
    std::vector<std::size_t> zero_neighbor_indices;
};

/// Symmetric pairwise IoU matrix with unit diagonal, stored row-major.
class IouMatrix {
public:
    explicit IouMatrix(std::size_t n) : n_(n), v_(n * n, 0.0) {}

    std::size_t size() const { return n_; }
    double at(std::size_t i, std::size_t j) const { return v_[i * n_ + j]; }
    double& at(std::size_t i, std::size_t j) { return v_[i * n_ + j]; }

private:
    std::size_t n_;
    std::vector<double> v_;
};

/// All-pairs IoU in the chosen mode. A conservative bounding-circle
/// pre-filter skips pairs that are certainly disjoint; entries it skips are
/// exactly the pairs where the full kernel returns 0. `threads` > 1
/// partitions rows; the result is identical for any thread count.
IouMatrix pairwise_iou_matrix(std::span<const Box3D> boxes, IouMode mode,
                              unsigned threads = 1);

/// Neighbor IoU-voting confidence rectification for one category.
///
/// For each detection i: neighbors are all j with IoU(b_i, b_j) > iou_thres
/// (including j == i when include_self); iou_mean is the mean neighbor IoU;
/// the neighbor count is scaled by area_bev / (w_i * l_i); the voting score
/// s_niv = scaled / (scaled + 1) * iou_mean multiplies the input confidence;
/// detections with s > score_thres are kept in input order.
NivResult niv_rectify(std::span<const Detection> dets, const NivConfig& cfg);

/// Folds an externally predicted IoU into a classification confidence:
/// c * predicted_iou^beta. beta = 0 is the identity on c. Applied before
/// niv_rectify when a predicted IoU is available.
double fuse_confidence(double confidence, double predicted_iou, double beta);

} // namespace nivtk
