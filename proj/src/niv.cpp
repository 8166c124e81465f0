#include "nivtk/niv.hpp"

#include <cmath>
#include <thread>

#include "nivtk/errors.hpp"

namespace nivtk {

Detection::Detection(Box3D box, double confidence, std::string category,
                     std::optional<double> predicted_iou)
    : box_(box), confidence_(confidence), predicted_iou_(predicted_iou),
      category_(std::move(category)) {
    if (!(confidence >= 0.0 && confidence <= 1.0)) {
        throw InvalidArgument("Detection: confidence must be in [0, 1]");
    }
    if (predicted_iou && !(*predicted_iou >= 0.0 && *predicted_iou <= 1.0)) {
        throw InvalidArgument("Detection: predicted_iou must be in [0, 1]");
    }
}

void NivConfig::validate() const {
    if (!(area_bev > 0.0)) {
        throw InvalidArgument("NivConfig: area_bev must be positive");
    }
    if (!(iou_thres > 0.0 && iou_thres < 1.0)) {
        throw InvalidArgument("NivConfig: iou_thres must be in (0, 1)");
    }
    // 1.0 is a legal boundary: no rectified score can exceed it, so the
    // configuration drops everything (the CLI warns when it sees it).
    if (!(score_thres >= 0.0 && score_thres <= 1.0)) {
        throw InvalidArgument("NivConfig: score_thres must be in [0, 1]");
    }
}

namespace {

// Safety margin over the bounding-circle test. Pairs separated by more than
// this are guaranteed to clip to an exactly empty polygon, so skipping them
// is bit-compatible with the full kernel.
constexpr double kPrefilterMargin = 1e-6;

void fill_rows(std::span<const Box3D> boxes, std::span<const double> radii,
               IouMode mode, IouMatrix& m, std::size_t row_begin,
               std::size_t row_end) {
    const std::size_t n = boxes.size();
    for (std::size_t i = row_begin; i < row_end; ++i) {
        m.at(i, i) = 1.0;
        const double ri = radii[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = boxes[i].x() - boxes[j].x();
            const double dy = boxes[i].y() - boxes[j].y();
            const double reach = ri + radii[j] + kPrefilterMargin;
            if (dx * dx + dy * dy > reach * reach) continue;
            m.at(i, j) = iou(boxes[i], boxes[j], mode);
        }
    }
}

} // namespace

IouMatrix pairwise_iou_matrix(std::span<const Box3D> boxes, IouMode mode,
                              unsigned threads) {
    const std::size_t n = boxes.size();
    if (n == 0) {
        throw InvalidArgument("pairwise_iou_matrix: empty box list");
    }
    IouMatrix m(n);
    std::vector<double> radii(n);
    for (std::size_t i = 0; i < n; ++i) radii[i] = boxes[i].bev_circumradius();
    if (threads <= 1 || n < 2 * threads) {
        fill_rows(boxes, radii, mode, m, 0, n);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t lo = std::min<std::size_t>(t * chunk, n);
            const std::size_t hi = std::min<std::size_t>(lo + chunk, n);
            if (lo >= hi) break;
            pool.emplace_back(
                [&, lo, hi] { fill_rows(boxes, radii, mode, m, lo, hi); });
        }
        for (auto& th : pool) th.join();
    }
    // Mirror the upper triangle.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            m.at(j, i) = m.at(i, j);
        }
    }
    return m;
}

NivResult niv_rectify(std::span<const Detection> dets, const NivConfig& cfg) {
    cfg.validate();
    NivResult result;
    if (dets.empty()) return result;

    const std::string& category = dets.front().category();
    for (const Detection& d : dets) {
        if (d.category() != category) {
            throw InvalidArgument(
                "niv_rectify: detections must share one category");
        }
    }

    std::vector<Box3D> boxes;
    boxes.reserve(dets.size());
    for (const Detection& d : dets) boxes.push_back(d.box());
    const IouMatrix m = pairwise_iou_matrix(boxes, cfg.iou_mode);

    const std::size_t n = dets.size();
    for (std::size_t i = 0; i < n; ++i) {
        double iou_all = 0.0;
        int n_neighbor = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (!cfg.include_self && j == i) continue;
            const double v = m.at(i, j);
            if (v > cfg.iou_thres) {
                iou_all += v;
                ++n_neighbor;
            }
        }
        if (n_neighbor == 0) {
            result.zero_neighbor_indices.push_back(i);
            continue;
        }
        const double iou_mean = iou_all / n_neighbor;
        const double scaled =
            n_neighbor * cfg.area_bev / (boxes[i].w() * boxes[i].l());
        const double s_niv = scaled / (scaled + 1.0) * iou_mean;
        const double s = s_niv * dets[i].confidence();
        const bool kept = s > cfg.score_thres;
        result.stats.push_back({i, n_neighbor, scaled, iou_mean, s_niv, s,
                                dets[i].confidence(), kept});
        if (kept) {
            result.kept.push_back(dets[i].with_confidence(s));
        }
    }
    return result;
}

double fuse_confidence(double confidence, double predicted_iou, double beta) {
    if (!(confidence >= 0.0 && confidence <= 1.0)) {
        throw InvalidArgument("fuse_confidence: confidence must be in [0, 1]");
    }
    if (!(predicted_iou >= 0.0 && predicted_iou <= 1.0)) {
        throw InvalidArgument("fuse_confidence: predicted_iou must be in [0, 1]");
    }
    if (!(beta >= 0.0)) {
        throw InvalidArgument("fuse_confidence: beta must be >= 0");
    }
    return confidence * std::pow(predicted_iou, beta);
}

} // namespace nivtk
