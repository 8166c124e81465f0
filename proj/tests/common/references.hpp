#pragma once

// Naive reference implementations used as oracles. They follow the literal
// double-loop structure with no pairwise matrix, no pre-filter, and no
// ordering tricks, and must stay independent of the production paths they
// check (they share only the low-level IoU kernel).

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "nivtk/detection.hpp"
#include "nivtk/geometry.hpp"
#include "nivtk/niv.hpp"
#include "nivtk/suppression.hpp"

namespace nivtk::testref {

struct RefNivRow {
    std::size_t index;
    int n_neighbor_raw;
    double n_neighbor_scaled;
    double iou_mean;
    double s_niv;
    double s;
    bool kept;
};

struct RefNivResult {
    std::vector<Detection> kept;
    std::vector<RefNivRow> rows;
    std::vector<std::size_t> zero_neighbor;
};

inline RefNivResult niv_rectify_reference(std::span<const Detection> dets,
                                          const NivConfig& cfg) {
    RefNivResult out;
    const std::size_t n = dets.size();
    for (std::size_t i = 0; i < n; ++i) {
        double iou_all = 0.0;
        int n_neighbor = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (!cfg.include_self && j == i) continue;
            const double v = iou(dets[i].box(), dets[j].box(), cfg.iou_mode);
            if (v > cfg.iou_thres) {
                iou_all += v;
                ++n_neighbor;
            }
        }
        if (n_neighbor == 0) {
            out.zero_neighbor.push_back(i);
            continue;
        }
        const double iou_mean = iou_all / n_neighbor;
        const double scaled = n_neighbor * cfg.area_bev /
                              (dets[i].box().w() * dets[i].box().l());
        const double s_niv = scaled / (scaled + 1.0) * iou_mean;
        const double s = s_niv * dets[i].confidence();
        const bool kept = s > cfg.score_thres;
        out.rows.push_back({i, n_neighbor, scaled, iou_mean, s_niv, s, kept});
        if (kept) out.kept.push_back(dets[i].with_confidence(s));
    }
    return out;
}

inline std::vector<Detection> nms_reference(std::span<const Detection> dets,
                                            const NmsConfig& cfg) {
    std::vector<Detection> kept;
    std::vector<bool> alive(dets.size(), true);
    for (;;) {
        if (cfg.max_keep && kept.size() >= *cfg.max_keep) break;
        // Highest score among the living; ties by lowest input index.
        std::size_t best = dets.size();
        for (std::size_t i = 0; i < dets.size(); ++i) {
            if (!alive[i]) continue;
            if (best == dets.size() ||
                dets[i].confidence() > dets[best].confidence()) {
                best = i;
            }
        }
        if (best == dets.size()) break;
        alive[best] = false;
        kept.push_back(dets[best]);
        for (std::size_t j = 0; j < dets.size(); ++j) {
            if (!alive[j]) continue;
            if (iou(dets[best].box(), dets[j].box(), cfg.iou_mode) >
                cfg.iou_thres) {
                alive[j] = false;
            }
        }
    }
    return kept;
}

} // namespace nivtk::testref
