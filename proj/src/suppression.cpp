#include "nivtk/suppression.hpp"

#include <algorithm>
#include <numeric>

#include "nivtk/errors.hpp"

namespace nivtk {

void NmsConfig::validate() const {
    if (!(iou_thres > 0.0 && iou_thres < 1.0)) {
        throw InvalidArgument("NmsConfig: iou_thres must be in (0, 1)");
    }
    if (max_keep && *max_keep < 1) {
        throw InvalidArgument("NmsConfig: max_keep must be >= 1");
    }
}

std::vector<std::size_t> nms_indices(std::span<const Detection> dets,
                                     const NmsConfig& cfg) {
    cfg.validate();
    std::vector<std::size_t> kept;
    if (dets.empty()) return kept;

    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                         return dets[a].confidence() > dets[b].confidence();
                     });

    // Bounding-circle skip; pairs it rejects have IoU exactly 0, which never
    // exceeds a threshold in (0, 1).
    constexpr double kPrefilterMargin = 1e-6;
    std::vector<double> radii(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
        radii[i] = dets[i].box().bev_circumradius();
    }

    std::vector<bool> suppressed(dets.size(), false);
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        const std::size_t i = order[oi];
        if (suppressed[i]) continue;
        kept.push_back(i);
        if (cfg.max_keep && kept.size() >= *cfg.max_keep) break;
        for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
            const std::size_t j = order[oj];
            if (suppressed[j]) continue;
            const double dx = dets[i].box().x() - dets[j].box().x();
            const double dy = dets[i].box().y() - dets[j].box().y();
            const double reach = radii[i] + radii[j] + kPrefilterMargin;
            if (dx * dx + dy * dy > reach * reach) continue;
            if (iou(dets[i].box(), dets[j].box(), cfg.iou_mode) > cfg.iou_thres) {
                suppressed[j] = true;
            }
        }
    }
    return kept;
}

std::vector<Detection> nms(std::span<const Detection> dets, const NmsConfig& cfg) {
    std::vector<Detection> kept;
    for (const std::size_t i : nms_indices(dets, cfg)) {
        kept.push_back(dets[i]);
    }
    return kept;
}

} // namespace nivtk
