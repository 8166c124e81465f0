#include "nivtk/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nivtk/errors.hpp"

namespace nivtk {

void FrameAnnotations::validate() const {
    const std::size_t n = gt_boxes.size();
    if (categories.size() != n || ignore_flags.size() != n ||
        (!kitti_raw.empty() && kitti_raw.size() != n)) {
        throw InvalidArgument("FrameAnnotations: parallel lists differ in length");
    }
}

MatchTable match_detections(const FrameAnnotations& gts,
                            std::span<const Detection> dets, double iou_thres,
                            IouMode mode) {
    gts.validate();
    MatchTable table;
    for (const std::uint8_t flag : gts.ignore_flags) {
        if (!flag) ++table.n_gt_counted;
    }

    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                         return dets[a].confidence() > dets[b].confidence();
                     });

    std::vector<bool> gt_taken(gts.size(), false);
    for (const std::size_t di : order) {
        DetMatch m;
        m.det_index = di;
        m.score = dets[di].confidence();

        // Localization quality against non-ignored ground truths.
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gts.ignore_flags[g]) continue;
            m.real_iou = std::max(m.real_iou,
                                  iou(dets[di].box(), gts.gt_boxes[g], mode));
        }

        // Greedy assignment among unmatched ground truths.
        std::size_t best = gts.size();
        double best_iou = 0.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gt_taken[g]) continue;
            const double v = iou(dets[di].box(), gts.gt_boxes[g], mode);
            if (v > best_iou) {
                best_iou = v;
                best = g;
            }
        }
        if (best < gts.size() && best_iou >= iou_thres) {
            gt_taken[best] = true;
            m.gt_index = best;
            m.outcome = gts.ignore_flags[best] ? MatchOutcome::kIgnored
                                               : MatchOutcome::kTruePositive;
        } else {
            m.outcome = MatchOutcome::kFalsePositive;
        }
        table.matches.push_back(m);
    }
    return table;
}

std::vector<PrPoint> pr_curve(std::span<const MatchTable> tables) {
    std::size_t total_gt = 0;
    for (const MatchTable& t : tables) total_gt += t.n_gt_counted;
    if (total_gt == 0) {
        throw DegenerateInput("pr_curve: no ground truths, recall undefined");
    }

    struct Record {
        double score;
        std::size_t frame;
        std::size_t det_index;
        bool tp;
    };
    std::vector<Record> records;
    for (std::size_t f = 0; f < tables.size(); ++f) {
        for (const DetMatch& m : tables[f].matches) {
            if (m.outcome == MatchOutcome::kIgnored) continue;
            records.push_back({m.score, f, m.det_index,
                               m.outcome == MatchOutcome::kTruePositive});
        }
    }
    std::sort(records.begin(), records.end(), [](const Record& a, const Record& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.frame != b.frame) return a.frame < b.frame;
        return a.det_index < b.det_index;
    });

    std::vector<PrPoint> curve;
    curve.reserve(records.size());
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (const Record& rec : records) {
        if (rec.tp) ++tp;
        else ++fp;
        curve.push_back({static_cast<double>(tp) / static_cast<double>(total_gt),
                         static_cast<double>(tp) / static_cast<double>(tp + fp),
                         rec.score});
    }
    return curve;
}

double average_precision(std::span<const PrPoint> curve, int n_points) {
    if (n_points != 11 && n_points != 40) {
        throw InvalidArgument("average_precision: n_points must be 11 or 40");
    }
    double sum = 0.0;
    for (int i = 0; i < n_points; ++i) {
        // R11 includes recall 0; R40 starts at 1/40.
        const double r = n_points == 11 ? static_cast<double>(i) / 10.0
                                        : static_cast<double>(i + 1) / 40.0;
        double p_max = 0.0;
        for (const PrPoint& pt : curve) {
            if (pt.recall >= r) p_max = std::max(p_max, pt.precision);
        }
        sum += p_max;
    }
    return sum / n_points * 100.0;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) {
        throw InvalidArgument("pearson: length mismatch");
    }
    if (xs.size() < 2) {
        throw DegenerateInput("pearson: need at least 2 samples");
    }
    const double n = static_cast<double>(xs.size());
    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mean_x += xs[i];
        mean_y += ys[i];
    }
    mean_x /= n;
    mean_y /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mean_x;
        const double dy = ys[i] - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) {
        throw DegenerateInput("pearson: constant input has no defined correlation");
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace nivtk
