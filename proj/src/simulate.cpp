#include "nivtk/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "nivtk/errors.hpp"
#include "nivtk/evalkit.hpp"
#include "nivtk/rng.hpp"

namespace nivtk {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Placement field and car-like extent ranges.
constexpr double kFieldX0 = 5.0, kFieldX1 = 65.0;
constexpr double kFieldY0 = -28.0, kFieldY1 = 28.0;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::string frame_name(std::size_t f) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06zu", f);
    return buf;
}

Box3D random_car_box(Rng& rng) {
    const double w = rng.uniform(1.55, 1.85);
    const double l = rng.uniform(3.6, 4.6);
    const double h = rng.uniform(1.40, 1.75);
    return Box3D(rng.uniform(kFieldX0, kFieldX1), rng.uniform(kFieldY0, kFieldY1),
                 0.5 * h, w, l, h, rng.uniform(-kPi, kPi));
}

} // namespace

void SimConfig::validate() const {
    if (n_frames == 0) {
        throw InvalidArgument("SimConfig: n_frames must be >= 1");
    }
    if (gts_per_frame[0] > gts_per_frame[1] || preds_per_gt[0] > preds_per_gt[1]) {
        throw InvalidArgument("SimConfig: count ranges must be ordered");
    }
    if (preds_per_gt[0] < 1) {
        throw InvalidArgument("SimConfig: preds_per_gt must be >= 1");
    }
    if (center_noise_sigma < 0 || extent_noise_sigma < 0 || yaw_noise_sigma < 0 ||
        conf_noise_sigma < 0 || piou_noise_sigma < 0 || fp_rate < 0) {
        throw InvalidArgument("SimConfig: sigmas and rates must be >= 0");
    }
}

std::vector<DetectionFrame> generate_ensemble(const SimConfig& cfg) {
    cfg.validate();
    std::vector<DetectionFrame> frames;
    frames.reserve(cfg.n_frames);

    for (std::size_t f = 0; f < cfg.n_frames; ++f) {
        Rng rng(derive_seed(cfg.seed, "frame", f));
        DetectionFrame frame;
        frame.frame_id = frame_name(f);

        FrameAnnotations ann;
        const std::size_t n_gt = static_cast<std::size_t>(rng.uniform_int(
            static_cast<std::int64_t>(cfg.gts_per_frame[0]),
            static_cast<std::int64_t>(cfg.gts_per_frame[1])));
        // Rejection placement: BEV circles separated by a clear margin, so
        // ground truths never overlap.
        for (std::size_t g = 0; g < n_gt; ++g) {
            bool placed = false;
            for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
                const Box3D cand = random_car_box(rng);
                placed = true;
                for (const Box3D& other : ann.gt_boxes) {
                    const double dx = cand.x() - other.x();
                    const double dy = cand.y() - other.y();
                    const double reach =
                        cand.bev_circumradius() + other.bev_circumradius() + 0.5;
                    if (dx * dx + dy * dy <= reach * reach) {
                        placed = false;
                        break;
                    }
                }
                if (placed) {
                    ann.gt_boxes.push_back(cand);
                    ann.categories.emplace_back("Car");
                    ann.ignore_flags.push_back(0);
                }
            }
        }

        for (const Box3D& gt : ann.gt_boxes) {
            // Difficulty q in [0, 1): harder objects get fewer predictions
            // and larger noise.
            const double q = rng.uniform();
            const double noise_mult = 0.4 + 1.6 * q;
            const auto lo = static_cast<double>(cfg.preds_per_gt[0]);
            const auto hi = static_cast<double>(cfg.preds_per_gt[1]);
            const auto count = static_cast<std::size_t>(
                std::llround(lo + (hi - lo) * (1.0 - q)));
            for (std::size_t p = 0; p < count; ++p) {
                const double sx = cfg.center_noise_sigma * noise_mult;
                const double x = gt.x() + rng.gaussian() * sx;
                const double y = gt.y() + rng.gaussian() * sx;
                const double z = gt.z() + rng.gaussian() * sx * 0.3;
                const auto jitter = [&](double extent) {
                    const double rel = std::clamp(
                        rng.gaussian() * cfg.extent_noise_sigma * noise_mult,
                        -0.4, 0.4);
                    return extent * (1.0 + rel);
                };
                const double yaw =
                    gt.r() + rng.gaussian() * cfg.yaw_noise_sigma * noise_mult;
                const Box3D box(x, y, z, jitter(gt.w()), jitter(gt.l()),
                                jitter(gt.h()), yaw);
                const double real = iou_3d(box, gt);
                const double conf =
                    clamp01(real + rng.gaussian() * cfg.conf_noise_sigma);
                const double piou =
                    clamp01(real + rng.gaussian() * cfg.piou_noise_sigma);
                frame.detections.emplace_back(box, conf, "Car", piou);
            }
        }

        const int n_fp = rng.poisson(cfg.fp_rate);
        for (int p = 0; p < n_fp; ++p) {
            const Box3D box = random_car_box(rng);
            double real = 0.0;
            for (const Box3D& gt : ann.gt_boxes) {
                real = std::max(real, iou_3d(box, gt));
            }
            const double conf = rng.uniform(0.05, 0.5);
            const double piou =
                clamp01(real + rng.gaussian() * cfg.piou_noise_sigma);
            frame.detections.emplace_back(box, conf, "Car", piou);
        }

        frame.det_stats.assign(frame.detections.size(), std::nullopt);
        frame.annotations = std::move(ann);
        frames.push_back(std::move(frame));
    }
    return frames;
}

CalibrationReport run_calibration_experiment(const SimConfig& cfg,
                                             const NivConfig& niv_cfg,
                                             const CalibrationOptions& opts) {
    niv_cfg.validate();
    NmsConfig nms_cfg{};
    nms_cfg.iou_thres = opts.nms_iou_thres;
    nms_cfg.iou_mode = niv_cfg.iou_mode;

    const std::vector<DetectionFrame> frames = generate_ensemble(cfg);

    CalibrationReport report;
    std::vector<double> tp_real, tp_raw, tp_niv, tp_fused;
    std::vector<MatchTable> tables_raw_nms;
    std::vector<MatchTable> tables_niv_nms;

    for (const DetectionFrame& frame : frames) {
        const FrameAnnotations& ann = *frame.annotations;
        const std::vector<Detection>& dets = frame.detections;

        // True positives follow the raw score ordering, so every score
        // variant is compared on the same detection set.
        const MatchTable raw_match =
            match_detections(ann, dets, opts.eval_iou_thres, niv_cfg.iou_mode);

        // Voting scores for every detection, threshold-independent.
        const NivResult niv_all = niv_rectify(dets, niv_cfg);
        std::vector<double> s_by_index(dets.size(), 0.0);
        std::vector<double> sniv_by_index(dets.size(), 0.0);
        for (const NivStats& st : niv_all.stats) {
            s_by_index[st.input_index] = st.s;
            sniv_by_index[st.input_index] = st.s_niv;
        }

        // Fused variant: predicted IoU folded into the confidence first.
        std::vector<Detection> fused_dets;
        fused_dets.reserve(dets.size());
        for (const Detection& d : dets) {
            const double c =
                d.predicted_iou()
                    ? fuse_confidence(d.confidence(), *d.predicted_iou(),
                                      opts.fuse_beta)
                    : d.confidence();
            fused_dets.push_back(d.with_confidence(c));
        }
        const NivResult niv_fused = niv_rectify(fused_dets, niv_cfg);
        std::vector<double> fused_by_index(dets.size(), 0.0);
        for (const NivStats& st : niv_fused.stats) {
            fused_by_index[st.input_index] = st.s;
        }

        for (const DetMatch& m : raw_match.matches) {
            if (m.outcome != MatchOutcome::kTruePositive) continue;
            tp_real.push_back(m.real_iou);
            tp_raw.push_back(dets[m.det_index].confidence());
            tp_niv.push_back(s_by_index[m.det_index]);
            tp_fused.push_back(fused_by_index[m.det_index]);
            report.scatter.push_back({frame.frame_id, m.det_index, m.real_iou,
                                      dets[m.det_index].confidence(),
                                      sniv_by_index[m.det_index],
                                      s_by_index[m.det_index]});
        }

        // AP of plain NMS versus voting followed by NMS.
        const std::vector<Detection> kept_raw = nms(dets, nms_cfg);
        tables_raw_nms.push_back(
            match_detections(ann, kept_raw, opts.eval_iou_thres, niv_cfg.iou_mode));
        const std::vector<Detection> kept_niv = nms(niv_all.kept, nms_cfg);
        tables_niv_nms.push_back(
            match_detections(ann, kept_niv, opts.eval_iou_thres, niv_cfg.iou_mode));
    }

    report.n_tp = tp_real.size();
    const auto correlate = [&](const std::vector<double>& ys) {
        std::optional<double> out;
        try {
            out = pearson(tp_real, ys);
        } catch (const DegenerateInput&) {
            report.degenerate = true;
        }
        return out;
    };
    report.pcc_raw = correlate(tp_raw);
    report.pcc_niv = correlate(tp_niv);
    report.pcc_niv_fused = correlate(tp_fused);

    report.ap_raw = average_precision(pr_curve(tables_raw_nms), opts.ap_points);
    report.ap_niv = average_precision(pr_curve(tables_niv_nms), opts.ap_points);
    return report;
}

} // namespace nivtk
