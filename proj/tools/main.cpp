// Command-line front end wiring the toolkit into reproducible pipelines:
// confidence rectification, rotated NMS, KITTI-style evaluation, point-cloud
// augmentation, ensemble simulation, and a latency benchmark. Every
// subcommand is deterministic given (inputs, flags, seed) and byte-identical
// for any --threads value; each run serializes its fully resolved
// configuration next to its outputs.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nivtk/augment.hpp"
#include "nivtk/datio.hpp"
#include "nivtk/errors.hpp"
#include "nivtk/evalkit.hpp"
#include "nivtk/niv.hpp"
#include "nivtk/rng.hpp"
#include "nivtk/simulate.hpp"
#include "nivtk/suppression.hpp"
#include "parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace nivtk;

namespace {

struct GlobalOpts {
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

IouMode parse_iou_mode(const std::string& s) {
    if (s == "3d") return IouMode::k3D;
    if (s == "bev") return IouMode::kBev;
    throw InvalidArgument("iou mode must be '3d' or 'bev'");
}

void write_runconfig(const fs::path& path, const ordered_json& resolved) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw FormatError(path.string() + ": cannot open file for writing");
    }
    out << resolved.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Category grouping shared by rectify / nms / eval.
// ---------------------------------------------------------------------------

struct CategoryGroup {
    std::string category;
    std::vector<std::size_t> indices; // frame-level detection indices
};

std::vector<CategoryGroup> group_by_category(std::span<const Detection> dets) {
    std::vector<CategoryGroup> groups;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        const std::string& cat = dets[i].category();
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const CategoryGroup& g) {
                                   return g.category == cat;
                               });
        if (it == groups.end()) {
            groups.push_back({cat, {}});
            it = groups.end() - 1;
        }
        it->indices.push_back(i);
    }
    return groups;
}

// ---------------------------------------------------------------------------
// rectify
// ---------------------------------------------------------------------------

struct RectifyOpts {
    std::string input;
    std::string output;
    std::string stats_csv;
    double area_bev = 6.24;
    double iou_thres = 0.2;
    double score_thres = 0.1;
    std::string iou_mode = "3d";
    bool exclude_self = false;
    double fuse_beta = 0.0;
    double nms_thres = 0.0; // 0 disables the NMS stage
    std::size_t nms_max_keep = 0;
};

int cmd_rectify(const RectifyOpts& opt, const GlobalOpts& g) {
    NivConfig cfg;
    cfg.area_bev = opt.area_bev;
    cfg.iou_thres = opt.iou_thres;
    cfg.score_thres = opt.score_thres;
    cfg.iou_mode = parse_iou_mode(opt.iou_mode);
    cfg.include_self = !opt.exclude_self;
    cfg.validate();
    if (cfg.score_thres >= 1.0) {
        std::cerr << "warning: score threshold " << cfg.score_thres
                  << " drops every detection\n";
    }

    const std::vector<DetectionFrame> frames = read_detections_json(opt.input);

    struct FrameOut {
        DetectionFrame frame;
        std::vector<NivStats> all_stats; // frame-level indices
    };
    std::vector<FrameOut> outputs(frames.size());

    cli::run_indexed(frames.size(), g.threads, [&](std::size_t fi) {
        const DetectionFrame& in = frames[fi];
        FrameOut out;
        out.frame.frame_id = in.frame_id;
        for (const CategoryGroup& group : group_by_category(in.detections)) {
            std::vector<Detection> dets;
            dets.reserve(group.indices.size());
            for (const std::size_t i : group.indices) {
                const Detection& d = in.detections[i];
                const double c =
                    (opt.fuse_beta > 0.0 && d.predicted_iou())
                        ? fuse_confidence(d.confidence(), *d.predicted_iou(),
                                          opt.fuse_beta)
                        : d.confidence();
                dets.push_back(d.with_confidence(c));
            }
            NivResult res = niv_rectify(dets, cfg);
            for (NivStats st : res.stats) {
                st.input_index = group.indices[st.input_index];
                out.all_stats.push_back(st);
            }
            std::vector<Detection> kept = std::move(res.kept);
            std::vector<std::optional<NivStats>> kept_stats;
            for (const NivStats& st : res.stats) {
                if (!st.kept) continue;
                NivStats frame_st = st;
                frame_st.input_index = group.indices[st.input_index];
                kept_stats.emplace_back(frame_st);
            }
            if (opt.nms_thres > 0.0 && !kept.empty()) {
                NmsConfig nms_cfg{};
                nms_cfg.iou_thres = opt.nms_thres;
                nms_cfg.iou_mode = cfg.iou_mode;
                if (opt.nms_max_keep > 0) nms_cfg.max_keep = opt.nms_max_keep;
                const std::vector<std::size_t> survivors =
                    nms_indices(kept, nms_cfg);
                std::vector<Detection> pruned;
                std::vector<std::optional<NivStats>> pruned_stats;
                for (const std::size_t k : survivors) {
                    pruned.push_back(kept[k]);
                    pruned_stats.push_back(kept_stats[k]);
                }
                kept = std::move(pruned);
                kept_stats = std::move(pruned_stats);
            }
            for (std::size_t k = 0; k < kept.size(); ++k) {
                out.frame.detections.push_back(kept[k]);
                out.frame.det_stats.push_back(kept_stats[k]);
            }
        }
        out.frame.annotations = in.annotations;
        outputs[fi] = std::move(out);
    });

    std::vector<DetectionFrame> out_frames;
    std::vector<std::string> frame_ids;
    std::vector<std::vector<NivStats>> stats_by_frame;
    std::size_t total_in = 0;
    std::size_t total_kept = 0;
    for (auto& o : outputs) {
        frame_ids.push_back(o.frame.frame_id);
        stats_by_frame.push_back(std::move(o.all_stats));
        total_kept += o.frame.detections.size();
        out_frames.push_back(std::move(o.frame));
    }
    for (const auto& f : frames) total_in += f.detections.size();

    write_detections_json(opt.output, out_frames);
    if (!opt.stats_csv.empty()) {
        write_stats_csv(opt.stats_csv, frame_ids, stats_by_frame);
    }

    ordered_json resolved{{"subcommand", "rectify"},
                          {"input", opt.input},
                          {"output", opt.output},
                          {"stats_csv", opt.stats_csv},
                          {"area_bev", opt.area_bev},
                          {"iou_thres", opt.iou_thres},
                          {"score_thres", opt.score_thres},
                          {"iou_mode", opt.iou_mode},
                          {"include_self", !opt.exclude_self},
                          {"fuse_beta", opt.fuse_beta},
                          {"nms_thres", opt.nms_thres},
                          {"nms_max_keep", opt.nms_max_keep},
                          {"seed", g.seed},
                          {"threads", g.threads}};
    write_runconfig(opt.output + ".runconfig.json", resolved);

    std::cout << "rectify: " << frames.size() << " frames, " << total_in
              << " detections in, " << total_kept << " kept\n";
    return 0;
}

// ---------------------------------------------------------------------------
// nms
// ---------------------------------------------------------------------------

struct NmsOpts {
    std::string input;
    std::string output;
    double iou_thres = 0.0; // required flag
    std::string iou_mode = "3d";
    std::size_t max_keep = 0;
};

int cmd_nms(const NmsOpts& opt, const GlobalOpts& g) {
    NmsConfig cfg{};
    cfg.iou_thres = opt.iou_thres;
    cfg.iou_mode = parse_iou_mode(opt.iou_mode);
    if (opt.max_keep > 0) cfg.max_keep = opt.max_keep;
    cfg.validate();

    const std::vector<DetectionFrame> frames = read_detections_json(opt.input);
    std::vector<DetectionFrame> outputs(frames.size());

    cli::run_indexed(frames.size(), g.threads, [&](std::size_t fi) {
        const DetectionFrame& in = frames[fi];
        DetectionFrame out;
        out.frame_id = in.frame_id;
        for (const CategoryGroup& group : group_by_category(in.detections)) {
            std::vector<Detection> dets;
            for (const std::size_t i : group.indices) {
                dets.push_back(in.detections[i]);
            }
            for (const std::size_t k : nms_indices(dets, cfg)) {
                const std::size_t frame_index = group.indices[k];
                out.detections.push_back(in.detections[frame_index]);
                out.det_stats.push_back(frame_index < in.det_stats.size()
                                            ? in.det_stats[frame_index]
                                            : std::nullopt);
            }
        }
        out.annotations = in.annotations;
        outputs[fi] = std::move(out);
    });

    write_detections_json(opt.output, outputs);
    ordered_json resolved{{"subcommand", "nms"},
                          {"input", opt.input},
                          {"output", opt.output},
                          {"iou_thres", opt.iou_thres},
                          {"iou_mode", opt.iou_mode},
                          {"max_keep", opt.max_keep},
                          {"seed", g.seed},
                          {"threads", g.threads}};
    write_runconfig(opt.output + ".runconfig.json", resolved);

    std::size_t kept = 0;
    for (const auto& f : outputs) kept += f.detections.size();
    std::cout << "nms: " << frames.size() << " frames, " << kept
              << " detections kept\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOpts {
    std::string gt_dir;
    std::string det_dir;
    std::string input;
    std::string out_dir;
    double iou_thres = 0.5;
    std::string iou_mode = "3d";
};

struct EvalFrame {
    std::string frame_id;
    FrameAnnotations annotations;
    std::vector<Detection> detections;
    std::vector<std::optional<NivStats>> det_stats;
};

std::vector<EvalFrame> load_eval_frames(const EvalOpts& opt) {
    std::vector<EvalFrame> frames;
    if (!opt.input.empty()) {
        std::vector<std::string> missing;
        for (DetectionFrame& f : read_detections_json(opt.input)) {
            if (!f.annotations) {
                missing.push_back(f.frame_id);
                continue;
            }
            frames.push_back({f.frame_id, std::move(*f.annotations),
                              std::move(f.detections), std::move(f.det_stats)});
        }
        if (!missing.empty()) {
            std::string msg = "frames without annotations:";
            for (const auto& id : missing) msg += " " + id;
            throw InvalidArgument(msg);
        }
        return frames;
    }

    std::map<std::string, fs::path> gt_files;
    for (const auto& entry : fs::directory_iterator(opt.gt_dir)) {
        if (entry.path().extension() == ".txt") {
            gt_files.emplace(entry.path().stem().string(), entry.path());
        }
    }
    std::map<std::string, fs::path> det_files;
    for (const auto& entry : fs::directory_iterator(opt.det_dir)) {
        const auto ext = entry.path().extension();
        if (ext == ".txt" || ext == ".json") {
            det_files.emplace(entry.path().stem().string(), entry.path());
        }
    }
    std::vector<std::string> mismatched;
    for (const auto& [id, path] : gt_files) {
        if (!det_files.count(id)) mismatched.push_back(id + " (no detections)");
    }
    for (const auto& [id, path] : det_files) {
        if (!gt_files.count(id)) mismatched.push_back(id + " (no ground truth)");
    }
    if (!mismatched.empty()) {
        std::string msg = "frame id mismatch between directories:";
        for (const auto& m : mismatched) msg += "\n  " + m;
        throw InvalidArgument(msg);
    }

    for (const auto& [id, gt_path] : gt_files) {
        EvalFrame frame;
        frame.frame_id = id;
        frame.annotations = read_kitti_labels(gt_path);
        const fs::path det_path = det_files.at(id);
        if (det_path.extension() == ".txt") {
            frame.detections = read_kitti_results(det_path);
            frame.det_stats.assign(frame.detections.size(), std::nullopt);
        } else {
            bool found = false;
            for (const DetectionFrame& df : read_detections_json(det_path)) {
                if (df.frame_id != id) continue;
                frame.detections = df.detections;
                frame.det_stats = df.det_stats;
                found = true;
            }
            if (!found) {
                throw FormatError(det_path.string() + ": no frame with id '" +
                                  id + "'");
            }
        }
        frames.push_back(std::move(frame));
    }
    return frames;
}

int cmd_eval(const EvalOpts& opt, const GlobalOpts& g) {
    const IouMode mode = parse_iou_mode(opt.iou_mode);
    const std::vector<EvalFrame> frames = load_eval_frames(opt);

    // Categories present among non-ignored ground truths, in encounter order.
    std::vector<std::string> categories;
    for (const EvalFrame& f : frames) {
        for (std::size_t i = 0; i < f.annotations.size(); ++i) {
            if (f.annotations.ignore_flags[i]) continue;
            const std::string& c = f.annotations.categories[i];
            if (std::find(categories.begin(), categories.end(), c) ==
                categories.end()) {
                categories.push_back(c);
            }
        }
    }

    EvalReport report;
    std::vector<ScatterRow> scatter;

    for (const std::string& category : categories) {
        CategoryEval cat;
        cat.category = category;
        cat.n_frames = frames.size();
        std::vector<double> tp_real, tp_conf, tp_rect;

        for (const EvalFrame& f : frames) {
            // Category ground truths plus every ignore region.
            FrameAnnotations subset;
            for (std::size_t i = 0; i < f.annotations.size(); ++i) {
                if (f.annotations.categories[i] != category &&
                    !f.annotations.ignore_flags[i]) {
                    continue;
                }
                subset.gt_boxes.push_back(f.annotations.gt_boxes[i]);
                subset.categories.push_back(f.annotations.categories[i]);
                subset.ignore_flags.push_back(f.annotations.ignore_flags[i]);
            }
            std::vector<Detection> dets;
            std::vector<std::optional<NivStats>> stats;
            std::vector<std::size_t> det_indices;
            for (std::size_t i = 0; i < f.detections.size(); ++i) {
                if (f.detections[i].category() != category) continue;
                dets.push_back(f.detections[i]);
                stats.push_back(i < f.det_stats.size() ? f.det_stats[i]
                                                       : std::nullopt);
                det_indices.push_back(i);
            }
            MatchTable table = match_detections(subset, dets, opt.iou_thres, mode);
            cat.n_gt += table.n_gt_counted;
            cat.n_det += dets.size();
            for (const DetMatch& m : table.matches) {
                const std::optional<NivStats>& st = stats[m.det_index];
                scatter.push_back(
                    {f.frame_id, det_indices[m.det_index], m.real_iou,
                     st ? st->confidence_in : dets[m.det_index].confidence(),
                     st ? std::optional<double>(st->s_niv) : std::nullopt,
                     st ? std::optional<double>(st->s) : std::nullopt});
                switch (m.outcome) {
                case MatchOutcome::kTruePositive:
                    ++cat.tp;
                    tp_real.push_back(m.real_iou);
                    tp_conf.push_back(st ? st->confidence_in
                                         : dets[m.det_index].confidence());
                    if (st) tp_rect.push_back(st->s);
                    break;
                case MatchOutcome::kFalsePositive: ++cat.fp; break;
                case MatchOutcome::kIgnored: ++cat.ignored; break;
                }
            }
            cat.tables.push_back(std::move(table));
        }

        cat.curve = pr_curve(cat.tables);
        cat.ap_r40 = average_precision(cat.curve, 40);
        cat.ap_r11 = average_precision(cat.curve, 11);

        const auto correlate = [&](const std::vector<double>& ys) {
            std::optional<double> out;
            if (ys.size() != tp_real.size() || ys.empty()) return out;
            try {
                out = pearson(tp_real, ys);
            } catch (const DegenerateInput&) {
            }
            return out;
        };
        cat.pcc_confidence = correlate(tp_conf);
        cat.pcc_rectified = correlate(tp_rect);
        report.categories.push_back(std::move(cat));
    }

    std::cout << format_eval_report(report);
    if (!opt.out_dir.empty()) {
        fs::create_directories(opt.out_dir);
        const fs::path dir(opt.out_dir);
        write_eval_report(dir / "report.txt", report);
        write_scatter_csv(dir / "scatter.csv", scatter);
        ordered_json resolved{{"subcommand", "eval"},
                              {"gt_dir", opt.gt_dir},
                              {"det_dir", opt.det_dir},
                              {"input", opt.input},
                              {"out_dir", opt.out_dir},
                              {"iou_thres", opt.iou_thres},
                              {"iou_mode", opt.iou_mode},
                              {"seed", g.seed},
                              {"threads", g.threads}};
        write_runconfig(dir / "runconfig.json", resolved);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// augment
// ---------------------------------------------------------------------------

struct AugmentOpts {
    std::string cloud_dir;
    std::string label_dir;
    std::string out_dir;
    std::vector<double> range_bounds{20.0, 35.0};
    std::vector<double> rate_near{0.4, 0.6};
    std::vector<double> rate_mid{0.6, 0.8};
    std::vector<double> rate_far{0.8, 1.0};
    std::vector<double> surface_drop_probs{0.25, 0.5, 0.25};
    std::size_t easy_min_points = 50;
    double occlusion_prob = 1.0;
    bool global = false;
    double flip_prob = 0.5;
    std::vector<double> rot_x{-0.035, 0.035};
    std::vector<double> rot_y{-0.025, 0.025};
    std::vector<double> rot_z{-0.785, 0.785};
    std::vector<double> scale{0.95, 1.05};
};

int cmd_augment(const AugmentOpts& opt, const GlobalOpts& g) {
    std::map<std::string, fs::path> clouds;
    for (const auto& entry : fs::directory_iterator(opt.cloud_dir)) {
        if (entry.path().extension() == ".bin") {
            clouds.emplace(entry.path().stem().string(), entry.path());
        }
    }
    std::map<std::string, fs::path> labels;
    for (const auto& entry : fs::directory_iterator(opt.label_dir)) {
        if (entry.path().extension() == ".txt") {
            labels.emplace(entry.path().stem().string(), entry.path());
        }
    }
    std::vector<std::string> unpaired;
    for (const auto& [id, p] : clouds) {
        if (!labels.count(id)) unpaired.push_back(id + " (no labels)");
    }
    for (const auto& [id, p] : labels) {
        if (!clouds.count(id)) unpaired.push_back(id + " (no cloud)");
    }
    if (!unpaired.empty()) {
        std::string msg = "unpaired files between directories:";
        for (const auto& u : unpaired) msg += "\n  " + u;
        throw InvalidArgument(msg);
    }

    fs::create_directories(opt.out_dir);
    const fs::path out_dir(opt.out_dir);

    ResampleConfig base;
    base.range_bounds = {opt.range_bounds[0], opt.range_bounds[1]};
    base.rate_intervals = {{{opt.rate_near[0], opt.rate_near[1]},
                            {opt.rate_mid[0], opt.rate_mid[1]},
                            {opt.rate_far[0], opt.rate_far[1]}}};
    base.surface_drop_probs = {opt.surface_drop_probs[0],
                               opt.surface_drop_probs[1],
                               opt.surface_drop_probs[2]};
    base.easy_min_points = opt.easy_min_points;
    base.occlusion_prob = opt.occlusion_prob;
    base.validate();

    std::vector<std::string> ids;
    for (const auto& [id, p] : clouds) ids.push_back(id);

    std::vector<ordered_json> manifest_frames(ids.size());
    cli::run_indexed(ids.size(), g.threads, [&](std::size_t i) {
        const std::string& id = ids[i];
        const PointCloud cloud = read_point_cloud(clouds.at(id));
        FrameAnnotations ann = read_kitti_labels(labels.at(id));

        std::vector<Box3D> gt_boxes;
        for (std::size_t k = 0; k < ann.size(); ++k) {
            if (!ann.ignore_flags[k]) gt_boxes.push_back(ann.gt_boxes[k]);
        }

        ResampleConfig cfg = base;
        cfg.seed = derive_seed(g.seed, id);
        OcclusionTrace occl;
        SparsifyTrace spars;
        PointCloud out_cloud = object_resample(cloud, gt_boxes, cfg, &occl, &spars);

        ordered_json jframe{{"frame_id", id}, {"seed", cfg.seed}};
        jframe["sparsify"] = {{"rates", spars.rates},
                              {"band_total", spars.band_total},
                              {"band_kept", spars.band_kept}};
        ordered_json jobjects = ordered_json::array();
        for (const auto& rec : occl.objects) {
            jobjects.push_back({{"object_index", rec.object_index},
                                {"easy", rec.easy},
                                {"selected", rec.selected},
                                {"k", rec.k},
                                {"pyramids", rec.pyramids},
                                {"removed", rec.removed}});
        }
        jframe["occlusion"] = std::move(jobjects);

        if (opt.global) {
            GlobalAugConfig gcfg;
            gcfg.flip_prob = opt.flip_prob;
            gcfg.rot_x = {opt.rot_x[0], opt.rot_x[1]};
            gcfg.rot_y = {opt.rot_y[0], opt.rot_y[1]};
            gcfg.rot_z = {opt.rot_z[0], opt.rot_z[1]};
            gcfg.scale_interval = {opt.scale[0], opt.scale[1]};
            gcfg.seed = cfg.seed;
            GlobalAugResult res = global_transform(out_cloud, gt_boxes, gcfg);
            out_cloud = std::move(res.cloud);
            // Rewrite the non-ignored boxes with their transformed versions.
            std::size_t cursor = 0;
            for (std::size_t k = 0; k < ann.size(); ++k) {
                if (!ann.ignore_flags[k]) {
                    ann.gt_boxes[k] = res.boxes[cursor++];
                }
            }
            jframe["global"] = {{"flipped", res.trace.flipped},
                                {"angle_x", res.trace.angle_x},
                                {"angle_y", res.trace.angle_y},
                                {"angle_z", res.trace.angle_z},
                                {"scale", res.trace.scale}};
        }

        write_point_cloud(out_dir / (id + ".bin"), out_cloud);
        write_kitti_labels(out_dir / (id + ".txt"), ann);
        manifest_frames[i] = std::move(jframe);
    });

    ordered_json manifest{{"schema", "nivtk-augment-manifest-v1"},
                          {"master_seed", g.seed}};
    manifest["frames"] = manifest_frames;
    write_runconfig(out_dir / "manifest.json", manifest);

    ordered_json resolved{{"subcommand", "augment"},
                          {"cloud_dir", opt.cloud_dir},
                          {"label_dir", opt.label_dir},
                          {"out_dir", opt.out_dir},
                          {"range_bounds", opt.range_bounds},
                          {"rate_near", opt.rate_near},
                          {"rate_mid", opt.rate_mid},
                          {"rate_far", opt.rate_far},
                          {"surface_drop_probs", opt.surface_drop_probs},
                          {"easy_min_points", opt.easy_min_points},
                          {"occlusion_prob", opt.occlusion_prob},
                          {"global", opt.global},
                          {"flip_prob", opt.flip_prob},
                          {"rot_x", opt.rot_x},
                          {"rot_y", opt.rot_y},
                          {"rot_z", opt.rot_z},
                          {"scale", opt.scale},
                          {"seed", g.seed},
                          {"threads", g.threads}};
    write_runconfig(out_dir / "runconfig.json", resolved);

    std::cout << "augment: " << ids.size() << " frames written to "
              << opt.out_dir << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOpts {
    std::string out_dir;
    std::size_t frames = 40;
    std::vector<std::size_t> gts_per_frame{4, 8};
    std::vector<std::size_t> preds_per_gt{2, 8};
    double center_noise = 0.35;
    double extent_noise = 0.08;
    double yaw_noise = 0.12;
    double conf_noise = 0.30;
    double piou_noise = 0.12;
    double fp_rate = 2.5;
    double area_bev = 6.24;
    double iou_thres = 0.2;
    double score_thres = 0.1;
    std::string iou_mode = "3d";
    double eval_iou_thres = 0.5;
    double nms_thres = 0.2;
    double fuse_beta = 1.0;
};

std::string format_calibration_report(const CalibrationReport& r,
                                      std::uint64_t seed) {
    char buf[512];
    const auto val = [](const std::optional<double>& v) {
        char tmp[32];
        if (!v) return std::string("degenerate");
        std::snprintf(tmp, sizeof tmp, "%.4f", *v);
        return std::string(tmp);
    };
    std::snprintf(buf, sizeof buf,
                  "calibration report (seed %llu)\n"
                  "  true positives  %zu\n"
                  "  pcc_raw         %s\n"
                  "  pcc_niv         %s\n"
                  "  pcc_niv_fused   %s\n"
                  "  ap_raw          %.4f\n"
                  "  ap_niv          %.4f\n",
                  static_cast<unsigned long long>(seed), r.n_tp,
                  val(r.pcc_raw).c_str(), val(r.pcc_niv).c_str(),
                  val(r.pcc_niv_fused).c_str(), r.ap_raw, r.ap_niv);
    return buf;
}

int cmd_simulate(const SimulateOpts& opt, const GlobalOpts& g) {
    SimConfig cfg;
    cfg.n_frames = opt.frames;
    cfg.gts_per_frame = {opt.gts_per_frame[0], opt.gts_per_frame[1]};
    cfg.preds_per_gt = {opt.preds_per_gt[0], opt.preds_per_gt[1]};
    cfg.center_noise_sigma = opt.center_noise;
    cfg.extent_noise_sigma = opt.extent_noise;
    cfg.yaw_noise_sigma = opt.yaw_noise;
    cfg.conf_noise_sigma = opt.conf_noise;
    cfg.piou_noise_sigma = opt.piou_noise;
    cfg.fp_rate = opt.fp_rate;
    cfg.seed = g.seed;
    cfg.validate();

    NivConfig niv_cfg;
    niv_cfg.area_bev = opt.area_bev;
    niv_cfg.iou_thres = opt.iou_thres;
    niv_cfg.score_thres = opt.score_thres;
    niv_cfg.iou_mode = parse_iou_mode(opt.iou_mode);
    niv_cfg.validate();

    CalibrationOptions copts;
    copts.eval_iou_thres = opt.eval_iou_thres;
    copts.nms_iou_thres = opt.nms_thres;
    copts.fuse_beta = opt.fuse_beta;

    const CalibrationReport report =
        run_calibration_experiment(cfg, niv_cfg, copts);
    const std::string text = format_calibration_report(report, g.seed);
    std::cout << text;
    if (report.degenerate) {
        std::cerr << "warning: constant scores made at least one correlation "
                     "degenerate\n";
    }

    fs::create_directories(opt.out_dir);
    const fs::path dir(opt.out_dir);
    write_detections_json(dir / "ensemble.json", generate_ensemble(cfg));
    std::ofstream rep(dir / "report.txt", std::ios::trunc);
    rep << text;
    write_scatter_csv(dir / "scatter.csv", report.scatter);

    ordered_json resolved{{"subcommand", "simulate"},
                          {"out_dir", opt.out_dir},
                          {"frames", opt.frames},
                          {"gts_per_frame", opt.gts_per_frame},
                          {"preds_per_gt", opt.preds_per_gt},
                          {"center_noise", opt.center_noise},
                          {"extent_noise", opt.extent_noise},
                          {"yaw_noise", opt.yaw_noise},
                          {"conf_noise", opt.conf_noise},
                          {"piou_noise", opt.piou_noise},
                          {"fp_rate", opt.fp_rate},
                          {"area_bev", opt.area_bev},
                          {"iou_thres", opt.iou_thres},
                          {"score_thres", opt.score_thres},
                          {"iou_mode", opt.iou_mode},
                          {"eval_iou_thres", opt.eval_iou_thres},
                          {"nms_thres", opt.nms_thres},
                          {"fuse_beta", opt.fuse_beta},
                          {"seed", g.seed},
                          {"threads", g.threads}};
    write_runconfig(dir / "runconfig.json", resolved);
    return 0;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchOpts {
    std::size_t runs = 31;
    double nms_thres = 0.2;
};

std::vector<Detection> bench_set(std::size_t n, std::uint64_t seed) {
    // Clustered car-like boxes: ceil(n / 5) anchors with 5 perturbed boxes
    // each, matching the density the voting pass sees in practice.
    Rng rng(seed);
    std::vector<Detection> dets;
    dets.reserve(n);
    while (dets.size() < n) {
        const double cx = rng.uniform(0.0, 100.0);
        const double cy = rng.uniform(-40.0, 40.0);
        for (int k = 0; k < 5 && dets.size() < n; ++k) {
            dets.emplace_back(Box3D(cx + rng.uniform(-0.8, 0.8),
                                    cy + rng.uniform(-0.8, 0.8),
                                    rng.uniform(0.6, 1.0), rng.uniform(1.5, 1.9),
                                    rng.uniform(3.5, 4.6), rng.uniform(1.4, 1.7),
                                    rng.uniform(-3.14, 3.14)),
                              rng.uniform(0.0, 1.0), "Car");
        }
    }
    return dets;
}

int cmd_bench(const BenchOpts& opt, const GlobalOpts& g) {
    NivConfig niv_cfg;
    NmsConfig nms_cfg{};
    nms_cfg.iou_thres = opt.nms_thres;

    std::printf("%8s %14s %14s %14s\n", "boxes", "niv_ms", "nms_ms", "total_ms");
    for (const std::size_t n : {64, 128, 256, 512}) {
        const std::vector<Detection> dets =
            bench_set(n, derive_seed(g.seed, "bench", n));
        std::vector<double> niv_ms, nms_ms;
        for (std::size_t run = 0; run < opt.runs; ++run) {
            const auto t0 = std::chrono::steady_clock::now();
            const NivResult res = niv_rectify(dets, niv_cfg);
            const auto t1 = std::chrono::steady_clock::now();
            const auto kept = nms(res.kept, nms_cfg);
            const auto t2 = std::chrono::steady_clock::now();
            if (kept.size() > dets.size()) std::abort(); // keep the optimizer honest
            niv_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            nms_ms.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
        }
        const auto median = [](std::vector<double> v) {
            std::sort(v.begin(), v.end());
            return v[v.size() / 2];
        };
        const double m_niv = median(niv_ms);
        const double m_nms = median(nms_ms);
        std::printf("%8zu %14.4f %14.4f %14.4f\n", n, m_niv, m_nms, m_niv + m_nms);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Detection post-processing toolkit: neighbor IoU-voting "
                 "confidence rectification, rotated NMS, KITTI-style "
                 "evaluation, object-resampling augmentation, and a "
                 "detection-ensemble simulator"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "Read defaults from a config file");

    GlobalOpts g;
    app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads for frame-level parallelism")
        ->check(CLI::Range(1u, 256u))
        ->capture_default_str();

    RectifyOpts rectify_opt;
    CLI::App* rectify = app.add_subcommand(
        "rectify", "Rectify classification confidences by neighbor IoU voting");
    rectify->add_option("--input", rectify_opt.input, "Detections JSON")
        ->required();
    rectify->add_option("--output", rectify_opt.output, "Output detections JSON")
        ->required();
    rectify->add_option("--stats-csv", rectify_opt.stats_csv,
                        "Per-detection voting statistics CSV");
    rectify->add_option("--area-bev", rectify_opt.area_bev,
                        "Anchor BEV footprint (m^2)")
        ->capture_default_str();
    rectify->add_option("--iou-thres", rectify_opt.iou_thres,
                        "Neighbor IoU threshold")
        ->capture_default_str();
    rectify->add_option("--score-thres", rectify_opt.score_thres,
                        "Rectified-score keep threshold")
        ->capture_default_str();
    rectify->add_option("--iou-mode", rectify_opt.iou_mode, "3d or bev")
        ->capture_default_str();
    rectify->add_flag("--exclude-self", rectify_opt.exclude_self,
                      "Do not count a box as its own neighbor");
    rectify->add_option("--fuse-beta", rectify_opt.fuse_beta,
                        "Exponent folding predicted IoU into the confidence "
                        "before voting (0 disables)")
        ->capture_default_str();
    rectify->add_option("--nms-thres", rectify_opt.nms_thres,
                        "Run NMS after rectification at this threshold "
                        "(0 disables)")
        ->capture_default_str();
    rectify->add_option("--nms-max-keep", rectify_opt.nms_max_keep,
                        "Cap on NMS survivors (0 = unlimited)")
        ->capture_default_str();

    NmsOpts nms_opt;
    CLI::App* nms_cmd =
        app.add_subcommand("nms", "Rotated non-maximum suppression");
    nms_cmd->add_option("--input", nms_opt.input, "Detections JSON")->required();
    nms_cmd->add_option("--output", nms_opt.output, "Output detections JSON")
        ->required();
    nms_cmd->add_option("--iou-thres", nms_opt.iou_thres, "Suppression threshold")
        ->required();
    nms_cmd->add_option("--iou-mode", nms_opt.iou_mode, "3d or bev")
        ->capture_default_str();
    nms_cmd->add_option("--max-keep", nms_opt.max_keep,
                        "Cap on survivors (0 = unlimited)")
        ->capture_default_str();

    EvalOpts eval_opt;
    CLI::App* eval_cmd = app.add_subcommand(
        "eval", "Average precision and score-vs-IoU correlation");
    eval_cmd->add_option("--gt-dir", eval_opt.gt_dir, "KITTI label directory");
    eval_cmd->add_option("--det-dir", eval_opt.det_dir,
                         "Detection directory (.txt results or .json)");
    eval_cmd->add_option("--input", eval_opt.input,
                         "Single detections JSON with embedded annotations");
    eval_cmd->add_option("--out-dir", eval_opt.out_dir,
                         "Directory for report.txt, scatter.csv, runconfig.json");
    eval_cmd->add_option("--iou-thres", eval_opt.iou_thres, "Match threshold")
        ->capture_default_str();
    eval_cmd->add_option("--iou-mode", eval_opt.iou_mode, "3d or bev")
        ->capture_default_str();

    AugmentOpts aug_opt;
    CLI::App* aug_cmd = app.add_subcommand(
        "augment", "Object-resampling point cloud augmentation");
    aug_cmd->add_option("--cloud-dir", aug_opt.cloud_dir, "Input .bin directory")
        ->required();
    aug_cmd->add_option("--label-dir", aug_opt.label_dir, "Input .txt directory")
        ->required();
    aug_cmd->add_option("--out-dir", aug_opt.out_dir, "Output directory")
        ->required();
    aug_cmd->add_option("--range-bounds", aug_opt.range_bounds,
                        "near/mid and mid/far split distances (m)")
        ->delimiter(',')
        ->expected(2);
    aug_cmd->add_option("--rate-near", aug_opt.rate_near,
                        "Keep-rate interval for the near band")
        ->delimiter(',')
        ->expected(2);
    aug_cmd->add_option("--rate-mid", aug_opt.rate_mid,
                        "Keep-rate interval for the mid band")
        ->delimiter(',')
        ->expected(2);
    aug_cmd->add_option("--rate-far", aug_opt.rate_far,
                        "Keep-rate interval for the far band")
        ->delimiter(',')
        ->expected(2);
    aug_cmd->add_option("--surface-drop-probs", aug_opt.surface_drop_probs,
                        "Probabilities of dropping 0,1,2 surfaces")
        ->delimiter(',')
        ->expected(3);
    aug_cmd->add_option("--easy-min-points", aug_opt.easy_min_points,
                        "Interior point count classifying an object as easy")
        ->capture_default_str();
    aug_cmd->add_option("--occlusion-prob", aug_opt.occlusion_prob,
                        "Fraction of easy objects to occlude")
        ->capture_default_str();
    aug_cmd->add_flag("--global", aug_opt.global,
                      "Also apply mirror/rotate/scale to the whole scene");
    aug_cmd->add_option("--flip-prob", aug_opt.flip_prob, "Mirror probability")
        ->capture_default_str();
    aug_cmd->add_option("--rot-x", aug_opt.rot_x, "X-rotation interval (rad)")
        ->delimiter(',')
        ->expected(2);
    aug_cmd->add_option("--rot-y", aug_opt.rot_y, "Y-rotation interval (rad)")
        ->delimiter(',')
        ->expected(2);
    aug_cmd->add_option("--rot-z", aug_opt.rot_z, "Z-rotation interval (rad)")
        ->delimiter(',')
        ->expected(2);
    aug_cmd->add_option("--scale", aug_opt.scale, "Uniform scale interval")
        ->delimiter(',')
        ->expected(2);

    SimulateOpts sim_opt;
    CLI::App* sim_cmd = app.add_subcommand(
        "simulate", "Generate a synthetic ensemble and run the calibration "
                    "experiment");
    sim_cmd->add_option("--out-dir", sim_opt.out_dir, "Output directory")
        ->required();
    sim_cmd->add_option("--frames", sim_opt.frames, "Number of frames")
        ->capture_default_str();
    sim_cmd->add_option("--gts-per-frame", sim_opt.gts_per_frame,
                        "Ground truths per frame (min,max)")
        ->delimiter(',')
        ->expected(2);
    sim_cmd->add_option("--preds-per-gt", sim_opt.preds_per_gt,
                        "Cluster size range (min,max)")
        ->delimiter(',')
        ->expected(2);
    sim_cmd->add_option("--center-noise", sim_opt.center_noise,
                        "Center noise sigma (m)")
        ->capture_default_str();
    sim_cmd->add_option("--extent-noise", sim_opt.extent_noise,
                        "Relative extent noise sigma")
        ->capture_default_str();
    sim_cmd->add_option("--yaw-noise", sim_opt.yaw_noise, "Yaw noise sigma (rad)")
        ->capture_default_str();
    sim_cmd->add_option("--conf-noise", sim_opt.conf_noise,
                        "Confidence noise sigma")
        ->capture_default_str();
    sim_cmd->add_option("--piou-noise", sim_opt.piou_noise,
                        "Predicted-IoU noise sigma")
        ->capture_default_str();
    sim_cmd->add_option("--fp-rate", sim_opt.fp_rate,
                        "Expected false positives per frame")
        ->capture_default_str();
    sim_cmd->add_option("--area-bev", sim_opt.area_bev, "Anchor BEV footprint")
        ->capture_default_str();
    sim_cmd->add_option("--iou-thres", sim_opt.iou_thres,
                        "Neighbor IoU threshold")
        ->capture_default_str();
    sim_cmd->add_option("--score-thres", sim_opt.score_thres,
                        "Rectified-score keep threshold")
        ->capture_default_str();
    sim_cmd->add_option("--iou-mode", sim_opt.iou_mode, "3d or bev")
        ->capture_default_str();
    sim_cmd->add_option("--eval-iou-thres", sim_opt.eval_iou_thres,
                        "TP match threshold")
        ->capture_default_str();
    sim_cmd->add_option("--nms-thres", sim_opt.nms_thres, "NMS threshold")
        ->capture_default_str();
    sim_cmd->add_option("--fuse-beta", sim_opt.fuse_beta,
                        "Fusion exponent for the fused variant")
        ->capture_default_str();

    BenchOpts bench_opt;
    CLI::App* bench_cmd = app.add_subcommand(
        "bench", "Median latency of voting + NMS over synthetic box sets");
    bench_cmd->add_option("--runs", bench_opt.runs, "Timed repetitions")
        ->check(CLI::Range(std::size_t{30}, std::size_t{10000}))
        ->capture_default_str();
    bench_cmd->add_option("--nms-thres", bench_opt.nms_thres, "NMS threshold")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (rectify->parsed()) return cmd_rectify(rectify_opt, g);
        if (nms_cmd->parsed()) return cmd_nms(nms_opt, g);
        if (eval_cmd->parsed()) {
            const bool dir_mode = !eval_opt.gt_dir.empty() || !eval_opt.det_dir.empty();
            const bool file_mode = !eval_opt.input.empty();
            if (dir_mode == file_mode ||
                (dir_mode && (eval_opt.gt_dir.empty() || eval_opt.det_dir.empty()))) {
                std::cerr << "error: eval needs either --gt-dir and --det-dir, "
                             "or --input\n";
                return 1;
            }
            return cmd_eval(eval_opt, g);
        }
        if (aug_cmd->parsed()) return cmd_augment(aug_opt, g);
        if (sim_cmd->parsed()) return cmd_simulate(sim_opt, g);
        if (bench_cmd->parsed()) return cmd_bench(bench_opt, g);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
