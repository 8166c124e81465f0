#include "nivtk/datio.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nivtk/errors.hpp"

namespace nivtk {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string loc(const std::filesystem::path& path) { return path.string(); }

std::vector<char> read_all_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError(loc(path) + ": cannot open file");
    }
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    return bytes;
}

float le_float(const char* p) {
    const auto b = [&](int i) {
        return static_cast<std::uint32_t>(static_cast<unsigned char>(p[i]));
    };
    const std::uint32_t u = b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
    return std::bit_cast<float>(u);
}

void put_le_float(std::string& out, float v) {
    const std::uint32_t u = std::bit_cast<std::uint32_t>(v);
    out.push_back(static_cast<char>(u & 0xFF));
    out.push_back(static_cast<char>((u >> 8) & 0xFF));
    out.push_back(static_cast<char>((u >> 16) & 0xFF));
    out.push_back(static_cast<char>((u >> 24) & 0xFF));
}

} // namespace

PointCloud read_point_cloud(const std::filesystem::path& path) {
    const std::vector<char> bytes = read_all_bytes(path);
    if (bytes.size() % 16 != 0) {
        throw FormatError(loc(path) + ": byte length " +
                          std::to_string(bytes.size()) +
                          " is not divisible by 16 (trailing record at offset " +
                          std::to_string(bytes.size() - bytes.size() % 16) + ")");
    }
    PointCloud cloud;
    cloud.points.reserve(bytes.size() / 16);
    for (std::size_t off = 0; off < bytes.size(); off += 16) {
        const std::size_t index = off / 16;
        PointXYZI p{le_float(&bytes[off]), le_float(&bytes[off + 4]),
                    le_float(&bytes[off + 8]), le_float(&bytes[off + 12])};
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) ||
            !std::isfinite(p.intensity)) {
            throw FormatError(loc(path) + ": non-finite value at point " +
                              std::to_string(index));
        }
        if (p.intensity < 0.0f || p.intensity > 1.0f) {
            throw FormatError(loc(path) + ": intensity out of [0, 1] at point " +
                              std::to_string(index));
        }
        cloud.points.push_back(p);
    }
    return cloud;
}

void write_point_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
    std::string bytes;
    bytes.reserve(cloud.size() * 16);
    for (const PointXYZI& p : cloud.points) {
        put_le_float(bytes, p.x);
        put_le_float(bytes, p.y);
        put_le_float(bytes, p.z);
        put_le_float(bytes, p.intensity);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError(loc(path) + ": cannot open file for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

namespace {

// Camera-frame label fields -> toolkit box. Indices into the 14 numeric
// fields that follow the type: 7..13 are h w l x y z rotation_y.
Box3D box_from_kitti(const std::array<double, 14>& f) {
    double h = f[7], w = f[8], l = f[9];
    if (!(h > 0.0) || !(w > 0.0) || !(l > 0.0)) {
        // DontCare rows carry -1 dimensions; keep a unit placeholder far
        // from any plausible detection (raw fields stay authoritative).
        h = w = l = 1.0;
    }
    const double x = f[12];
    const double y = -f[10];
    const double z = -f[11] + 0.5 * h;
    const double yaw = -f[13] - kPi / 2.0;
    return Box3D(x, y, z, w, l, h, yaw);
}

std::array<double, 14> kitti_from_box(const Box3D& box) {
    std::array<double, 14> f{};
    f[0] = 0.0;   // truncated
    f[1] = 0.0;   // occluded
    f[2] = -10.0; // alpha: unknown without camera data
    f[3] = f[4] = f[5] = f[6] = 0.0; // image bbox: no camera data
    f[7] = box.h();
    f[8] = box.w();
    f[9] = box.l();
    f[10] = -box.y();
    f[11] = -(box.z() - 0.5 * box.h());
    f[12] = box.x();
    f[13] = normalize_angle(-box.r() - kPi / 2.0);
    return f;
}

struct KittiRow {
    std::string type;
    std::array<double, 14> fields;
    std::optional<double> score;
};

std::vector<KittiRow> read_kitti_rows(const std::filesystem::path& path,
                                      std::size_t expected_fields) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError(loc(path) + ": cannot open file");
    }
    std::vector<KittiRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        std::vector<std::string> tokens;
        std::string tok;
        while (ss >> tok) tokens.push_back(tok);
        if (tokens.size() != expected_fields) {
            throw FormatError(loc(path) + ":" + std::to_string(line_no) +
                              ": expected " + std::to_string(expected_fields) +
                              " fields, got " + std::to_string(tokens.size()));
        }
        KittiRow row;
        row.type = tokens[0];
        for (std::size_t i = 0; i < 14; ++i) {
            const std::string& t = tokens[i + 1];
            const auto [ptr, ec] =
                std::from_chars(t.data(), t.data() + t.size(), row.fields[i]);
            if (ec != std::errc() || ptr != t.data() + t.size()) {
                throw FormatError(loc(path) + ":" + std::to_string(line_no) +
                                  ": bad numeric field '" + t + "'");
            }
        }
        if (expected_fields == 16) {
            const std::string& t = tokens[15];
            double score = 0.0;
            const auto [ptr, ec] =
                std::from_chars(t.data(), t.data() + t.size(), score);
            if (ec != std::errc() || ptr != t.data() + t.size()) {
                throw FormatError(loc(path) + ":" + std::to_string(line_no) +
                                  ": bad score field '" + t + "'");
            }
            row.score = score;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void format_kitti_line(std::string& out, const std::string& type,
                       const std::array<double, 14>& f,
                       std::optional<double> score) {
    char buf[352];
    int n = std::snprintf(
        buf, sizeof buf,
        "%s %.2f %d %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f %.2f",
        type.c_str(), f[0], static_cast<int>(std::llround(f[1])), f[2], f[3],
        f[4], f[5], f[6], f[7], f[8], f[9], f[10], f[11], f[12], f[13]);
    out.append(buf, static_cast<std::size_t>(n));
    if (score) {
        n = std::snprintf(buf, sizeof buf, " %.4f", *score);
        out.append(buf, static_cast<std::size_t>(n));
    }
    out.push_back('\n');
}

} // namespace

FrameAnnotations read_kitti_labels(const std::filesystem::path& path) {
    FrameAnnotations ann;
    for (const KittiRow& row : read_kitti_rows(path, 15)) {
        ann.gt_boxes.push_back(box_from_kitti(row.fields));
        ann.categories.push_back(row.type);
        ann.ignore_flags.push_back(row.type == "DontCare" ? 1 : 0);
        ann.kitti_raw.push_back(row.fields);
    }
    ann.validate();
    return ann;
}

void write_kitti_labels(const std::filesystem::path& path,
                        const FrameAnnotations& annotations) {
    annotations.validate();
    std::string out;
    for (std::size_t i = 0; i < annotations.size(); ++i) {
        std::array<double, 14> fields;
        if (annotations.ignore_flags[i] && !annotations.kitti_raw.empty()) {
            // Ignore rows usually carry no valid geometry; write the
            // original fields verbatim.
            fields = annotations.kitti_raw[i];
        } else {
            fields = kitti_from_box(annotations.gt_boxes[i]);
            if (!annotations.kitti_raw.empty()) {
                // Keep the camera-only fields we cannot derive.
                for (int j = 0; j < 7; ++j) fields[j] = annotations.kitti_raw[i][j];
            }
        }
        format_kitti_line(out, annotations.categories[i], fields, std::nullopt);
    }
    std::ofstream file(path, std::ios::trunc);
    if (!file) {
        throw FormatError(loc(path) + ": cannot open file for writing");
    }
    file << out;
}

std::vector<Detection> read_kitti_results(const std::filesystem::path& path) {
    std::vector<Detection> dets;
    for (const KittiRow& row : read_kitti_rows(path, 16)) {
        dets.emplace_back(box_from_kitti(row.fields), *row.score, row.type);
    }
    return dets;
}

void write_kitti_results(const std::filesystem::path& path,
                         std::span<const Detection> dets) {
    std::string out;
    for (const Detection& d : dets) {
        format_kitti_line(out, d.category(), kitti_from_box(d.box()),
                          d.confidence());
    }
    std::ofstream file(path, std::ios::trunc);
    if (!file) {
        throw FormatError(loc(path) + ": cannot open file for writing");
    }
    file << out;
}

namespace {

using json = nlohmann::ordered_json;

json box_to_json(const Box3D& b) {
    return json::array({b.x(), b.y(), b.z(), b.w(), b.l(), b.h(), b.r()});
}

Box3D box_from_json(const json& j) {
    if (!j.is_array() || j.size() != 7) {
        throw FormatError("box must be a 7-element array");
    }
    return Box3D(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                 j[3].get<double>(), j[4].get<double>(), j[5].get<double>(),
                 j[6].get<double>());
}

json stats_to_json(const NivStats& s) {
    return json{{"input_index", s.input_index},
                {"n_neighbor_raw", s.n_neighbor_raw},
                {"n_neighbor_scaled", s.n_neighbor_scaled},
                {"iou_mean", s.iou_mean},
                {"s_niv", s.s_niv},
                {"s", s.s},
                {"confidence_in", s.confidence_in},
                {"kept", s.kept}};
}

NivStats stats_from_json(const json& j) {
    NivStats s;
    s.input_index = j.at("input_index").get<std::size_t>();
    s.n_neighbor_raw = j.at("n_neighbor_raw").get<int>();
    s.n_neighbor_scaled = j.at("n_neighbor_scaled").get<double>();
    s.iou_mean = j.at("iou_mean").get<double>();
    s.s_niv = j.at("s_niv").get<double>();
    s.s = j.at("s").get<double>();
    s.confidence_in = j.at("confidence_in").get<double>();
    s.kept = j.at("kept").get<bool>();
    return s;
}

} // namespace

std::vector<DetectionFrame> read_detections_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError(loc(path) + ": cannot open file");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(loc(path) + ": " + e.what());
    }
    try {
        const std::string schema = doc.at("schema").get<std::string>();
        if (schema != kDetectionsSchema) {
            throw FormatError(loc(path) + ": unsupported schema '" + schema +
                              "' (expected '" + kDetectionsSchema + "')");
        }
        std::vector<DetectionFrame> frames;
        std::set<std::string> seen_ids;
        for (const json& jf : doc.at("frames")) {
            DetectionFrame frame;
            frame.frame_id = jf.at("frame_id").get<std::string>();
            if (frame.frame_id.empty()) {
                throw FormatError(loc(path) + ": empty frame_id");
            }
            if (!seen_ids.insert(frame.frame_id).second) {
                throw FormatError(loc(path) + ": duplicate frame_id '" +
                                  frame.frame_id + "'");
            }
            for (const json& jd : jf.at("detections")) {
                std::optional<double> piou;
                if (jd.contains("predicted_iou")) {
                    piou = jd.at("predicted_iou").get<double>();
                }
                frame.detections.emplace_back(box_from_json(jd.at("box")),
                                              jd.at("confidence").get<double>(),
                                              jd.at("category").get<std::string>(),
                                              piou);
                frame.det_stats.push_back(
                    jd.contains("niv")
                        ? std::optional<NivStats>(stats_from_json(jd.at("niv")))
                        : std::nullopt);
            }
            if (jf.contains("annotations")) {
                FrameAnnotations ann;
                const json& ja = jf.at("annotations");
                for (const json& jb : ja.at("boxes")) {
                    ann.gt_boxes.push_back(box_from_json(jb));
                }
                ann.categories = ja.at("categories").get<std::vector<std::string>>();
                for (const bool flag : ja.at("ignore").get<std::vector<bool>>()) {
                    ann.ignore_flags.push_back(flag ? 1 : 0);
                }
                ann.validate();
                frame.annotations = std::move(ann);
            }
            frames.push_back(std::move(frame));
        }
        return frames;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(loc(path) + ": " + e.what());
    }
}

void write_detections_json(const std::filesystem::path& path,
                           std::span<const DetectionFrame> frames) {
    json doc;
    doc["schema"] = kDetectionsSchema;
    json jframes = json::array();
    for (const DetectionFrame& frame : frames) {
        json jf;
        jf["frame_id"] = frame.frame_id;
        json jdets = json::array();
        for (std::size_t i = 0; i < frame.detections.size(); ++i) {
            const Detection& d = frame.detections[i];
            json jd;
            jd["box"] = box_to_json(d.box());
            jd["confidence"] = d.confidence();
            jd["category"] = d.category();
            if (d.predicted_iou()) {
                jd["predicted_iou"] = *d.predicted_iou();
            }
            if (i < frame.det_stats.size() && frame.det_stats[i]) {
                jd["niv"] = stats_to_json(*frame.det_stats[i]);
            }
            jdets.push_back(std::move(jd));
        }
        jf["detections"] = std::move(jdets);
        if (frame.annotations) {
            const FrameAnnotations& ann = *frame.annotations;
            json ja;
            json jboxes = json::array();
            for (const Box3D& b : ann.gt_boxes) jboxes.push_back(box_to_json(b));
            ja["boxes"] = std::move(jboxes);
            ja["categories"] = ann.categories;
            json jignore = json::array();
            for (const std::uint8_t f : ann.ignore_flags) {
                jignore.push_back(f != 0);
            }
            ja["ignore"] = std::move(jignore);
            jf["annotations"] = std::move(ja);
        }
        jframes.push_back(std::move(jf));
    }
    doc["frames"] = std::move(jframes);

    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw FormatError(loc(path) + ": cannot open file for writing");
    }
    out << doc.dump(2) << '\n';
}

void write_scatter_csv(const std::filesystem::path& path,
                       std::span<const ScatterRow> rows) {
    std::string out = "frame_id,det_index,real_iou,confidence,s_niv,rectified_score\n";
    char buf[160];
    for (const ScatterRow& r : rows) {
        int n = std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.6f,", r.frame_id.c_str(),
                              r.det_index, r.real_iou, r.confidence);
        out.append(buf, static_cast<std::size_t>(n));
        if (r.s_niv) {
            n = std::snprintf(buf, sizeof buf, "%.6f", *r.s_niv);
            out.append(buf, static_cast<std::size_t>(n));
        }
        out.push_back(',');
        if (r.rectified_score) {
            n = std::snprintf(buf, sizeof buf, "%.6f", *r.rectified_score);
            out.append(buf, static_cast<std::size_t>(n));
        }
        out.push_back('\n');
    }
    std::ofstream file(path, std::ios::trunc);
    if (!file) {
        throw FormatError(loc(path) + ": cannot open file for writing");
    }
    file << out;
}

std::string format_eval_report(const EvalReport& report) {
    std::string out;
    char buf[256];
    for (const CategoryEval& cat : report.categories) {
        std::snprintf(buf, sizeof buf,
                      "category %s\n"
                      "  frames        %zu\n"
                      "  ground truths %zu\n"
                      "  detections    %zu\n"
                      "  TP %zu  FP %zu  ignored %zu\n"
                      "  AP_R40  %.4f\n"
                      "  AP_R11  %.4f\n",
                      cat.category.c_str(), cat.n_frames, cat.n_gt, cat.n_det,
                      cat.tp, cat.fp, cat.ignored, cat.ap_r40, cat.ap_r11);
        out += buf;
        const auto pcc_line = [&](const char* name,
                                  const std::optional<double>& v) {
            if (!v) return;
            std::snprintf(buf, sizeof buf, "  PCC(%s, real IoU)  %.4f\n", name,
                          *v);
            out += buf;
        };
        pcc_line("confidence", cat.pcc_confidence);
        pcc_line("rectified", cat.pcc_rectified);
    }
    return out;
}

void write_eval_report(const std::filesystem::path& path,
                       const EvalReport& report) {
    std::ofstream file(path, std::ios::trunc);
    if (!file) {
        throw FormatError(loc(path) + ": cannot open file for writing");
    }
    file << format_eval_report(report);
}

void write_stats_csv(const std::filesystem::path& path,
                     std::span<const std::string> frame_ids,
                     std::span<const std::vector<NivStats>> frames) {
    if (frame_ids.size() != frames.size()) {
        throw InvalidArgument("write_stats_csv: frame list length mismatch");
    }
    std::string out =
        "frame_id,det_index,confidence_in,n_neighbor_raw,n_neighbor_scaled,"
        "iou_mean,s_niv,s,kept\n";
    char buf[224];
    for (std::size_t f = 0; f < frames.size(); ++f) {
        for (const NivStats& s : frames[f]) {
            const int n = std::snprintf(
                buf, sizeof buf, "%s,%zu,%.6f,%d,%.6f,%.6f,%.6f,%.6f,%d\n",
                frame_ids[f].c_str(), s.input_index, s.confidence_in,
                s.n_neighbor_raw, s.n_neighbor_scaled, s.iou_mean, s.s_niv, s.s,
                s.kept ? 1 : 0);
            out.append(buf, static_cast<std::size_t>(n));
        }
    }
    std::ofstream file(path, std::ios::trunc);
    if (!file) {
        throw FormatError(loc(path) + ": cannot open file for writing");
    }
    file << out;
}

} // namespace nivtk
