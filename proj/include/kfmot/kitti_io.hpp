#pragma once

#include "kfmot/error.hpp"
#include "kfmot/geometry.hpp"
#include "kfmot/trace.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace kfmot {

struct ParseOptions {
    std::vector<std::string> classes;  ///< keep only these types; empty keeps all
    int dims = 3;                      ///< geometry handed to the tracker
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

inline double to_double(const std::string& s, std::size_t line, const char* field) {
    double v = 0;
    const auto* end = s.data() + s.size();
    const auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end || !std::isfinite(v))
        throw MalformedRow(line, std::string("bad numeric field '") + field + "': " + s);
    return v;
}

inline int to_int(const std::string& s, std::size_t line, const char* field) {
    int v = 0;
    const auto* end = s.data() + s.size();
    const auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end)
        throw MalformedRow(line, std::string("bad integer field '") + field + "': " + s);
    return v;
}

inline std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace detail

/// KITTI camera coordinates (x right, y down, z forward) to the tracker's
/// ground plane: (cx, cy) = (x, z), cz = y; heading yaw = -rotation_y.
inline BBox3D row_to_box3d(const KittiRow& r) {
    return BBox3D{r.x, r.z, r.y, r.l, r.w, r.h, wrap_angle(-r.rotation_y)};
}

inline BBox2D row_to_box2d(const KittiRow& r) { return BBox2D{r.x1, r.y1, r.x2, r.y2}; }

inline KittiRow parse_row(const std::string& line, std::size_t line_no) {
    const auto f = detail::split_ws(line);
    if (f.size() != 17 && f.size() != 18)
        throw MalformedRow(line_no, "expected 17 or 18 fields, got " + std::to_string(f.size()));
    using detail::to_double;
    using detail::to_int;
    KittiRow r;
    r.frame = to_int(f[0], line_no, "frame");
    if (r.frame < 0) throw MalformedRow(line_no, "negative frame index");
    r.track_id = to_int(f[1], line_no, "track_id");
    r.type = f[2];
    r.truncated = to_double(f[3], line_no, "truncated");
    r.occluded = to_int(f[4], line_no, "occluded");
    r.alpha = to_double(f[5], line_no, "alpha");
    r.x1 = to_double(f[6], line_no, "x1");
    r.y1 = to_double(f[7], line_no, "y1");
    r.x2 = to_double(f[8], line_no, "x2");
    r.y2 = to_double(f[9], line_no, "y2");
    r.h = to_double(f[10], line_no, "h");
    r.w = to_double(f[11], line_no, "w");
    r.l = to_double(f[12], line_no, "l");
    r.x = to_double(f[13], line_no, "x");
    r.y = to_double(f[14], line_no, "y");
    r.z = to_double(f[15], line_no, "z");
    r.rotation_y = to_double(f[16], line_no, "rotation_y");
    if (f.size() == 18) r.score = to_double(f[17], line_no, "score");
    return r;
}

inline std::string serialize_row(const KittiRow& r) {
    using detail::fmt6;
    std::string s = std::to_string(r.frame) + ' ' + std::to_string(r.track_id) + ' ' + r.type + ' ' +
                    fmt6(r.truncated) + ' ' + std::to_string(r.occluded) + ' ' + fmt6(r.alpha);
    for (double v : {r.x1, r.y1, r.x2, r.y2, r.h, r.w, r.l, r.x, r.y, r.z, r.rotation_y}) s += ' ' + fmt6(v);
    if (r.score) s += ' ' + fmt6(*r.score);
    return s;
}

/// Builds detections (ids stripped) and ground-truth tracks from label rows.
/// Rows must be ordered by frame; DontCare rows carry no geometry.
inline Trace trace_from_rows(std::vector<KittiRow> rows, int dims, std::string name = {}) {
    if (dims != 2 && dims != 3) throw InvalidArgument("trace dims must be 2 or 3");
    Trace t;
    t.name = std::move(name);
    t.dims = dims;
    t.units = dims == 2 ? Units::pixels : Units::meters;
    int max_frame = -1;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0 && rows[i].frame < rows[i - 1].frame)
            throw NonContiguousFrames("frame " + std::to_string(rows[i].frame) + " follows frame " +
                                      std::to_string(rows[i - 1].frame));
        max_frame = std::max(max_frame, rows[i].frame);
    }
    t.frames.resize(static_cast<std::size_t>(max_frame + 1));
    std::map<int, GtTrack> gt;
    for (const auto& r : rows) {
        if (r.type == "DontCare") continue;
        Box box;
        if (dims == 2) {
            const auto b = row_to_box2d(r);
            if (!is_valid(b)) continue;
            box = b;
        } else {
            const auto b = row_to_box3d(r);
            if (!is_valid(b)) continue;
            box = b;
        }
        Detection d;
        d.box = box;
        d.source_id = r.track_id;
        t.frames[static_cast<std::size_t>(r.frame)].push_back(d);
        if (r.track_id >= 0) {
            auto& g = gt[r.track_id];
            g.id = r.track_id;
            g.type = r.type;
            if (!g.frames.empty() && g.frames.back().frame == r.frame) continue;
            g.frames.push_back({r.frame, box});
        }
    }
    for (auto& [id, g] : gt) t.gt.push_back(std::move(g));
    t.rows = std::move(rows);
    return t;
}

inline Trace parse(std::istream& in, const ParseOptions& opt = {}, std::string name = {}) {
    std::vector<KittiRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        KittiRow r = parse_row(line, line_no);
        if (!opt.classes.empty() &&
            std::find(opt.classes.begin(), opt.classes.end(), r.type) == opt.classes.end())
            continue;
        rows.push_back(std::move(r));
    }
    return trace_from_rows(std::move(rows), opt.dims, std::move(name));
}

inline Trace parse_string(const std::string& text, const ParseOptions& opt = {}) {
    std::istringstream is(text);
    return parse(is, opt);
}

inline std::string serialize(const Trace& trace) {
    std::string out;
    for (const auto& r : trace.rows) out += serialize_row(r) + '\n';
    return out;
}

inline Trace read_label_file(const std::filesystem::path& path, const ParseOptions& opt = {}) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open label file: " + path.string());
    return parse(in, opt, path.stem().string());
}

/// Every *.txt file of a directory, sorted by file name.
inline std::vector<Trace> read_label_dir(const std::filesystem::path& dir, const ParseOptions& opt = {}) {
    if (!std::filesystem::is_directory(dir)) throw InvalidArgument("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<Trace> out;
    for (const auto& f : files) out.push_back(read_label_file(f, opt));
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic traces

struct SynthObject {
    int id = 0;
    std::string type = "Car";
    int start_frame = 0;
    int lifetime = 0;           ///< frames alive; 0 means until the end
    Eigen::VectorXd start;      ///< center at start_frame (2 or 3 components)
    Eigen::VectorXd velocity;   ///< per frame
    Eigen::Vector3d extents{4.0, 1.8, 1.5};  ///< 3D: l, w, h; 2D: width, height, unused
    std::optional<double> yaw;  ///< 3D heading; defaults to the velocity direction
};

struct SynthSpec {
    int dims = 3;
    int frames = 100;
    double noise_sigma = 0.0;  ///< white noise on detection centers
    std::uint64_t seed = 0;
    std::vector<SynthObject> objects;
};

namespace detail {

inline KittiRow row_from_box3d(int frame, int id, const std::string& type, const BBox3D& b) {
    KittiRow r;
    r.frame = frame;
    r.track_id = id;
    r.type = type;
    r.l = b.l;
    r.w = b.w;
    r.h = b.h;
    r.x = b.cx;
    r.z = b.cy;
    r.y = b.cz;
    r.rotation_y = wrap_angle(-b.yaw);
    r.alpha = wrap_angle(r.rotation_y - std::atan2(r.x, r.z));
    // Rough pinhole projection so the 2D fields stay meaningful.
    constexpr double f = 721.5377, cu = 609.5593, cv = 172.854;
    const double depth = std::max(r.z, 1.0);
    const double half = 0.5 * f * std::max(b.l, b.w) / depth;
    const double u = f * r.x / depth + cu;
    r.x1 = u - half;
    r.x2 = u + half;
    r.y1 = f * (r.y - r.h) / depth + cv;
    r.y2 = f * r.y / depth + cv;
    return r;
}

inline KittiRow row_from_box2d(int frame, int id, const std::string& type, const BBox2D& b) {
    KittiRow r;
    r.frame = frame;
    r.track_id = id;
    r.type = type;
    r.alpha = -10;
    r.x1 = b.x1;
    r.y1 = b.y1;
    r.x2 = b.x2;
    r.y2 = b.y2;
    r.h = r.w = r.l = -1;
    r.x = r.y = r.z = -1000;
    r.rotation_y = -10;
    return r;
}

}  // namespace detail

/// Constant-velocity ground truth with Gaussian-perturbed detections.
inline Trace synth(const SynthSpec& spec) {
    if (spec.dims != 2 && spec.dims != 3) throw InvalidArgument("synth dims must be 2 or 3");
    if (spec.frames <= 0) throw InvalidArgument("synth frames must be positive");
    if (!(spec.noise_sigma >= 0.0)) throw InvalidArgument("synth noise must be >= 0");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    Trace t;
    t.name = "synth-" + std::to_string(spec.seed);
    t.dims = spec.dims;
    t.units = spec.dims == 2 ? Units::pixels : Units::meters;
    t.frames.resize(static_cast<std::size_t>(spec.frames));
    std::vector<GtTrack> gt(spec.objects.size());

    for (int f = 0; f < spec.frames; ++f) {
        for (std::size_t k = 0; k < spec.objects.size(); ++k) {
            const auto& o = spec.objects[k];
            if (o.start.size() != spec.dims || o.velocity.size() != spec.dims)
                throw InvalidArgument("synth object dimension mismatch");
            const int end = o.lifetime > 0 ? o.start_frame + o.lifetime : spec.frames;
            if (f < o.start_frame || f >= end) continue;
            const Eigen::VectorXd c = o.start + static_cast<double>(f - o.start_frame) * o.velocity;
            Box box;
            if (spec.dims == 3) {
                const double yaw = o.yaw.value_or(o.velocity.head<2>().squaredNorm() > 0
                                                      ? std::atan2(o.velocity[1], o.velocity[0])
                                                      : 0.0);
                box = BBox3D{c[0], c[1], c[2], o.extents[0], o.extents[1], o.extents[2], wrap_angle(yaw)};
                t.rows.push_back(detail::row_from_box3d(f, o.id, o.type, std::get<BBox3D>(box)));
            } else {
                const double hw = 0.5 * o.extents[0], hh = 0.5 * o.extents[1];
                box = BBox2D{c[0] - hw, c[1] - hh, c[0] + hw, c[1] + hh};
                t.rows.push_back(detail::row_from_box2d(f, o.id, o.type, std::get<BBox2D>(box)));
            }
            auto& g = gt[k];
            g.id = o.id;
            g.type = o.type;
            g.frames.push_back({f, box});

            Eigen::VectorXd jitter = Eigen::VectorXd::Zero(spec.dims);
            if (spec.noise_sigma > 0.0)
                for (int i = 0; i < spec.dims; ++i) jitter[i] = spec.noise_sigma * noise(rng);
            Detection d;
            d.box = translated(box, jitter);
            d.source_id = o.id;
            t.frames[static_cast<std::size_t>(f)].push_back(d);
        }
    }
    for (auto& g : gt)
        if (!g.frames.empty()) t.gt.push_back(std::move(g));
    return t;
}

struct SceneSpec {
    int dims = 3;
    int objects = 6;
    int frames = 100;
    double noise_sigma = -1.0;  ///< negative picks 0.1 m (3D) or 1 px (2D)
    std::uint64_t seed = 0;
};

/// Randomised traffic: one object per lane, lanes far enough apart that boxes
/// never overlap. Object 0 lives for the whole trace; the others enter during
/// the first quarter. 3D objects drive along +-y (lateral axis x); 2D objects
/// move horizontally in separate image rows.
inline SynthSpec random_scene(const SceneSpec& s) {
    std::mt19937_64 rng(s.seed * 0x9E3779B97F4A7C15ULL + 17);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };

    SynthSpec spec;
    spec.dims = s.dims;
    spec.frames = s.frames;
    spec.seed = s.seed;
    spec.noise_sigma = s.noise_sigma >= 0.0 ? s.noise_sigma : (s.dims == 3 ? 0.1 : 1.0);
    for (int i = 0; i < s.objects; ++i) {
        SynthObject o;
        o.id = i;
        o.start_frame = i == 0 ? 0 : static_cast<int>(uni(0.0, s.frames / 4.0));
        o.start = Eigen::VectorXd::Zero(s.dims);
        o.velocity = Eigen::VectorXd::Zero(s.dims);
        if (s.dims == 3) {
            o.start[0] = (i - 0.5 * (s.objects - 1)) * 3.5 + uni(-0.3, 0.3);
            o.start[1] = uni(10.0, 40.0);
            o.start[2] = 1.6;
            const double speed = uni(0.2, 1.2);
            o.velocity[1] = u01(rng) < 0.5 ? speed : -speed;
            o.extents = {uni(3.6, 4.6), uni(1.6, 1.9), uni(1.4, 1.7)};
        } else {
            o.start[0] = uni(200.0, 1000.0);
            o.start[1] = 60.0 + 70.0 * i;
            const double speed = uni(1.0, 5.0);
            o.velocity[0] = u01(rng) < 0.5 ? speed : -speed;
            o.extents = {uni(50.0, 90.0), uni(30.0, 50.0), 0.0};
        }
        spec.objects.push_back(o);
    }
    return spec;
}

}  // namespace kfmot
