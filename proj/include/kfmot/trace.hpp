#pragma once

#include "kfmot/association.hpp"
#include "kfmot/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <string>
#include <vector>

namespace kfmot {

enum class Units { pixels, meters };

inline const char* to_string(Units u) { return u == Units::pixels ? "pixels" : "meters"; }

struct GtFrame {
    int frame = 0;
    Box box;

    Eigen::VectorXd center() const { return center_of(box); }
};

/// Ground-truth trajectory of one object; frames strictly increasing.
struct GtTrack {
    int id = 0;
    std::string type;
    std::vector<GtFrame> frames;

    const GtFrame* at(int frame) const {
        auto it = std::lower_bound(frames.begin(), frames.end(), frame,
                                   [](const GtFrame& g, int f) { return g.frame < f; });
        return (it != frames.end() && it->frame == frame) ? &*it : nullptr;
    }
    int first_frame() const { return frames.empty() ? -1 : frames.front().frame; }
    int last_frame() const { return frames.empty() ? -1 : frames.back().frame; }
};

/// One raw KITTI tracking label row, devkit field order.
struct KittiRow {
    int frame = 0;
    int track_id = -1;
    std::string type;
    double truncated = 0;
    int occluded = 0;
    double alpha = 0;
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;  // 2D box, pixels
    double h = 0, w = 0, l = 0;            // dimensions, meters
    double x = 0, y = 0, z = 0;            // location, camera coordinates
    double rotation_y = 0;
    std::optional<double> score;
};

/// Detections per frame (indices 0..frame_count-1) plus ground truth.
struct Trace {
    std::string name;
    int dims = 3;
    Units units = Units::meters;
    DetectionFrames frames;
    std::vector<GtTrack> gt;
    std::vector<KittiRow> rows;  ///< canonical label rows (ground truth)

    int frame_count() const { return static_cast<int>(frames.size()); }

    const GtTrack* gt_track(int id) const {
        for (const auto& g : gt)
            if (g.id == id) return &g;
        return nullptr;
    }
};

/// Index of the detection produced by object `source_id` in a frame, or -1.
inline int find_source(const std::vector<Detection>& dets, int source_id) {
    for (std::size_t i = 0; i < dets.size(); ++i)
        if (dets[i].source_id == source_id) return static_cast<int>(i);
    return -1;
}

}  // namespace kfmot
