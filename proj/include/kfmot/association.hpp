#pragma once

#include "kfmot/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

namespace kfmot {

/// One observed bounding box handed to the tracker.
struct Detection {
    Box box;
    std::optional<Eigen::VectorXd> feature;
    std::optional<int> point_count;     // 3D only
    std::optional<Vec3> mass_center;    // 3D only
    bool foreground = true;             // 3D only
    /// Ground-truth object this detection came from, or -1. Never read by the
    /// tracker; used by the attack simulator and evaluation to locate targets.
    int source_id = -1;
};

using DetectionFrames = std::vector<std::vector<Detection>>;

/// What association needs to know about one track at the current frame.
struct TrackView {
    int id = 0;
    Eigen::VectorXd predicted_center;
    Eigen::VectorXd predicted_velocity;
    Box latest_box;
    std::optional<Eigen::VectorXd> latest_feature;
    std::optional<int> latest_point_count;
    std::optional<Vec3> latest_mass_center;

    /// Latest extents (and yaw) placed at the predicted center.
    Box predicted_box() const { return recentered(latest_box, predicted_center); }
};

/// Rows are tracks, columns detections. Gated entries never match.
struct ScoreMatrix {
    Eigen::MatrixXd score;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> gated;
    std::vector<int> row_ids;

    ScoreMatrix() = default;
    ScoreMatrix(Eigen::Index rows, Eigen::Index cols)
        : score(Eigen::MatrixXd::Zero(rows, cols)),
          gated(Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(rows, cols, false)),
          row_ids(static_cast<std::size_t>(rows)) {
        for (Eigen::Index r = 0; r < rows; ++r) row_ids[static_cast<std::size_t>(r)] = static_cast<int>(r);
    }

    Eigen::Index rows() const { return score.rows(); }
    Eigen::Index cols() const { return score.cols(); }
};

struct Matching {
    std::vector<std::pair<int, int>> pairs;  ///< (track id, detection index)
    std::vector<int> unmatched_tracks;       ///< track ids
    std::vector<int> unmatched_detections;   ///< detection indices
};

// ---------------------------------------------------------------------------
// 2D similarity

struct Sim2dParams {
    double w_fs = 0.45, w_ms = 0.4, w_ss = 0.15, w_is = 0.05;  // features available
    double w_ms_nf = 0.5, w_ss_nf = 0.15, w_is_nf = 0.35;       // no features
    double ms_gate = 0.045;
    double unified_gate = 0.6;
    double sigma_scale = 1.0;
    /// Normalised Gaussian pdf when true; unit-peak kernel exp(-d^2/2s^2) otherwise.
    bool normalized_density = true;
};

struct Sim2d {
    double fs = 0, ms = 0, ss = 0, is = 0, unified = 0;
    bool has_feature = false;
};

namespace detail {

inline double gaussian(double x, double mean, double sigma, bool normalized) {
    sigma = std::max(sigma, 1e-9);
    const double z = (x - mean) / sigma;
    const double kernel = std::exp(-0.5 * z * z);
    return normalized ? kernel / (sigma * std::sqrt(2.0 * std::numbers::pi)) : kernel;
}

inline std::optional<double> feature_dot(const std::optional<Eigen::VectorXd>& a,
                                         const std::optional<Eigen::VectorXd>& b) {
    if (!a || !b || a->size() != b->size() || a->size() == 0) return std::nullopt;
    return a->dot(*b);
}

}  // namespace detail

inline Sim2d sim2d(const TrackView& track, const Detection& det, const Sim2dParams& p = {}) {
    const auto& obs = std::get<BBox2D>(det.box);
    const auto pred = std::get<BBox2D>(track.predicted_box());
    const Vec2 oc = center(obs);
    const Vec2 pc = center(pred);
    const double l = obs.width(), w = obs.height();
    const double L = pred.width(), W = pred.height();

    Sim2d out;
    out.ms = detail::gaussian(pc.x(), oc.x(), l * p.sigma_scale, p.normalized_density) *
             detail::gaussian(pc.y(), oc.y(), w * p.sigma_scale, p.normalized_density);
    const double num = (L - l) * (W - w);
    out.ss = (L * W > 0.0) ? -std::abs(num / (L * W)) : (num == 0.0 ? 0.0 : -1.0);
    out.is = iou_2d(pred, obs);
    if (const auto fs = detail::feature_dot(track.latest_feature, det.feature)) {
        out.has_feature = true;
        out.fs = *fs;
        out.unified = p.w_fs * out.fs + p.w_ms * out.ms + p.w_ss * out.ss + p.w_is * out.is;
    } else {
        out.unified = p.w_ms_nf * out.ms + p.w_ss_nf * out.ss + p.w_is_nf * out.is;
    }
    return out;
}

inline bool gated_out_2d(const Sim2d& s, const Sim2dParams& p = {}) {
    return s.ms < p.ms_gate || s.unified < p.unified_gate;
}

/// Similarity matrix over all (track, detection) pairs, gates applied.
inline ScoreMatrix gate2d(const std::vector<TrackView>& tracks, const std::vector<Detection>& dets,
                          const Sim2dParams& p = {}) {
    ScoreMatrix m(static_cast<Eigen::Index>(tracks.size()), static_cast<Eigen::Index>(dets.size()));
    for (std::size_t r = 0; r < tracks.size(); ++r) {
        m.row_ids[r] = tracks[r].id;
        for (std::size_t c = 0; c < dets.size(); ++c) {
            const Sim2d s = sim2d(tracks[r], dets[c], p);
            m.score(r, c) = s.unified;
            m.gated(r, c) = gated_out_2d(s, p);
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// 3D dissimilarity

struct Dissim3dParams {
    double w_ld = 0.6, w_dd = 0.2, w_sd = 0.1, w_pdd = 0.1, w_feat = 0.5;  // foreground
    double w_mcd = 0.2, w_id = 0.8;                                         // background
    double speed_threshold = 2.0;  ///< m/frame, switches LD to the weighted form
    double feature_mismatch = 100.0;
    double gate = 4.0;
};

struct Dissim3d {
    double ld = 0, dd = 0, sd = 0, pdd = 0, featd = 0, mcd = 0, id = 0, unified = 0;
};

inline Dissim3d dissim3d(const TrackView& track, const Detection& det, const Dissim3dParams& p = {}) {
    const auto& obs = std::get<BBox3D>(det.box);
    const auto& latest = std::get<BBox3D>(track.latest_box);
    const auto pred = std::get<BBox3D>(track.predicted_box());

    Dissim3d d;
    const double dx = obs.cx - pred.cx;
    const double dy = obs.cy - pred.cy;
    const double speed = std::hypot(track.predicted_velocity[0], track.predicted_velocity[1]);
    d.ld = speed > p.speed_threshold ? std::sqrt(0.5 * dx * dx + 2.0 * dy * dy) : std::hypot(dx, dy);

    d.dd = 0.5 * (1.0 - std::cos(obs.yaw - latest.yaw));

    const double vol = pred.l * pred.w * pred.h;
    d.sd = std::abs((pred.l - obs.l) * (pred.w - obs.w) * (pred.h - obs.h) / vol);

    if (det.point_count && track.latest_point_count) {
        const int n = *det.point_count, m = *track.latest_point_count;
        const int mx = std::max(n, m);
        d.pdd = mx == 0 ? 0.0 : static_cast<double>(std::abs(n - m)) / mx;
    }

    if (det.feature && track.latest_feature) {
        d.featd = det.feature->size() == track.latest_feature->size()
                      ? (*det.feature - *track.latest_feature).cwiseAbs().sum()
                      : p.feature_mismatch;
    }

    const Vec3 mc_obs = det.mass_center.value_or(center(obs));
    const Vec3 mc_trk = track.latest_mass_center.value_or(center(latest));
    d.mcd = (mc_obs - mc_trk).norm();
    d.id = 1.0 - iou_bev(pred, obs);

    d.unified = det.foreground
                    ? p.w_ld * d.ld + p.w_dd * d.dd + p.w_sd * d.sd + p.w_pdd * d.pdd + p.w_feat * d.featd
                    : p.w_mcd * d.mcd + p.w_id * d.id;
    return d;
}

inline bool gated_out_3d(double unified, const Dissim3dParams& p = {}) { return unified > p.gate; }

inline ScoreMatrix gate3d(const std::vector<TrackView>& tracks, const std::vector<Detection>& dets,
                          const Dissim3dParams& p = {}) {
    ScoreMatrix m(static_cast<Eigen::Index>(tracks.size()), static_cast<Eigen::Index>(dets.size()));
    for (std::size_t r = 0; r < tracks.size(); ++r) {
        m.row_ids[r] = tracks[r].id;
        for (std::size_t c = 0; c < dets.size(); ++c) {
            const double u = dissim3d(tracks[r], dets[c], p).unified;
            m.score(r, c) = u;
            m.gated(r, c) = gated_out_3d(u, p);
        }
    }
    return m;
}

/// Plain IoU similarity; pairs below `iou_gate` are gated out.
inline ScoreMatrix gate_iou(const std::vector<TrackView>& tracks, const std::vector<Detection>& dets,
                            double iou_gate) {
    ScoreMatrix m(static_cast<Eigen::Index>(tracks.size()), static_cast<Eigen::Index>(dets.size()));
    for (std::size_t r = 0; r < tracks.size(); ++r) {
        m.row_ids[r] = tracks[r].id;
        const Box pred = tracks[r].predicted_box();
        for (std::size_t c = 0; c < dets.size(); ++c) {
            const double v = iou(pred, dets[c].box);
            m.score(r, c) = v;
            m.gated(r, c) = v < iou_gate;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Matchers

namespace detail {

inline Matching finish_matching(const ScoreMatrix& m, const std::vector<int>& row_to_col) {
    Matching out;
    std::vector<bool> col_used(static_cast<std::size_t>(m.cols()), false);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const int c = row_to_col[static_cast<std::size_t>(r)];
        if (c >= 0) {
            out.pairs.emplace_back(m.row_ids[static_cast<std::size_t>(r)], c);
            col_used[static_cast<std::size_t>(c)] = true;
        } else {
            out.unmatched_tracks.push_back(m.row_ids[static_cast<std::size_t>(r)]);
        }
    }
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        if (!col_used[static_cast<std::size_t>(c)]) out.unmatched_detections.push_back(static_cast<int>(c));
    return out;
}

/// Square min-cost assignment (Kuhn-Munkres with potentials, O(n^3)).
/// Returns the column assigned to each row.
inline std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

}  // namespace detail

/// Repeatedly takes the globally best ungated entry among free rows/columns.
/// Ties go to the lower track id, then the lower detection index.
inline Matching match_greedy(const ScoreMatrix& m, bool maximize) {
    struct Entry {
        double key;
        int track_id;
        Eigen::Index row, col;
    };
    std::vector<Entry> entries;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            if (!m.gated(r, c))
                entries.push_back({maximize ? -m.score(r, c) : m.score(r, c),
                                   m.row_ids[static_cast<std::size_t>(r)], r, c});
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return std::tie(a.key, a.track_id, a.col) < std::tie(b.key, b.track_id, b.col);
    });
    std::vector<int> row_to_col(static_cast<std::size_t>(m.rows()), -1);
    std::vector<bool> col_used(static_cast<std::size_t>(m.cols()), false);
    for (const auto& e : entries) {
        auto& slot = row_to_col[static_cast<std::size_t>(e.row)];
        if (slot >= 0 || col_used[static_cast<std::size_t>(e.col)]) continue;
        slot = static_cast<int>(e.col);
        col_used[static_cast<std::size_t>(e.col)] = true;
    }
    return detail::finish_matching(m, row_to_col);
}

/// Optimal assignment over ungated entries: the largest possible number of
/// ungated pairs, and among those the minimum total cost (or maximum total
/// score). The matrix is padded square with a sentinel cost that dominates any
/// sum of real entries.
inline Matching match_hungarian(const ScoreMatrix& m, bool maximize) {
    const Eigen::Index rows = m.rows(), cols = m.cols();
    const Eigen::Index n = std::max(rows, cols);
    std::vector<int> row_to_col(static_cast<std::size_t>(rows), -1);
    if (n == 0) return detail::finish_matching(m, row_to_col);

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            if (!m.gated(r, c)) {
                const double v = maximize ? -m.score(r, c) : m.score(r, c);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
    if (lo > hi) return detail::finish_matching(m, row_to_col);  // everything gated

    const double sentinel = (hi - lo + 1.0) * static_cast<double>(n + 1);
    Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(n, n, sentinel);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            if (!m.gated(r, c)) cost(r, c) = (maximize ? -m.score(r, c) : m.score(r, c)) - lo;

    const auto assignment = detail::solve_assignment(cost);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const int c = assignment[static_cast<std::size_t>(r)];
        if (c >= 0 && c < cols && !m.gated(r, c)) row_to_col[static_cast<std::size_t>(r)] = c;
    }
    return detail::finish_matching(m, row_to_col);
}

}  // namespace kfmot
