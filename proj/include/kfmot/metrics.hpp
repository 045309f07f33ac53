#pragma once

#include "kfmot/association.hpp"
#include "kfmot/attack.hpp"
#include "kfmot/error.hpp"
#include "kfmot/geometry.hpp"
#include "kfmot/trace.hpp"
#include "kfmot/tracker.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace kfmot {

/// One published track box in one frame.
struct PredBox {
    int id = 0;
    Box box;
};

/// Published boxes per frame index.
using Predictions = std::vector<std::vector<PredBox>>;

/// Boxes the tracker reported in each frame.
inline Predictions predictions_from(const std::vector<FrameResult>& run) {
    Predictions out(run.size());
    for (std::size_t f = 0; f < run.size(); ++f)
        for (const auto& s : run[f].tracks)
            if (s.reported) out[f].push_back({s.id, s.box});
    return out;
}

struct GtBox {
    int id = 0;
    Box box;
};

/// Ground-truth boxes present at `frame`.
inline std::vector<GtBox> gt_at(const std::vector<GtTrack>& gt, int frame) {
    std::vector<GtBox> out;
    for (const auto& g : gt)
        if (const auto* e = g.at(frame)) out.push_back({g.id, e->box});
    return out;
}

struct ClearOptions {
    /// 3D: largest center distance accepted (meters). 2D: smallest IoU accepted.
    double threshold = 1.0;

    static ClearOptions defaults(int dims) { return dims == 2 ? ClearOptions{0.5} : ClearOptions{1.0}; }
};

struct FramePair {
    int gt_id = 0;
    int pred_id = 0;
    double distance = 0;  ///< center distance
    double overlap = 0;   ///< IoU
};

struct FrameCorrespondence {
    std::vector<FramePair> pairs;
    int misses = 0;
    int false_positives = 0;
    int mismatches = 0;
    int gt_count = 0;
};

/// Correspondence state carried between frames: last predicted id per GT id.
using ClearState = std::map<int, int>;

namespace detail {

inline bool accepts(const Box& p, const Box& g, const ClearOptions& opt, double& dist, double& ov) {
    dist = (center_of(p) - center_of(g)).norm();
    ov = iou(p, g);
    if (dims_of(g) == 2) return ov >= opt.threshold;
    return dist <= opt.threshold;
}

}  // namespace detail

/// Matches one frame's predictions to ground truth. Correspondences from the
/// previous frame are kept while still valid; the rest are assigned by
/// minimum distance. A mismatch is counted whenever a GT object is matched to
/// a different predicted id than the one it was last matched to.
inline FrameCorrespondence match_frame_gt(const std::vector<PredBox>& preds, const std::vector<GtBox>& gts,
                                          const ClearOptions& opt, ClearState& state) {
    FrameCorrespondence out;
    out.gt_count = static_cast<int>(gts.size());
    std::vector<bool> gt_used(gts.size(), false), pred_used(preds.size(), false);

    auto pred_index = [&](int id) -> int {
        for (std::size_t j = 0; j < preds.size(); ++j)
            if (preds[j].id == id) return static_cast<int>(j);
        return -1;
    };

    for (std::size_t i = 0; i < gts.size(); ++i) {
        const auto it = state.find(gts[i].id);
        if (it == state.end()) continue;
        const int j = pred_index(it->second);
        if (j < 0 || pred_used[static_cast<std::size_t>(j)]) continue;
        double d = 0, ov = 0;
        if (!detail::accepts(preds[static_cast<std::size_t>(j)].box, gts[i].box, opt, d, ov)) continue;
        gt_used[i] = pred_used[static_cast<std::size_t>(j)] = true;
        out.pairs.push_back({gts[i].id, it->second, d, ov});
    }

    std::vector<std::size_t> gi, pj;
    for (std::size_t i = 0; i < gts.size(); ++i)
        if (!gt_used[i]) gi.push_back(i);
    for (std::size_t j = 0; j < preds.size(); ++j)
        if (!pred_used[j]) pj.push_back(j);
    if (!gi.empty() && !pj.empty()) {
        ScoreMatrix m(static_cast<Eigen::Index>(gi.size()), static_cast<Eigen::Index>(pj.size()));
        std::vector<std::pair<double, double>> dv(gi.size() * pj.size());
        for (std::size_t a = 0; a < gi.size(); ++a) {
            for (std::size_t b = 0; b < pj.size(); ++b) {
                double d = 0, ov = 0;
                const bool ok = detail::accepts(preds[pj[b]].box, gts[gi[a]].box, opt, d, ov);
                const auto r = static_cast<Eigen::Index>(a), c = static_cast<Eigen::Index>(b);
                m.score(r, c) = dims_of(gts[gi[a]].box) == 2 ? 1.0 - ov : d;
                m.gated(r, c) = !ok;
                dv[a * pj.size() + b] = {d, ov};
            }
        }
        const Matching mm = match_hungarian(m, false);
        for (const auto& [row, col] : mm.pairs) {
            const auto a = static_cast<std::size_t>(row), b = static_cast<std::size_t>(col);
            gt_used[gi[a]] = pred_used[pj[b]] = true;
            const auto [d, ov] = dv[a * pj.size() + b];
            out.pairs.push_back({gts[gi[a]].id, preds[pj[b]].id, d, ov});
        }
    }

    for (const auto& p : out.pairs) {
        const auto it = state.find(p.gt_id);
        if (it != state.end() && it->second != p.pred_id) ++out.mismatches;
        state[p.gt_id] = p.pred_id;
    }
    out.misses = static_cast<int>(std::count(gt_used.begin(), gt_used.end(), false));
    out.false_positives = static_cast<int>(std::count(pred_used.begin(), pred_used.end(), false));
    return out;
}

struct ClearReport {
    double motp = 0;       ///< mean matched center distance (lower is better)
    double motp_norm = 0;  ///< 3D: 1 - motp / threshold; 2D: mean matched IoU
    double mota = 0;
    double precision = 0, recall = 0, f1 = 0;
    double mt = 0, ml = 0;
    double sum_d = 0;
    long sum_c = 0, sum_m = 0, sum_fp = 0, sum_mme = 0, sum_g = 0;
    int gt_tracks = 0;
};

/// CLEAR metrics over frames 0..n-1 where n covers both inputs.
inline ClearReport clear(const Predictions& preds, const std::vector<GtTrack>& gt, const ClearOptions& opt = {}) {
    int n = static_cast<int>(preds.size());
    for (const auto& g : gt) n = std::max(n, g.last_frame() + 1);
    ClearReport r;
    ClearState state;
    std::map<int, std::map<int, int>> cover;  // gt id -> pred id -> frames
    double sum_ov = 0;
    for (int f = 0; f < n; ++f) {
        static const std::vector<PredBox> none;
        const auto& p = f < static_cast<int>(preds.size()) ? preds[static_cast<std::size_t>(f)] : none;
        const auto fc = match_frame_gt(p, gt_at(gt, f), opt, state);
        r.sum_g += fc.gt_count;
        r.sum_m += fc.misses;
        r.sum_fp += fc.false_positives;
        r.sum_mme += fc.mismatches;
        r.sum_c += static_cast<long>(fc.pairs.size());
        for (const auto& pr : fc.pairs) {
            r.sum_d += pr.distance;
            sum_ov += pr.overlap;
            ++cover[pr.gt_id][pr.pred_id];
        }
    }
    if (r.sum_g == 0) throw EmptyGroundTruth("no ground-truth objects in any frame");

    r.motp = r.sum_c > 0 ? r.sum_d / static_cast<double>(r.sum_c) : 0.0;
    const bool two_d = !gt.empty() && !gt.front().frames.empty() && dims_of(gt.front().frames.front().box) == 2;
    if (r.sum_c > 0) r.motp_norm = two_d ? sum_ov / static_cast<double>(r.sum_c) : 1.0 - r.motp / opt.threshold;
    r.mota = 1.0 - static_cast<double>(r.sum_m + r.sum_fp + r.sum_mme) / static_cast<double>(r.sum_g);
    r.precision = r.sum_c + r.sum_fp > 0 ? static_cast<double>(r.sum_c) / static_cast<double>(r.sum_c + r.sum_fp) : 0.0;
    r.recall = static_cast<double>(r.sum_c) / static_cast<double>(r.sum_g);
    r.f1 = r.precision + r.recall > 0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;

    int mt = 0, ml = 0, counted = 0;
    for (const auto& g : gt) {
        if (g.frames.empty()) continue;
        ++counted;
        const double life = static_cast<double>(g.frames.size());
        int best = 0, total = 0;
        if (const auto it = cover.find(g.id); it != cover.end()) {
            for (const auto& [pid, c] : it->second) {
                best = std::max(best, c);
                total += c;
            }
        }
        if (best >= 0.8 * life) ++mt;
        if (total <= 0.2 * life) ++ml;
    }
    r.gt_tracks = counted;
    r.mt = static_cast<double>(mt) / counted;
    r.ml = static_cast<double>(ml) / counted;
    return r;
}

// ---------------------------------------------------------------------------
// Adversarial metrics

struct FalseDeviation {
    double max = 0;
    double avg = 0;
    int frames = 0;
};

/// Gap between perceived and true centers projected on `axis`, over the
/// frames both exist.
inline FalseDeviation false_deviation(const std::vector<TrajectoryPoint>& perceived, const GtTrack& gt,
                                      const Eigen::VectorXd& axis) {
    FalseDeviation fd;
    double sum = 0;
    for (const auto& p : perceived) {
        const auto* g = gt.at(p.frame);
        if (!g) continue;
        const Eigen::VectorXd c = g->center();
        if (c.size() != p.center.size() || axis.size() != c.size())
            throw InvalidArgument("false_deviation: dimension mismatch");
        const double d = std::abs((p.center - c).dot(axis));
        fd.max = std::max(fd.max, d);
        sum += d;
        ++fd.frames;
    }
    if (fd.frames == 0) throw NoOverlap("perceived and ground-truth trajectories share no frame");
    fd.avg = sum / fd.frames;
    return fd;
}

/// Track id that carried the target when it was last detected before or at
/// `frame`, or -1.
inline int original_track_id(const std::vector<FrameResult>& run, const DetectionFrames& frames, int target,
                             int frame) {
    for (int f = std::min(frame, static_cast<int>(run.size()) - 1); f >= 0; --f) {
        const int id = target_track_at(run, frames, target, f);
        if (id >= 0) return id;
    }
    return -1;
}

/// Frames in which the target exists but its track `track_id` is unmatched or
/// gone, counted from the track's first frame.
inline int unmatched_frames(const std::vector<FrameResult>& run, const GtTrack& gt, int track_id) {
    int first = -1;
    for (const auto& fr : run)
        if (fr.find(track_id)) {
            first = fr.frame;
            break;
        }
    if (first < 0) throw NoTarget("track " + std::to_string(track_id) + " never appears");
    int n = 0;
    for (const auto& fr : run) {
        if (fr.frame < first || !gt.at(fr.frame)) continue;
        const auto* s = fr.find(track_id);
        if (!s || !s->matched) ++n;
    }
    return n;
}

/// Extra unmatched frames of the target's track caused by the attack.
inline int lost_frames(const std::vector<FrameResult>& attacked, const DetectionFrames& attacked_frames,
                       const std::vector<FrameResult>& baseline, const DetectionFrames& baseline_frames,
                       const GtTrack& gt, int attack_frame) {
    const int a = original_track_id(attacked, attacked_frames, gt.id, attack_frame - 1);
    const int b = original_track_id(baseline, baseline_frames, gt.id, attack_frame - 1);
    if (a < 0 || b < 0) throw NoTarget("target " + std::to_string(gt.id) + " was never tracked");
    return unmatched_frames(attacked, gt, a) - unmatched_frames(baseline, gt, b);
}

struct SafetyScenario {
    const char* name;
    double d_max;  ///< meters
};

inline constexpr std::array<SafetyScenario, 4> kSafetyScenarios{{
    {"off-road-local", 0.895},
    {"off-road-highway", 1.945},
    {"wrong-way-local", 2.405},
    {"wrong-way-highway", 2.855},
}};

/// Breach flag per scenario: fd_max above the scenario's tolerable deviation.
inline std::map<std::string, bool> safety_verdicts(double fd_max, Units units) {
    if (units != Units::meters) throw UnitsMismatch("safety thresholds are in meters");
    std::map<std::string, bool> out;
    for (const auto& s : kSafetyScenarios) out[s.name] = fd_max > s.d_max;
    return out;
}

struct AdvReport {
    double fd_max = 0, fd_avg = 0;
    double lf_max = 0, lf_avg = 0;
    std::map<std::string, bool> verdicts;
};

/// Aggregates per-trace (FD, LF) into max/avg figures.
inline AdvReport aggregate(const std::vector<FalseDeviation>& fds, const std::vector<int>& lfs,
                           std::optional<Units> units = std::nullopt) {
    AdvReport r;
    if (!fds.empty()) {
        double s = 0;
        for (const auto& f : fds) {
            r.fd_max = std::max(r.fd_max, f.max);
            s += f.avg;
        }
        r.fd_avg = s / static_cast<double>(fds.size());
    }
    if (!lfs.empty()) {
        double s = 0;
        r.lf_max = -std::numeric_limits<double>::infinity();
        for (int l : lfs) {
            r.lf_max = std::max(r.lf_max, static_cast<double>(l));
            s += l;
        }
        r.lf_avg = s / static_cast<double>(lfs.size());
    }
    if (units == Units::meters) r.verdicts = safety_verdicts(r.fd_max, Units::meters);
    return r;
}

}  // namespace kfmot
