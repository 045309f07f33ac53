#pragma once

#include "kfmot/association.hpp"
#include "kfmot/defense.hpp"
#include "kfmot/error.hpp"
#include "kfmot/geometry.hpp"
#include "kfmot/kalman.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kfmot {

enum class Matcher { greedy, hungarian };
enum class Scoring { iou, apollo2d, apollo3d };

struct TrackerConfig {
    int dims = 2;
    Matcher matcher = Matcher::hungarian;
    Scoring scoring = Scoring::iou;
    int hit_count = 3;      ///< consecutive matches needed for confirmation
    int reserved_age = 2;   ///< consecutive misses tolerated before destruction
    KfModel kf = KfModel::defaults(2);
    double velocity_init_scale = 10.0;
    std::optional<DefenseConfig> defense;
    double iou_gate = 0.1;
    Sim2dParams sim2d;
    Dissim3dParams dissim3d;

    void validate() const {
        if (dims != 2 && dims != 3) throw InvalidArgument("tracker dims must be 2 or 3");
        if (kf.dims != dims) throw InvalidArgument("KF model dims differ from tracker dims");
        if (hit_count < 1) throw InvalidArgument("hit_count must be >= 1");
        if (reserved_age < 1) throw InvalidArgument("reserved_age must be >= 1");
        if (scoring == Scoring::apollo2d && dims != 2) throw InvalidArgument("apollo2d scoring needs dims=2");
        if (scoring == Scoring::apollo3d && dims != 3) throw InvalidArgument("apollo3d scoring needs dims=3");
        if (!(iou_gate >= 0.0 && iou_gate <= 1.0)) throw InvalidArgument("iou_gate must be in [0,1]");
        if (defense) defense->validate();
    }

    /// jia2d | apollo2d | ab3dmot | apollo3d
    static TrackerConfig profile(std::string_view name) {
        TrackerConfig c;
        if (name == "jia2d") {
            c.dims = 2;
            c.scoring = Scoring::iou;
            c.matcher = Matcher::hungarian;
            c.iou_gate = 0.1;
        } else if (name == "apollo2d") {
            c.dims = 2;
            c.scoring = Scoring::apollo2d;
            c.matcher = Matcher::greedy;
            c.reserved_age = 60;
            c.sim2d.normalized_density = false;
        } else if (name == "ab3dmot") {
            c.dims = 3;
            c.scoring = Scoring::iou;
            c.matcher = Matcher::hungarian;
            c.iou_gate = 0.01;
        } else if (name == "apollo3d") {
            c.dims = 3;
            c.scoring = Scoring::apollo3d;
            c.matcher = Matcher::hungarian;
            c.reserved_age = 60;
        } else {
            throw InvalidArgument("unknown tracker profile: " + std::string(name));
        }
        c.kf = KfModel::defaults(c.dims);
        return c;
    }
};

struct HistoryEntry {
    int frame = 0;
    Eigen::VectorXd center;
    bool matched = false;
};

struct Track {
    int id = 0;
    KfState kf;
    Box latest_box;
    std::optional<Eigen::VectorXd> latest_feature;
    std::optional<int> latest_point_count;
    std::optional<Vec3> latest_mass_center;
    int hits = 0;
    int misses = 0;
    bool confirmed = false;
    std::vector<HistoryEntry> history;
};

struct TrackSnapshot {
    int id = 0;
    Eigen::VectorXd center;
    Eigen::VectorXd velocity;
    Box box;
    bool confirmed = false;
    bool matched = false;
    /// Part of the tracker's published output for this frame.
    bool reported = false;
    int hits = 0;
    int misses = 0;
};

struct FrameResult {
    int frame = 0;
    std::vector<TrackSnapshot> tracks;  ///< every live track after the step
    Matching matching;
    std::vector<int> det_track;         ///< per detection: matched track id or -1
    std::vector<int> born;
    std::vector<int> destroyed;
    std::optional<Eigen::VectorXd> dmax;  ///< clip bound in force, when active
    int clipped_axes = 0;                 ///< residual components actually clipped

    const TrackSnapshot* find(int id) const {
        for (const auto& t : tracks)
            if (t.id == id) return &t;
        return nullptr;
    }
};

/// Kalman-filter multi-object tracker: predict, associate, merge, manage
/// lifecycles; optionally with the deviation-clipping patch on the merge.
class Tracker {
public:
    explicit Tracker(TrackerConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        if (cfg_.defense) buffer_.emplace(cfg_.dims, *cfg_.defense);
    }

    const TrackerConfig& config() const { return cfg_; }
    const std::vector<Track>& tracks() const { return tracks_; }
    const DeviationBuffer* buffer() const { return buffer_ ? &*buffer_ : nullptr; }

    std::vector<Track> confirmed_tracks() const {
        std::vector<Track> out;
        for (const auto& t : tracks_)
            if (t.confirmed) out.push_back(t);
        return out;
    }

    FrameResult step(int frame, std::span<const Detection> dets) {
        if (last_frame_ && frame <= *last_frame_)
            throw NonMonotonicFrame("frame " + std::to_string(frame) + " after " +
                                    std::to_string(*last_frame_));
        for (const auto& d : dets)
            if (dims_of(d.box) != cfg_.dims) throw InvalidArgument("detection dims differ from tracker dims");
        last_frame_ = frame;

        FrameResult res;
        res.frame = frame;

        for (auto& t : tracks_) t.kf = predict(t.kf, cfg_.kf);

        std::vector<TrackView> views;
        views.reserve(tracks_.size());
        for (const auto& t : tracks_) {
            views.push_back({t.id, t.kf.position(), t.kf.velocity(), t.latest_box, t.latest_feature,
                             t.latest_point_count, t.latest_mass_center});
        }
        const std::vector<Detection> det_vec(dets.begin(), dets.end());
        res.matching = associate(views, det_vec);

        if (buffer_) res.dmax = buffer_->threshold_vector();

        res.det_track.assign(dets.size(), -1);
        std::vector<bool> matched(tracks_.size(), false);
        std::vector<Eigen::VectorXd> residuals;
        for (const auto& [tid, di] : res.matching.pairs) {
            const auto ti = index_of(tid);
            Track& t = tracks_[ti];
            const Detection& d = dets[static_cast<std::size_t>(di)];
            const Eigen::VectorXd z = center_of(d.box);
            const Eigen::VectorXd raw = residual(t.kf, z, cfg_.kf);
            if (buffer_) residuals.push_back(raw);

            Modulation mod;
            if (res.dmax && (t.confirmed || cfg_.defense->modulate_provisional)) {
                const Eigen::VectorXd bound = *res.dmax;
                for (Eigen::Index i = 0; i < raw.size(); ++i)
                    if (std::abs(raw[i]) > bound[i]) ++res.clipped_axes;
                mod = [bound](const Eigen::VectorXd& delta) { return modulate(delta, bound); };
            }
            t.kf = update(t.kf, z, cfg_.kf, mod);
            t.latest_box = d.box;
            t.latest_feature = d.feature;
            t.latest_point_count = d.point_count;
            t.latest_mass_center = d.mass_center;
            t.hits += 1;
            t.misses = 0;
            if (t.hits >= cfg_.hit_count) t.confirmed = true;
            matched[ti] = true;
            res.det_track[static_cast<std::size_t>(di)] = tid;
        }

        for (std::size_t i = 0; i < tracks_.size(); ++i) {
            if (matched[i]) continue;
            tracks_[i].misses += 1;
            tracks_[i].hits = 0;
        }
        for (std::size_t i = 0; i < tracks_.size(); ++i) {
            Track& t = tracks_[i];
            t.history.push_back({frame, t.kf.position(), matched[i]});
        }
        std::erase_if(tracks_, [&](const Track& t) {
            if (t.misses > cfg_.reserved_age) {
                res.destroyed.push_back(t.id);
                return true;
            }
            return false;
        });

        for (int di : res.matching.unmatched_detections) {
            const Detection& d = dets[static_cast<std::size_t>(di)];
            Track t;
            t.id = next_id_++;
            t.kf = initial_state(center_of(d.box), cfg_.kf, cfg_.velocity_init_scale);
            t.latest_box = d.box;
            t.latest_feature = d.feature;
            t.latest_point_count = d.point_count;
            t.latest_mass_center = d.mass_center;
            t.hits = 1;
            t.confirmed = t.hits >= cfg_.hit_count;
            t.history.push_back({frame, t.kf.position(), true});
            res.born.push_back(t.id);
            res.det_track[static_cast<std::size_t>(di)] = t.id;
            tracks_.push_back(std::move(t));
        }

        if (buffer_) {
            for (const auto& r : residuals) buffer_->record(r);
            buffer_->trim();
        }

        ++steps_;
        const bool grace = steps_ <= cfg_.hit_count;
        for (const auto& t : tracks_) {
            const bool m = t.misses == 0;
            res.tracks.push_back({t.id, t.kf.position(), t.kf.velocity(),
                                  recentered(t.latest_box, t.kf.position()), t.confirmed, m,
                                  (t.confirmed || grace) && m, t.hits, t.misses});
        }
        return res;
    }

private:
    Matching associate(const std::vector<TrackView>& views, const std::vector<Detection>& dets) const {
        ScoreMatrix m;
        bool maximize = true;
        switch (cfg_.scoring) {
        case Scoring::iou: m = gate_iou(views, dets, cfg_.iou_gate); break;
        case Scoring::apollo2d: m = gate2d(views, dets, cfg_.sim2d); break;
        case Scoring::apollo3d:
            m = gate3d(views, dets, cfg_.dissim3d);
            maximize = false;
            break;
        }
        return cfg_.matcher == Matcher::greedy ? match_greedy(m, maximize) : match_hungarian(m, maximize);
    }

    std::size_t index_of(int id) const {
        for (std::size_t i = 0; i < tracks_.size(); ++i)
            if (tracks_[i].id == id) return i;
        throw Error("internal: unknown track id");
    }

    TrackerConfig cfg_;
    std::vector<Track> tracks_;
    std::optional<DeviationBuffer> buffer_;
    std::optional<int> last_frame_;
    int next_id_ = 0;
    int steps_ = 0;
};

/// Runs a fresh tracker over consecutive frames 0..n-1.
inline std::vector<FrameResult> run_trace(const TrackerConfig& cfg, const DetectionFrames& frames) {
    Tracker tracker(cfg);
    std::vector<FrameResult> out;
    out.reserve(frames.size());
    for (std::size_t f = 0; f < frames.size(); ++f) out.push_back(tracker.step(static_cast<int>(f), frames[f]));
    return out;
}

struct TrajectoryPoint {
    int frame = 0;
    Eigen::VectorXd center;
    bool matched = false;
};

/// Per-frame estimated centers of one track id, from a run's results.
inline std::vector<TrajectoryPoint> trajectory_of(const std::vector<FrameResult>& run, int track_id) {
    std::vector<TrajectoryPoint> out;
    for (const auto& fr : run)
        if (const auto* s = fr.find(track_id)) out.push_back({fr.frame, s->center, s->matched});
    return out;
}

}  // namespace kfmot
