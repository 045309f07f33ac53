#pragma once

#include "kfmot/error.hpp"
#include "kfmot/geometry.hpp"
#include "kfmot/trace.hpp"
#include "kfmot/tracker.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace kfmot {

struct Shift {
    Eigen::VectorXd offset;
};
struct Hide {};

using AttackOp = std::variant<Shift, Hide>;

/// Shift/hide schedule against one ground-truth object. A frame carries at
/// most one operation.
struct AttackPlan {
    int target_object = -1;
    std::map<int, AttackOp> schedule;
    Eigen::VectorXd v_atk;
    double lambda = 0.0;
    double s_ratio = 0.0, h_ratio = 0.0, r_ratio = 0.0;

    int shift_count() const {
        return static_cast<int>(std::count_if(schedule.begin(), schedule.end(),
                                              [](const auto& kv) { return std::holds_alternative<Shift>(kv.second); }));
    }
    int hide_count() const { return static_cast<int>(schedule.size()) - shift_count(); }
    std::optional<int> first_frame() const {
        if (schedule.empty()) return std::nullopt;
        return schedule.begin()->first;
    }
};

struct AppliedOp {
    int frame = 0;
    AttackOp op;
};

struct PerturbedTrace {
    DetectionFrames frames;
    std::vector<AppliedOp> applied;
};

/// Applies every scheduled operation to the target's detection only.
inline PerturbedTrace apply_plan(const DetectionFrames& frames, const std::vector<GtTrack>& gt,
                                 const AttackPlan& plan) {
    PerturbedTrace out{frames, {}};
    if (plan.schedule.empty()) return out;
    const GtTrack* target = nullptr;
    for (const auto& g : gt)
        if (g.id == plan.target_object) target = &g;
    for (const auto& [frame, op] : plan.schedule) {
        if (frame < 0 || frame >= static_cast<int>(frames.size()))
            throw InvalidArgument("attack frame " + std::to_string(frame) + " outside the trace");
        auto& dets = out.frames[static_cast<std::size_t>(frame)];
        const int idx = find_source(dets, plan.target_object);
        if (idx < 0 || (target && !target->at(frame)))
            throw TargetAbsent("target " + std::to_string(plan.target_object) + " has no detection in frame " +
                               std::to_string(frame));
        if (const auto* s = std::get_if<Shift>(&op)) {
            if (!s->offset.allFinite()) throw InvalidArgument("non-finite shift offset");
            auto& d = dets[static_cast<std::size_t>(idx)];
            d.box = translated(d.box, s->offset);
            if (d.mass_center) d.mass_center->head(std::min<Eigen::Index>(3, s->offset.size())) +=
                s->offset.head(std::min<Eigen::Index>(3, s->offset.size()));
        } else {
            dets.erase(dets.begin() + idx);
        }
        out.applied.push_back({frame, op});
    }
    return out;
}

/// Unit direction orthogonal to the target's ground-truth motion. 2D traces
/// use the horizontal image axis.
inline Eigen::VectorXd lateral_direction(const GtTrack& g, int dims) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dims);
    if (dims == 2 || g.frames.size() < 2) {
        v[0] = 1.0;
        return v;
    }
    const Eigen::VectorXd d = g.frames.back().center() - g.frames.front().center();
    const Vec2 motion{d[0], d[1]};
    if (motion.norm() < 1e-9) {
        const auto& b = std::get<BBox3D>(g.frames.front().box);
        v[0] = -std::sin(b.yaw);
        v[1] = std::cos(b.yaw);
        return v;
    }
    v[0] = -motion.y() / motion.norm();
    v[1] = motion.x() / motion.norm();
    return v;
}

/// Track id the tracker assigned to the target's detection at `frame`, or -1.
inline int target_track_at(const std::vector<FrameResult>& run, const DetectionFrames& frames, int target,
                           int frame) {
    if (frame < 0 || frame >= static_cast<int>(run.size())) return -1;
    const int idx = find_source(frames[static_cast<std::size_t>(frame)], target);
    if (idx < 0) return -1;
    return run[static_cast<std::size_t>(frame)].det_track[static_cast<std::size_t>(idx)];
}

namespace detail {

/// Black-box probe: does the target's box, shifted by `lambda * v` at `frame`,
/// still land on the track that carried it in the previous frame?
inline bool shifted_box_matches(const DetectionFrames& frames, int target, const Eigen::VectorXd& v,
                                int frame, double lambda, const TrackerConfig& cfg) {
    DetectionFrames probe(frames.begin(), frames.begin() + frame + 1);
    auto& dets = probe[static_cast<std::size_t>(frame)];
    const int idx = find_source(dets, target);
    if (idx < 0) throw TargetAbsent("target absent at the probe frame");
    dets[static_cast<std::size_t>(idx)].box = translated(dets[static_cast<std::size_t>(idx)].box, lambda * v);
    const auto run = run_trace(cfg, probe);
    const int before = target_track_at(run, probe, target, frame - 1);
    if (before < 0) return false;
    const int after = run.back().det_track[static_cast<std::size_t>(idx)];
    const auto* snap = run.back().find(before);
    return after == before && snap && snap->confirmed;
}

}  // namespace detail

/// Largest lambda in (0, lambda_hi] for which the shifted box still associates
/// with the target's track, to a tolerance of lambda_hi / 2^iters. Uses only
/// tracker outputs.
inline double binary_search_lambda(const DetectionFrames& frames, int target, const Eigen::VectorXd& v_atk,
                                   int frame, const TrackerConfig& cfg, double lambda_hi, int iters = 20) {
    if (!(lambda_hi > 0.0)) throw InvalidArgument("lambda_hi must be positive");
    if (iters < 1) throw InvalidArgument("iters must be >= 1");
    if (frame < 1 || frame >= static_cast<int>(frames.size())) throw InvalidArgument("attack frame out of range");
    const double tol = lambda_hi / std::ldexp(1.0, iters);
    if (!detail::shifted_box_matches(frames, target, v_atk, frame, tol, cfg))
        throw NoFeasibleLambda("even the smallest shift breaks association at frame " + std::to_string(frame));
    if (detail::shifted_box_matches(frames, target, v_atk, frame, lambda_hi, cfg)) return lambda_hi;
    double lo = tol, hi = lambda_hi;
    for (int i = 0; i < iters; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (detail::shifted_box_matches(frames, target, v_atk, frame, mid, cfg)) lo = mid;
        else hi = mid;
    }
    return lo;
}

/// Default search bound: four times the target's extent along the direction.
inline double default_lambda_hi(const DetectionFrames& frames, int target, int frame, const Eigen::VectorXd& v) {
    const auto& dets = frames.at(static_cast<std::size_t>(frame));
    const int idx = find_source(dets, target);
    if (idx < 0) throw TargetAbsent("target absent at frame " + std::to_string(frame));
    return 4.0 * extent_along(dets[static_cast<std::size_t>(idx)].box, v);
}

struct PocOptions {
    int hide_frames = 5;
    std::optional<int> attack_frame;  ///< default: middle of the target's life
    std::optional<double> lambda;     ///< skip the search when given
    std::optional<double> lambda_hi;
    int iters = 20;
};

/// One shift frame at the largest still-associated lambda, then hide frames.
inline std::pair<AttackPlan, PerturbedTrace> poc_two_phase(const DetectionFrames& frames,
                                                           const std::vector<GtTrack>& gt, int target,
                                                           const Eigen::VectorXd& v_atk, const TrackerConfig& cfg,
                                                           const PocOptions& opt = {}) {
    const GtTrack* g = nullptr;
    for (const auto& t : gt)
        if (t.id == target) g = &t;
    if (!g) throw TargetAbsent("no ground truth for target " + std::to_string(target));
    const int frame = opt.attack_frame.value_or((g->first_frame() + g->last_frame()) / 2);

    AttackPlan plan;
    plan.target_object = target;
    plan.v_atk = v_atk;
    if (opt.lambda) {
        plan.lambda = *opt.lambda;
    } else {
        const double hi = opt.lambda_hi.value_or(default_lambda_hi(frames, target, frame, v_atk));
        plan.lambda = binary_search_lambda(frames, target, v_atk, frame, cfg, hi, opt.iters);
    }
    plan.schedule[frame] = Shift{plan.lambda * v_atk};
    int hides = 0;
    for (int f = frame + 1; f < static_cast<int>(frames.size()) && hides < opt.hide_frames; ++f, ++hides) {
        if (find_source(frames[static_cast<std::size_t>(f)], target) < 0) break;
        plan.schedule[f] = Hide{};
    }
    const double life = static_cast<double>(g->frames.size());
    plan.s_ratio = 1.0 / life;
    plan.h_ratio = hides / life;
    plan.r_ratio = plan.s_ratio + plan.h_ratio;
    auto perturbed = apply_plan(frames, gt, plan);
    return {std::move(plan), std::move(perturbed)};
}

enum class Layout { optimal, uniform, random, hide_first };

inline const char* to_string(Layout l) {
    switch (l) {
    case Layout::optimal: return "optimal";
    case Layout::uniform: return "uniform";
    case Layout::random: return "random";
    case Layout::hide_first: return "hide_first";
    }
    return "?";
}

inline Layout layout_from_string(const std::string& s) {
    if (s == "optimal") return Layout::optimal;
    if (s == "uniform") return Layout::uniform;
    if (s == "random") return Layout::random;
    if (s == "hide_first") return Layout::hide_first;
    throw InvalidArgument("unknown layout: " + s);
}

/// Shift/hide schedule over frames [0, T). `optimal` puts a contiguous shift
/// block right before a terminal hide block; `hide_first` swaps the blocks;
/// `uniform` spreads the attack frames evenly; `random` samples them.
inline AttackPlan generalized_plan(int T, double s_ratio, double h_ratio, double lambda,
                                   const Eigen::VectorXd& v_atk, Layout layout, std::uint64_t seed = 0) {
    if (T <= 0) throw InvalidArgument("T must be positive");
    if (s_ratio < 0 || h_ratio < 0 || s_ratio + h_ratio > 1.0 + 1e-12)
        throw InvalidArgument("need s_ratio, h_ratio >= 0 and s_ratio + h_ratio <= 1");
    const int ns = static_cast<int>(std::lround(s_ratio * T));
    const int nh = std::min(T - ns, static_cast<int>(std::lround(h_ratio * T)));
    AttackPlan plan;
    plan.v_atk = v_atk;
    plan.lambda = lambda;
    plan.s_ratio = s_ratio;
    plan.h_ratio = h_ratio;
    plan.r_ratio = s_ratio + h_ratio;
    const Shift shift{lambda * v_atk};
    switch (layout) {
    case Layout::optimal:
        for (int f = T - nh - ns; f < T - nh; ++f) plan.schedule[f] = shift;
        for (int f = T - nh; f < T; ++f) plan.schedule[f] = Hide{};
        break;
    case Layout::hide_first:
        for (int f = T - nh - ns; f < T - ns; ++f) plan.schedule[f] = Hide{};
        for (int f = T - ns; f < T; ++f) plan.schedule[f] = shift;
        break;
    case Layout::uniform: {
        const int n = ns + nh;
        for (int i = 0; i < n; ++i) {
            const int f = static_cast<int>((i + 0.5) * T / n);
            const bool is_shift = (static_cast<long>(i + 1) * ns) / n > (static_cast<long>(i) * ns) / n;
            if (is_shift) plan.schedule[f] = shift;
            else plan.schedule[f] = Hide{};
        }
        break;
    }
    case Layout::random: {
        std::vector<int> all(static_cast<std::size_t>(T));
        std::iota(all.begin(), all.end(), 0);
        std::mt19937_64 rng(seed);
        std::shuffle(all.begin(), all.end(), rng);
        for (int i = 0; i < ns; ++i) plan.schedule[all[static_cast<std::size_t>(i)]] = shift;
        for (int i = ns; i < ns + nh; ++i) plan.schedule[all[static_cast<std::size_t>(i)]] = Hide{};
        break;
    }
    }
    return plan;
}

/// Moves every scheduled frame by `offset`.
inline AttackPlan offset_schedule(AttackPlan plan, int offset) {
    std::map<int, AttackOp> moved;
    for (auto& [f, op] : plan.schedule) moved.emplace(f + offset, std::move(op));
    plan.schedule = std::move(moved);
    return plan;
}

// ---------------------------------------------------------------------------
// Plain-text replay format:
//   target <id>
//   lambda <value>
//   direction <v0> <v1> [<v2>]
//   ratios <s> <h> <r>
//   <frame> shift <dx> <dy> [<dz>]
//   <frame> hide

inline std::string write_plan(const AttackPlan& plan) {
    auto num = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::string s = "# kfmot attack plan\n";
    s += "target " + std::to_string(plan.target_object) + "\n";
    s += "lambda " + num(plan.lambda) + "\n";
    s += "direction";
    for (Eigen::Index i = 0; i < plan.v_atk.size(); ++i) s += " " + num(plan.v_atk[i]);
    s += "\nratios " + num(plan.s_ratio) + " " + num(plan.h_ratio) + " " + num(plan.r_ratio) + "\n";
    for (const auto& [f, op] : plan.schedule) {
        s += std::to_string(f);
        if (const auto* sh = std::get_if<Shift>(&op)) {
            s += " shift";
            for (Eigen::Index i = 0; i < sh->offset.size(); ++i) s += " " + num(sh->offset[i]);
        } else {
            s += " hide";
        }
        s += "\n";
    }
    return s;
}

inline AttackPlan read_plan(std::istream& in) {
    AttackPlan plan;
    std::string line;
    std::size_t line_no = 0;
    auto read_vec = [](std::istringstream& is) {
        std::vector<double> xs;
        double v;
        while (is >> v) xs.push_back(v);
        return Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size())).eval();
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        std::string head;
        is >> head;
        if (head == "target") is >> plan.target_object;
        else if (head == "lambda") is >> plan.lambda;
        else if (head == "direction") plan.v_atk = read_vec(is);
        else if (head == "ratios") is >> plan.s_ratio >> plan.h_ratio >> plan.r_ratio;
        else {
            int frame = 0;
            try {
                frame = std::stoi(head);
            } catch (const std::exception&) {
                throw MalformedRow(line_no, "unknown plan entry: " + head);
            }
            std::string op;
            is >> op;
            if (op == "hide") plan.schedule[frame] = Hide{};
            else if (op == "shift") plan.schedule[frame] = Shift{read_vec(is)};
            else throw MalformedRow(line_no, "unknown attack op: " + op);
        }
        if (is.fail() && !is.eof()) throw MalformedRow(line_no, "bad plan line");
    }
    return plan;
}

}  // namespace kfmot
