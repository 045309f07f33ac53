#pragma once

#include "kfmot/attack.hpp"
#include "kfmot/config.hpp"
#include "kfmot/error.hpp"
#include "kfmot/kitti_io.hpp"
#include "kfmot/metrics.hpp"
#include "kfmot/theory.hpp"
#include "kfmot/tracker.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kfmot {

/// Traces named by the input settings. Synthetic traces get per-trace seeds
/// derived from the master seed.
inline std::vector<Trace> load_traces(const ExperimentConfig& cfg) {
    std::vector<Trace> out;
    const int dims = cfg.dims();
    if (cfg.input.kind == "kitti") {
        if (!std::filesystem::is_directory(cfg.input.kitti_dir))
            throw InvalidArgument("input directory not found: " + cfg.input.kitti_dir);
        out = read_label_dir(cfg.input.kitti_dir, ParseOptions{cfg.input.classes, dims});
        if (out.empty()) throw InvalidArgument("no label files in " + cfg.input.kitti_dir);
        return out;
    }
    for (int i = 0; i < cfg.input.traces; ++i) {
        SceneSpec s;
        s.dims = dims;
        s.objects = cfg.input.objects;
        s.frames = cfg.input.frames;
        s.noise_sigma = cfg.input.noise_sigma;
        s.seed = trial_seed(cfg.seed, static_cast<std::uint64_t>(i));
        Trace t = synth(random_scene(s));
        t.name = "synth-" + std::to_string(i);
        out.push_back(std::move(t));
    }
    return out;
}

inline ClearOptions clear_options(const ExperimentConfig& cfg) {
    ClearOptions o = ClearOptions::defaults(cfg.dims());
    if (cfg.clear_threshold) o.threshold = *cfg.clear_threshold;
    return o;
}

/// Requested target when present, otherwise the longest-lived object.
inline const GtTrack& choose_target(const Trace& t, int wanted) {
    if (const auto* g = t.gt_track(wanted)) return *g;
    if (t.gt.empty()) throw NoTarget("trace " + t.name + " has no ground truth");
    return *std::max_element(t.gt.begin(), t.gt.end(),
                             [](const GtTrack& a, const GtTrack& b) { return a.frames.size() < b.frames.size(); });
}

struct ModeOutcome {
    std::string mode;
    FalseDeviation fd;
    int lf = 0;
    int track_id = -1;
    std::optional<double> dmax_along;  ///< clip bound along the attack direction at the attack frame
    std::vector<TrajectoryPoint> perceived;
};

struct AttackOutcome {
    std::string trace;
    int target = -1;
    int attack_frame = -1;
    AttackPlan plan;
    std::vector<ModeOutcome> modes;
    std::vector<TrajectoryPoint> truth;
};

struct NamedTracker {
    std::string mode;
    TrackerConfig cfg;
};

/// Lateral shifts of alternating sign on the frames right before the attack.
inline AttackPlan poison_plan(const Trace& t, const GtTrack& g, const Eigen::VectorXd& v, int attack_frame,
                              const PoisonSettings& p) {
    AttackPlan plan;
    plan.target_object = g.id;
    plan.v_atk = v;
    if (!p.enabled) return plan;
    int sign = 1;
    for (int f = std::max(g.first_frame() + 1, attack_frame - 1 - p.frames); f < attack_frame - 1; ++f) {
        if (find_source(t.frames[static_cast<std::size_t>(f)], g.id) < 0) continue;
        plan.schedule[f] = Shift{sign * p.magnitude * v};
        sign = -sign;
    }
    return plan;
}

/// Plans the attack black-box against `reference`, then replays the same
/// plan against every tracker in `modes`.
inline AttackOutcome attack_trace(const Trace& t, const AttackSettings& a, const TrackerConfig& reference,
                                  const std::vector<NamedTracker>& modes) {
    const GtTrack& g = choose_target(t, a.target);
    const Eigen::VectorXd v = lateral_direction(g, t.dims);
    AttackOutcome out;
    out.trace = t.name;
    out.target = g.id;
    out.attack_frame = a.attack_frame >= 0 ? a.attack_frame : (g.first_frame() + g.last_frame()) / 2;
    for (const auto& e : g.frames) out.truth.push_back({e.frame, e.center(), true});

    AttackPlan plan = poison_plan(t, g, v, out.attack_frame, a.poison);
    plan.target_object = g.id;
    plan.v_atk = v;
    if (a.enabled) {
        const DetectionFrames poisoned = apply_plan(t.frames, t.gt, plan).frames;
        PocOptions opt;
        opt.hide_frames = a.hide_frames;
        opt.attack_frame = out.attack_frame;
        if (a.lambda >= 0) opt.lambda = a.lambda;
        if (a.lambda_hi > 0) opt.lambda_hi = a.lambda_hi;
        opt.iters = a.iters;
        auto [poc, unused] = poc_two_phase(poisoned, t.gt, g.id, v, reference, opt);
        (void)unused;
        for (auto& [f, op] : poc.schedule) plan.schedule[f] = op;
        plan.lambda = poc.lambda;
        plan.s_ratio = poc.s_ratio;
        plan.h_ratio = poc.h_ratio;
        plan.r_ratio = poc.r_ratio;
    }
    out.plan = plan;
    const DetectionFrames attacked = apply_plan(t.frames, t.gt, plan).frames;

    for (const auto& m : modes) {
        const auto base = run_trace(m.cfg, t.frames);
        const auto run = run_trace(m.cfg, attacked);
        ModeOutcome mo;
        mo.mode = m.mode;
        mo.track_id = original_track_id(run, attacked, g.id, out.attack_frame - 1);
        if (mo.track_id < 0) throw NoTarget("target never tracked before the attack in " + t.name);
        mo.perceived = trajectory_of(run, mo.track_id);
        mo.fd = false_deviation(mo.perceived, g, v);
        mo.lf = lost_frames(run, attacked, base, t.frames, g, out.attack_frame);
        if (out.attack_frame < static_cast<int>(run.size())) {
            if (const auto& d = run[static_cast<std::size_t>(out.attack_frame)].dmax)
                mo.dmax_along = std::abs(d->cwiseMin(1e300).dot(v.cwiseAbs()));
        }
        out.modes.push_back(std::move(mo));
    }
    return out;
}

/// Fans traces out to `jobs` workers; results keep trace order.
template <class Fn>
auto map_traces(const std::vector<Trace>& traces, int jobs, Fn fn) {
    using R = decltype(fn(traces.front()));
    std::vector<std::optional<R>> slots(traces.size());
    std::vector<std::exception_ptr> errors(traces.size());
    detail::parallel_for(static_cast<int>(traces.size()), jobs, [&](int i) {
        try {
            slots[static_cast<std::size_t>(i)] = fn(traces[static_cast<std::size_t>(i)]);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    });
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<R> out;
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

/// Undefended and defended runs of every trace under one attack plan each.
inline std::vector<AttackOutcome> attack_eval(const ExperimentConfig& cfg, const std::vector<Trace>& traces) {
    const TrackerConfig off = cfg.tracker(false);
    TrackerConfig on = cfg.tracker(true);
    if (!on.defense) on.defense = DefenseConfig{};
    const std::vector<NamedTracker> modes{{"off", off}, {"on", on}};
    return map_traces(traces, cfg.jobs, [&](const Trace& t) { return attack_trace(t, cfg.attack, off, modes); });
}

/// Ablation modes: undefended, each alternative design at the configured
/// alpha, and the full design at each alpha in the list.
inline std::vector<NamedTracker> ablation_modes(const ExperimentConfig& cfg) {
    std::vector<NamedTracker> out{{"off", cfg.tracker(false)}};
    auto with = [&](const std::string& mode, double alpha) {
        DefenseSettings d = cfg.defense;
        d.mode = mode;
        d.alpha_max = alpha;
        TrackerConfig c = cfg.tracker(false);
        c.defense = d.resolve();
        return c;
    };
    for (const auto& m : cfg.ablate.modes) out.push_back({m, with(m, cfg.defense.alpha_max)});
    for (double a : cfg.ablate.alphas) {
        char name[32];
        std::snprintf(name, sizeof name, "full@%.2f", a);
        out.push_back({name, with("full", a)});
    }
    return out;
}

inline std::vector<AttackOutcome> ablate(const ExperimentConfig& cfg, const std::vector<Trace>& traces) {
    const auto modes = ablation_modes(cfg);
    const TrackerConfig off = cfg.tracker(false);
    return map_traces(traces, cfg.jobs, [&](const Trace& t) { return attack_trace(t, cfg.attack, off, modes); });
}

/// Per-mode aggregate over traces, in mode order.
inline std::vector<std::pair<std::string, AdvReport>> summarize_modes(const std::vector<AttackOutcome>& res,
                                                                       std::optional<Units> units) {
    std::vector<std::pair<std::string, AdvReport>> out;
    if (res.empty()) return out;
    for (std::size_t m = 0; m < res.front().modes.size(); ++m) {
        std::vector<FalseDeviation> fds;
        std::vector<int> lfs;
        for (const auto& r : res) {
            fds.push_back(r.modes[m].fd);
            lfs.push_back(r.modes[m].lf);
        }
        out.emplace_back(res.front().modes[m].mode, aggregate(fds, lfs, units));
    }
    return out;
}

struct TraceEval {
    std::string trace;
    ClearReport report;
};

inline std::vector<TraceEval> evaluate(const ExperimentConfig& cfg, const std::vector<Trace>& traces,
                                       bool defended) {
    const TrackerConfig tc = cfg.tracker(defended);
    const ClearOptions opt = clear_options(cfg);
    return map_traces(traces, cfg.jobs, [&](const Trace& t) {
        return TraceEval{t.name, clear(predictions_from(run_trace(tc, t.frames)), t.gt, opt)};
    });
}

struct BenchRow {
    std::string mode;
    int frames = 0;
    double seconds = 0;
    double fps = 0;
};

/// Best-of-`repeats` wall time of a full tracking pass, defense off and on.
inline std::vector<BenchRow> bench(const ExperimentConfig& cfg) {
    SceneSpec s;
    s.dims = cfg.dims();
    s.objects = cfg.bench.objects;
    s.frames = cfg.bench.frames;
    s.seed = cfg.seed;
    const Trace t = synth(random_scene(s));
    std::vector<BenchRow> out;
    for (const bool defended : {false, true}) {
        TrackerConfig tc = cfg.tracker(defended);
        if (defended && !tc.defense) tc.defense = DefenseConfig{};
        double best = 1e300;
        for (int r = 0; r < std::max(1, cfg.bench.repeats); ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto run = run_trace(tc, t.frames);
            const auto t1 = std::chrono::steady_clock::now();
            best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
            if (run.size() != t.frames.size()) throw Error("internal: frame count mismatch");
        }
        out.push_back({defended ? "on" : "off", t.frame_count(), best, best > 0 ? t.frame_count() / best : 0.0});
    }
    return out;
}

}  // namespace kfmot
