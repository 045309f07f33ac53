#pragma once

#include "kfmot/attack.hpp"
#include "kfmot/defense.hpp"
#include "kfmot/error.hpp"
#include "kfmot/kalman.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace kfmot {

/// Scalar-axis Monte-Carlo setup. The true object sits still on the attacked
/// axis; observations carry white noise of standard deviation `sigma`.
struct SimConfig {
    int T = 300;
    double s_ratio = 0.004;
    double h_ratio = 0.05;
    double lambda = 10.0;
    double delta_max = 1.0;
    double sigma = 0.1;
    double q = 0.01;
    double r = 1.0;
    int trials = 200;
    std::uint64_t seed = 1;
    Layout layout = Layout::optimal;
    int jobs = 1;

    void validate() const {
        if (T < 2) throw InvalidArgument("T must be >= 2");
        if (s_ratio < 0 || h_ratio < 0 || s_ratio + h_ratio > 1.0 + 1e-12)
            throw InvalidArgument("need s_ratio, h_ratio >= 0 and s_ratio + h_ratio <= 1");
        if (!(lambda >= 0)) throw InvalidArgument("lambda must be >= 0");
        if (!(delta_max > 0)) throw InvalidArgument("delta_max must be > 0");
        if (!(sigma >= 0)) throw InvalidArgument("sigma must be >= 0");
        if (trials < 1) throw InvalidArgument("trials must be >= 1");
        if (jobs < 1) throw InvalidArgument("jobs must be >= 1");
    }
};

/// Per-frame attack op on the scalar axis.
enum class SimOp : char { none, shift, hide };

struct TrialResult {
    int trial = 0;
    double d10 = 0, d01 = 0, d11 = 0;  ///< |position_ij(T) - position_00(T)|
    int clean_clips = 0;               ///< clean residuals beyond delta_max
};

struct SimReport {
    double mean_d10 = 0, mean_d01 = 0, mean_d11 = 0;
    double max_d10 = 0, max_d01 = 0, max_d11 = 0;
    double ratio = 0;  ///< mean_d10 / mean_d11
    double beta = 0;   ///< steady-state decay constant of the filter
    int clean_clips = 0;
    std::vector<TrialResult> trials;
};

/// Deterministic per-trial seed.
inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (trial + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::vector<SimOp> schedule_ops(const AttackPlan& plan, int T) {
    std::vector<SimOp> ops(static_cast<std::size_t>(T), SimOp::none);
    for (const auto& [f, op] : plan.schedule) {
        if (f < 0 || f >= T) continue;
        ops[static_cast<std::size_t>(f)] = std::holds_alternative<Hide>(op) ? SimOp::hide : SimOp::shift;
    }
    // The filter is seeded from frame 0.
    ops[0] = SimOp::none;
    return ops;
}

inline std::vector<SimOp> schedule_ops(const SimConfig& cfg, Layout layout, std::uint64_t seed) {
    const Eigen::VectorXd v = Eigen::VectorXd::Ones(1);
    return schedule_ops(generalized_plan(cfg.T, cfg.s_ratio, cfg.h_ratio, cfg.lambda, v, layout, seed), cfg.T);
}

namespace detail {

struct SimRun {
    double position = 0;
    int clips = 0;
};

/// One scalar filter over the noise stream; `ops` empty means unattacked.
inline SimRun run_scalar(const KfModel& model, const std::vector<double>& noise, const std::vector<SimOp>* ops,
                         double lambda, const double* dmax) {
    SimRun out;
    Eigen::VectorXd z(1);
    z[0] = noise[0];
    KfState st = initial_state(z, model);
    Eigen::VectorXd bound(1);
    if (dmax) bound[0] = *dmax;
    for (std::size_t t = 1; t < noise.size(); ++t) {
        const SimOp op = ops ? (*ops)[t] : SimOp::none;
        KfState pred = predict(st, model);
        if (op == SimOp::hide) {
            st = pred;
            continue;
        }
        z[0] = noise[t] + (op == SimOp::shift ? lambda : 0.0);
        Modulation mod;
        if (dmax) {
            if (std::abs(residual(pred, z, model)[0]) > *dmax) ++out.clips;
            mod = [&bound](const Eigen::VectorXd& d) { return modulate(d, bound); };
        }
        st = update(pred, z, model, mod);
    }
    out.position = st.s[0];
    return out;
}

inline std::vector<double> noise_stream(int T, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> xs(static_cast<std::size_t>(T));
    for (auto& x : xs) x = sigma * n(rng);
    return xs;
}

template <class Fn>
void parallel_for(int n, int jobs, Fn fn) {
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j)
        pool.emplace_back([&, j] {
            for (int i = j; i < n; i += jobs) fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace detail

/// Paired runs (attacked/clean x defended/undefended) on one noise stream.
inline TrialResult simulate_trial(const SimConfig& cfg, const std::vector<SimOp>& ops, std::uint64_t seed) {
    const KfModel model = KfModel::constant_velocity(1, cfg.q, cfg.r);
    const auto noise = detail::noise_stream(cfg.T, cfg.sigma, seed);
    const auto r00 = detail::run_scalar(model, noise, nullptr, cfg.lambda, nullptr);
    const auto r10 = detail::run_scalar(model, noise, &ops, cfg.lambda, nullptr);
    const auto r01 = detail::run_scalar(model, noise, nullptr, cfg.lambda, &cfg.delta_max);
    const auto r11 = detail::run_scalar(model, noise, &ops, cfg.lambda, &cfg.delta_max);
    TrialResult t;
    t.d10 = std::abs(r10.position - r00.position);
    t.d01 = std::abs(r01.position - r00.position);
    t.d11 = std::abs(r11.position - r00.position);
    t.clean_clips = r01.clips;
    return t;
}

inline SimReport summarize(std::vector<TrialResult> trials, const SimConfig& cfg) {
    SimReport r;
    for (const auto& t : trials) {
        r.mean_d10 += t.d10;
        r.mean_d01 += t.d01;
        r.mean_d11 += t.d11;
        r.max_d10 = std::max(r.max_d10, t.d10);
        r.max_d01 = std::max(r.max_d01, t.d01);
        r.max_d11 = std::max(r.max_d11, t.d11);
        r.clean_clips += t.clean_clips;
    }
    const double n = static_cast<double>(trials.size());
    r.mean_d10 /= n;
    r.mean_d01 /= n;
    r.mean_d11 /= n;
    r.ratio = r.mean_d11 > 0 ? r.mean_d10 / r.mean_d11 : std::numeric_limits<double>::infinity();
    r.beta = steady_state_decay(KfModel::constant_velocity(1, cfg.q, cfg.r));
    r.trials = std::move(trials);
    return r;
}

inline SimReport simulate(const SimConfig& cfg) {
    cfg.validate();
    std::vector<TrialResult> trials(static_cast<std::size_t>(cfg.trials));
    detail::parallel_for(cfg.trials, cfg.jobs, [&](int i) {
        const auto seed = trial_seed(cfg.seed, static_cast<std::uint64_t>(i));
        const auto ops = schedule_ops(cfg, cfg.layout, seed);
        trials[static_cast<std::size_t>(i)] = simulate_trial(cfg, ops, seed);
        trials[static_cast<std::size_t>(i)].trial = i;
    });
    return summarize(std::move(trials), cfg);
}

struct LayoutSweep {
    std::vector<Layout> layouts;
    std::vector<double> mean_d10;              ///< per layout, all trials
    std::vector<std::vector<double>> batches;  ///< [batch][layout] mean |D10|
    double dominance = 0;  ///< fraction of batches where layouts[0] >= all others
};

/// Mean undefended terminal deviation per layout on shared noise. Trials are
/// split into `batch_count` consecutive batches for the dominance count.
inline LayoutSweep layout_sweep(const SimConfig& cfg, const std::vector<Layout>& layouts, int batch_count = 20) {
    cfg.validate();
    if (layouts.size() < 2) throw InvalidArgument("layout_sweep needs at least 2 layouts");
    if (batch_count < 1 || batch_count > cfg.trials) throw InvalidArgument("bad batch count");
    const std::size_t L = layouts.size();
    std::vector<std::vector<double>> d(static_cast<std::size_t>(cfg.trials), std::vector<double>(L));
    detail::parallel_for(cfg.trials, cfg.jobs, [&](int i) {
        const auto seed = trial_seed(cfg.seed, static_cast<std::uint64_t>(i));
        for (std::size_t l = 0; l < L; ++l)
            d[static_cast<std::size_t>(i)][l] = simulate_trial(cfg, schedule_ops(cfg, layouts[l], seed), seed).d10;
    });
    LayoutSweep out;
    out.layouts = layouts;
    out.mean_d10.assign(L, 0.0);
    out.batches.assign(static_cast<std::size_t>(batch_count), std::vector<double>(L, 0.0));
    std::vector<int> sizes(static_cast<std::size_t>(batch_count), 0);
    for (int i = 0; i < cfg.trials; ++i) {
        const auto b = static_cast<std::size_t>(static_cast<long>(i) * batch_count / cfg.trials);
        ++sizes[b];
        for (std::size_t l = 0; l < L; ++l) {
            out.mean_d10[l] += d[static_cast<std::size_t>(i)][l] / cfg.trials;
            out.batches[b][l] += d[static_cast<std::size_t>(i)][l];
        }
    }
    int wins = 0;
    for (std::size_t b = 0; b < out.batches.size(); ++b) {
        for (auto& x : out.batches[b]) x /= sizes[b];
        bool win = true;
        for (std::size_t l = 1; l < L; ++l) win = win && out.batches[b][0] >= out.batches[b][l];
        wins += win;
    }
    out.dominance = static_cast<double>(wins) / batch_count;
    return out;
}

struct LinearFit {
    double slope = 0, intercept = 0, r2 = 0;
};

inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LinearFit f;
    f.slope = sxx > 0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

struct GrowthFit {
    std::vector<int> hide_lengths;
    std::vector<double> mean_d10, mean_d11;
    LinearFit undefended, defended;
    double slope_ratio = 0;  ///< defended slope / undefended slope
};

/// Terminal deviation against hide length with the shift block held fixed:
/// `cfg.T` clean frames whose last round(s_ratio * T) frames are shifts,
/// followed by the hide block.
inline GrowthFit growth_fit(const SimConfig& cfg, const std::vector<int>& hide_lengths) {
    cfg.validate();
    if (hide_lengths.size() < 4) throw InvalidArgument("growth_fit needs at least 4 hide lengths");
    const int ns = std::max(1, static_cast<int>(std::lround(cfg.s_ratio * cfg.T)));
    GrowthFit g;
    g.hide_lengths = hide_lengths;
    std::vector<double> xs;
    for (int h : hide_lengths) {
        if (h < 0) throw InvalidArgument("hide length must be >= 0");
        SimConfig c = cfg;
        c.T = cfg.T + h;
        std::vector<SimOp> ops(static_cast<std::size_t>(c.T), SimOp::none);
        for (int f = cfg.T - ns; f < cfg.T; ++f) ops[static_cast<std::size_t>(f)] = SimOp::shift;
        for (int f = cfg.T; f < c.T; ++f) ops[static_cast<std::size_t>(f)] = SimOp::hide;
        std::vector<TrialResult> trials(static_cast<std::size_t>(cfg.trials));
        detail::parallel_for(cfg.trials, cfg.jobs, [&](int i) {
            trials[static_cast<std::size_t>(i)] =
                simulate_trial(c, ops, trial_seed(cfg.seed, static_cast<std::uint64_t>(i)));
        });
        double a = 0, b = 0;
        for (const auto& t : trials) {
            a += t.d10 / cfg.trials;
            b += t.d11 / cfg.trials;
        }
        xs.push_back(h);
        g.mean_d10.push_back(a);
        g.mean_d11.push_back(b);
    }
    g.undefended = fit_line(xs, g.mean_d10);
    g.defended = fit_line(xs, g.mean_d11);
    g.slope_ratio = g.undefended.slope != 0 ? g.defended.slope / g.undefended.slope : 0.0;
    return g;
}

}  // namespace kfmot
