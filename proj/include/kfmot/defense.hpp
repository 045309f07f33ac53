#pragma once

#include "kfmot/error.hpp"
#include "kfmot/gamma.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace kfmot {

enum class Distribution { gamma, gaussian };

/// Security patch settings. The ablation variants are flag combinations:
/// gaussian, elimination, outlier-unaware, axis-unaware.
struct DefenseConfig {
    double alpha_max = 0.95;         ///< quantile used as the clip bound
    double beta_trim = 0.05;         ///< keep only the [beta, 1 - beta] empirical band
    std::size_t buffer_size = 200;   ///< FIFO capacity per axis
    std::size_t warmup_min = 30;     ///< samples required before an axis is modulated
    Distribution distribution = Distribution::gamma;
    bool axis_aware = true;
    bool outlier_aware = true;
    bool elimination_mode = false;   ///< store only the largest-magnitude axis
    /// Provisional (unconfirmed) tracks are updated classically unless set.
    bool modulate_provisional = false;

    void validate() const {
        if (!(alpha_max > 0.0 && alpha_max < 1.0)) throw InvalidArgument("alpha_max must be in (0,1)");
        if (!(beta_trim > 0.0 && beta_trim < 0.5)) throw InvalidArgument("beta_trim must be in (0,0.5)");
        if (buffer_size == 0) throw InvalidArgument("buffer_size must be positive");
        if (warmup_min == 0) throw InvalidArgument("warmup_min must be positive");
    }

    /// Named presets: full, gaussian, elimination, outlier-unaware, axis-unaware.
    static DefenseConfig preset(std::string_view name) {
        DefenseConfig c;
        if (name == "full" || name == "on") return c;
        if (name == "gaussian") c.distribution = Distribution::gaussian;
        else if (name == "elimination") c.elimination_mode = true;
        else if (name == "outlier-unaware") c.outlier_aware = false;
        else if (name == "axis-unaware") c.axis_aware = false;
        else throw InvalidArgument("unknown defense mode: " + std::string(name));
        return c;
    }
};

/// Per-axis FIFO of absolute observation-prediction deviations shared by all
/// tracks of one tracker. With axis_aware = false a single pooled FIFO is used.
class DeviationBuffer {
public:
    DeviationBuffer(int dims, DefenseConfig cfg) : dims_(dims), cfg_(std::move(cfg)) {
        cfg_.validate();
        axes_.resize(cfg_.axis_aware ? static_cast<std::size_t>(dims) : 1);
    }

    int dims() const { return dims_; }
    const DefenseConfig& config() const { return cfg_; }
    std::size_t axis_count() const { return axes_.size(); }
    const std::deque<double>& axis(std::size_t i) const { return axes_.at(i); }

    void record(const Eigen::VectorXd& delta) {
        if (!delta.allFinite()) throw InvalidArgument("DeviationBuffer::record: non-finite residual");
        if (cfg_.elimination_mode) {
            Eigen::Index k = 0;
            const double v = delta.cwiseAbs().maxCoeff(&k);
            push(cfg_.axis_aware ? static_cast<std::size_t>(k) : 0, v);
            return;
        }
        for (Eigen::Index i = 0; i < delta.size(); ++i)
            push(cfg_.axis_aware ? static_cast<std::size_t>(i) : 0, std::abs(delta[i]));
    }

    /// Drops values strictly outside the empirical [beta, 1 - beta] band on
    /// each axis, keeping order. Axes with fewer than 3 samples are skipped.
    void trim() {
        if (!cfg_.outlier_aware) return;
        for (auto& fifo : axes_) {
            if (fifo.size() < 3) continue;
            std::vector<double> sorted(fifo.begin(), fifo.end());
            std::sort(sorted.begin(), sorted.end());
            const double lo = empirical_quantile_sorted(sorted, cfg_.beta_trim);
            const double hi = empirical_quantile_sorted(sorted, 1.0 - cfg_.beta_trim);
            std::erase_if(fifo, [&](double v) { return v < lo || v > hi; });
        }
    }

    /// Clip bound per axis. Axes still warming up get +inf (no clipping);
    /// nullopt when no axis is active yet.
    std::optional<Eigen::VectorXd> threshold_vector() const {
        Eigen::VectorXd out = Eigen::VectorXd::Constant(dims_, std::numeric_limits<double>::infinity());
        bool any = false;
        for (std::size_t a = 0; a < axes_.size(); ++a) {
            const auto t = axis_threshold(axes_[a]);
            if (!t) continue;
            any = true;
            if (cfg_.axis_aware) out[static_cast<Eigen::Index>(a)] = *t;
            else out.setConstant(*t);
        }
        if (!any) return std::nullopt;
        return out;
    }

private:
    void push(std::size_t axis, double v) {
        auto& fifo = axes_[axis];
        fifo.push_back(v);
        while (fifo.size() > cfg_.buffer_size) fifo.pop_front();
    }

    std::optional<double> axis_threshold(const std::deque<double>& fifo) const {
        if (fifo.size() < cfg_.warmup_min) return std::nullopt;
        const std::vector<double> xs(fifo.begin(), fifo.end());
        try {
            if (cfg_.distribution == Distribution::gamma)
                return gamma_quantile(fit_gamma(xs), cfg_.alpha_max);
            return gaussian_quantile(fit_gaussian(xs), cfg_.alpha_max);
        } catch (const DegenerateVariance&) {
            // Point mass: the bound is the sample mean.
            double sum = 0.0;
            for (double x : xs) sum += x;
            return std::max(0.0, sum / static_cast<double>(xs.size()));
        }
    }

    int dims_;
    DefenseConfig cfg_;
    std::vector<std::deque<double>> axes_;
};

/// Appends one "frame,axis,value" row per buffered deviation.
inline void write_buffer_csv(std::ostream& os, int frame, const DeviationBuffer& buf) {
    for (std::size_t a = 0; a < buf.axis_count(); ++a)
        for (double v : buf.axis(a)) os << frame << ',' << a << ',' << v << '\n';
}

/// Coordinate-wise clip of the residual to the per-axis bound, sign kept.
inline Eigen::VectorXd modulate(const Eigen::VectorXd& delta, const Eigen::VectorXd& dmax) {
    Eigen::VectorXd out = delta;
    for (Eigen::Index i = 0; i < delta.size(); ++i) {
        if (std::abs(delta[i]) > dmax[i]) out[i] = (delta[i] > 0.0 ? 1.0 : -1.0) * dmax[i];
    }
    return out;
}

}  // namespace kfmot
