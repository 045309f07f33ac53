#pragma once

#include "kfmot/error.hpp"

#include <Eigen/Dense>

#include <functional>

namespace kfmot {

/// Constant-velocity model over `dims` spatial axes. The state interleaves
/// position and per-frame velocity: (x, vx, y, vy, z, vz).
struct KfModel {
    int dims = 2;
    Eigen::MatrixXd A;  ///< state transition
    Eigen::MatrixXd H;  ///< projection onto observed centers
    Eigen::MatrixXd Q;  ///< process noise covariance
    Eigen::MatrixXd R;  ///< observation noise covariance

    int state_size() const { return 2 * dims; }

    static KfModel constant_velocity(int dims, double q, double r) {
        if (dims < 1 || dims > 3) throw InvalidArgument("KfModel: dims must be 1, 2 or 3");
        if (!(q >= 0.0) || !(r >= 0.0)) throw InvalidArgument("KfModel: noise must be >= 0");
        const int n = 2 * dims;
        KfModel m;
        m.dims = dims;
        m.A = Eigen::MatrixXd::Identity(n, n);
        m.H = Eigen::MatrixXd::Zero(dims, n);
        for (int i = 0; i < dims; ++i) {
            m.A(2 * i, 2 * i + 1) = 1.0;
            m.H(i, 2 * i) = 1.0;
        }
        m.Q = q * Eigen::MatrixXd::Identity(n, n);
        m.R = r * Eigen::MatrixXd::Identity(dims, dims);
        return m;
    }

    /// Desk-scale defaults: pixels for 2D, meters for 3D.
    static KfModel defaults(int dims) {
        return constant_velocity(dims, 0.01, dims == 3 ? 0.25 : 1.0);
    }
};

struct KfState {
    Eigen::VectorXd s;
    Eigen::MatrixXd P;

    int dims() const { return static_cast<int>(s.size()) / 2; }

    Eigen::VectorXd position() const {
        Eigen::VectorXd p(dims());
        for (int i = 0; i < dims(); ++i) p[i] = s[2 * i];
        return p;
    }

    Eigen::VectorXd velocity() const {
        Eigen::VectorXd v(dims());
        for (int i = 0; i < dims(); ++i) v[i] = s[2 * i + 1];
        return v;
    }
};

/// Maps a raw residual to the residual actually merged into the state.
using Modulation = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Track initialisation from a first observed center: zero velocity,
/// positional variance from R and `velocity_scale` times that on velocities.
inline KfState initial_state(const Eigen::VectorXd& z, const KfModel& model,
                             double velocity_scale = 10.0) {
    const int n = model.state_size();
    KfState st{Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Zero(n, n)};
    for (int i = 0; i < model.dims; ++i) {
        st.s[2 * i] = z[i];
        st.P(2 * i, 2 * i) = model.R(i, i);
        st.P(2 * i + 1, 2 * i + 1) = velocity_scale * model.R(i, i);
    }
    return st;
}

inline KfState predict(const KfState& st, const KfModel& model) {
    return {model.A * st.s, model.A * st.P * model.A.transpose() + model.Q};
}

/// Missing observation: only the prediction steps run.
inline KfState predict_only_step(const KfState& st, const KfModel& model) {
    return predict(st, model);
}

inline Eigen::MatrixXd gain(const KfState& pred, const KfModel& model) {
    const Eigen::MatrixXd S = model.H * pred.P * model.H.transpose() + model.R;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(S);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) throw SingularInnovation("innovation covariance is singular");
    // S is symmetric, so K = P H^T S^-1 = (S^-1 H P^T)^T.
    return lu.solve(model.H * pred.P.transpose()).transpose();
}

inline Eigen::VectorXd residual(const KfState& pred, const Eigen::VectorXd& z,
                                const KfModel& model) {
    return z.head(model.dims) - model.H * pred.s;
}

/// Merge step with an optional residual modulation; the covariance follows
/// the plain (I - KH)P form and is symmetrised afterwards.
inline KfState update(const KfState& pred, const Eigen::VectorXd& z, const KfModel& model,
                      const Modulation& modulate = {}) {
    const Eigen::MatrixXd K = gain(pred, model);
    const Eigen::VectorXd raw = residual(pred, z, model);
    const Eigen::VectorXd delta = modulate ? modulate(raw) : raw;
    const int n = model.state_size();
    KfState out;
    out.s = pred.s + K * delta;
    out.P = (Eigen::MatrixXd::Identity(n, n) - K * model.H) * pred.P;
    out.P = 0.5 * (out.P + out.P.transpose());
    return out;
}

/// Decay constant of the steady-state closed loop (I - K H) A, i.e.
/// -ln of its spectral radius. Iterates the Riccati recursion to converge K.
inline double steady_state_decay(const KfModel& model, int iterations = 2000) {
    KfState st = initial_state(Eigen::VectorXd::Zero(model.dims), model);
    Eigen::MatrixXd K;
    for (int i = 0; i < iterations; ++i) {
        const KfState pred = predict(st, model);
        K = gain(pred, model);
        st.P = (Eigen::MatrixXd::Identity(model.state_size(), model.state_size()) - K * model.H) *
               pred.P;
        st.P = 0.5 * (st.P + st.P.transpose());
    }
    const Eigen::MatrixXd loop =
        (Eigen::MatrixXd::Identity(model.state_size(), model.state_size()) - K * model.H) *
        model.A;
    const double rho = loop.eigenvalues().cwiseAbs().maxCoeff();
    return -std::log(rho);
}

}  // namespace kfmot
