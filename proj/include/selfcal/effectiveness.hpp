#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "selfcal/error.hpp"
#include "selfcal/geometry.hpp"
#include "selfcal/rigidbody.hpp"
#include "selfcal/sensor_log.hpp"

namespace selfcal {

using Matrix3X = Eigen::Matrix<double, 3, Eigen::Dynamic>;

// Steady-state map from normalized motor inputs to specific force (G1f) and
// angular acceleration (G1tau), both in IMU axes.
struct EffectivenessModel {
    Matrix3X G1f;   // (m/s^2) per unit input
    Matrix3X G1tau; // (rad/s^2) per unit input
    Eigen::VectorXd u_min;
    Eigen::VectorXd u_max;

    [[nodiscard]] int m() const { return static_cast<int>(G1f.cols()); }

    void validate() const {
        const int n = m();
        if (n < 4) throw Error(ErrorKind::InvalidArgument, "effectiveness model needs at least 4 motors");
        if (G1tau.cols() != n || u_min.size() != n || u_max.size() != n) {
            throw Error(ErrorKind::InvalidArgument, "effectiveness model dimensions disagree");
        }
        if (!G1f.allFinite() || !G1tau.allFinite()) {
            throw Error(ErrorKind::InvalidArgument, "effectiveness model has non-finite entries");
        }
        for (int i = 0; i < n; ++i) {
            if (!(u_min[i] < u_max[i])) {
                throw Error(ErrorKind::InvalidArgument, "u_min must be below u_max for motor " + std::to_string(i + 1));
            }
        }
    }
};

// Exponentially forgetting RLS for one output row y = theta^T u.
struct RlsState {
    Eigen::VectorXd theta;
    Eigen::MatrixXd P;
    double forgetting{0.999};
    double p0{100.0};
    std::size_t samples{0};
    std::size_t resets{0}; // times P lost positive definiteness and was reset

    static RlsState init(int n, double forgetting = 0.999, double p0 = 100.0) {
        if (!(forgetting > 0.0 && forgetting <= 1.0)) {
            throw Error(ErrorKind::InvalidArgument, "forgetting factor must lie in (0, 1]");
        }
        RlsState s;
        s.theta = Eigen::VectorXd::Zero(n);
        s.P = p0 * Eigen::MatrixXd::Identity(n, n);
        s.forgetting = forgetting;
        s.p0 = p0;
        return s;
    }
};

inline void rls_update_inplace(RlsState& s, const Eigen::VectorXd& u, double y) {
    const Eigen::VectorXd Pu = s.P * u;
    const double denom = s.forgetting + u.dot(Pu);
    const Eigen::VectorXd k = Pu / denom;
    s.theta += k * (y - u.dot(s.theta));
    s.P -= k * Pu.transpose();
    s.P /= s.forgetting;
    s.P = 0.5 * (s.P + s.P.transpose());
    ++s.samples;
    const bool diag_ok = s.P.allFinite() && (s.P.diagonal().array() > 0.0).all();
    if (!diag_ok) {
        s.P = s.p0 * Eigen::MatrixXd::Identity(s.P.rows(), s.P.cols());
        ++s.resets;
    }
}

[[nodiscard]] inline RlsState rls_update(RlsState s, const Eigen::VectorXd& u, double y) {
    rls_update_inplace(s, u, y);
    return s;
}

struct Pulse {
    int motor{0};       // zero-based
    double t_start{0.0}; // s
    double t_end{0.0};   // s
};

struct ExcitationSchedule {
    std::vector<Pulse> pulses;
};

// Recovers the pulse windows from the logged inputs: a motor is active while
// its input sits above `threshold`.
[[nodiscard]] inline ExcitationSchedule schedule_from_log(const SensorLog& log, double threshold = 0.05) {
    ExcitationSchedule sched;
    for (int i = 0; i < log.motor_count; ++i) {
        bool on = false;
        Pulse p;
        for (const LogSample& s : log.rows) {
            const bool active = s.u[i] > threshold;
            if (active && !on) {
                p = {i, s.t, s.t};
                on = true;
            } else if (active) {
                p.t_end = s.t;
            } else if (on) {
                sched.pulses.push_back(p);
                on = false;
            }
        }
        if (on) sched.pulses.push_back(p);
    }
    std::sort(sched.pulses.begin(), sched.pulses.end(),
              [](const Pulse& a, const Pulse& b) { return a.t_start < b.t_start; });
    return sched;
}

struct EffectivenessFitOptions {
    double settle_s{0.040};     // skip samples this long after any input change
    double forgetting{0.999};
    double p0{100.0};
    double cutoff_hz{30.0};
    double active_threshold{0.05};
    double u_min{0.0};
    double u_max{1.0};
};

// Snapshot of the running identification, usable for replaying the solver.
using FitObserver = std::function<void(double t, const EffectivenessModel&)>;

struct EffectivenessFit {
    EffectivenessModel model;
    std::vector<RlsState> rows; // 0..2 force, 3..5 torque
    std::size_t samples_used{0};
};

namespace detail {

inline EffectivenessModel model_from_rows(const std::vector<RlsState>& rows, const EffectivenessFitOptions& opts) {
    const int m = static_cast<int>(rows[0].theta.size());
    EffectivenessModel model;
    model.G1f.resize(3, m);
    model.G1tau.resize(3, m);
    for (int k = 0; k < 3; ++k) {
        model.G1f.row(k) = rows[k].theta.transpose();
        model.G1tau.row(k) = rows[3 + k].theta.transpose();
    }
    model.u_min = Eigen::VectorXd::Constant(m, opts.u_min);
    model.u_max = Eigen::VectorXd::Constant(m, opts.u_max);
    return model;
}

} // namespace detail

// Six parallel RLS fits of the steady-state effectiveness. Forces are the
// lever-arm compensated accelerometer, torques the differentiated gyro; the
// inputs pass through the same low-pass as the observations so the filtered
// signals keep the linear input-output relation.
[[nodiscard]] inline EffectivenessFit fit_from_log_detailed(const SensorLog& log, const Vec3& r,
                                                           const ExcitationSchedule& schedule,
                                                           const EffectivenessFitOptions& opts = {},
                                                           const FitObserver& observer = {}) {
    const int m = log.motor_count;
    if (m < 4) throw Error(ErrorKind::InvalidArgument, "log has " + std::to_string(m) + " motor columns, need >= 4");
    if (log.size() < 3) throw Error(ErrorKind::InvalidArgument, "log too short for identification");

    std::vector<bool> scheduled(m, false);
    for (const Pulse& p : schedule.pulses) {
        if (p.motor >= 0 && p.motor < m && p.t_end > p.t_start) scheduled[p.motor] = true;
    }

    const std::vector<Vec3> gyro = log.gyro_series(0, log.size());
    const std::vector<Vec3> gyro_dot_raw = central_difference<Vec3>(gyro, log.dt());

    LowPass2<Vec3> lpf_force(opts.cutoff_hz, log.rate);
    LowPass2<Vec3> lpf_torque(opts.cutoff_hz, log.rate);
    LowPass2<Eigen::VectorXd> lpf_u(opts.cutoff_hz, log.rate);

    EffectivenessFit fit;
    fit.rows.reserve(6);
    for (int k = 0; k < 6; ++k) fit.rows.push_back(RlsState::init(m, opts.forgetting, opts.p0));

    std::vector<bool> seen_active(m, false);
    const auto settle_samples = static_cast<std::size_t>(std::llround(opts.settle_s * log.rate));
    std::size_t last_change = 0;

    for (std::size_t i = 0; i < log.size(); ++i) {
        const LogSample& s = log.rows[i];
        const Vec3 f = lpf_force(compensate_to_cog(s.accel, r, {gyro[i], gyro_dot_raw[i]}));
        const Vec3 tau = lpf_torque(gyro_dot_raw[i]);
        const Eigen::VectorXd uf = lpf_u(s.u);

        if (i > 0 && (s.u - log.rows[i - 1].u).cwiseAbs().maxCoeff() > 0.0) last_change = i;
        if (i - last_change < settle_samples || i < settle_samples) continue;

        for (int k = 0; k < 3; ++k) {
            rls_update_inplace(fit.rows[k], uf, f[k]);
            rls_update_inplace(fit.rows[3 + k], uf, tau[k]);
        }
        ++fit.samples_used;
        for (int j = 0; j < m; ++j) {
            if (s.u[j] > opts.active_threshold) seen_active[j] = true;
        }
        if (observer) observer(s.t, detail::model_from_rows(fit.rows, opts));
    }

    std::string missing;
    for (int j = 0; j < m; ++j) {
        if (!scheduled[j] || !seen_active[j]) missing += (missing.empty() ? "" : ", ") + std::to_string(j + 1);
    }
    if (!missing.empty()) throw Error(ErrorKind::IncompleteExcitation, "motors never excited in steady state: " + missing);

    fit.model = detail::model_from_rows(fit.rows, opts);
    return fit;
}

[[nodiscard]] inline EffectivenessModel fit_from_log(const SensorLog& log, const Vec3& r,
                                                     const ExcitationSchedule& schedule,
                                                     const EffectivenessFitOptions& opts = {}) {
    return fit_from_log_detailed(log, r, schedule, opts).model;
}

} // namespace selfcal
