#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "selfcal/effectiveness.hpp"
#include "selfcal/error.hpp"
#include "selfcal/geometry.hpp"
#include "selfcal/sensor_log.hpp"

namespace selfcal::sim {

inline constexpr double kGravity = 9.81;

// Body axes are forward-right-down; gravity is +z in the inertial frame.
struct Motor {
    Vec3 position{Vec3::Zero()};  // m from CoG, body frame
    Vec3 axis{0.0, 0.0, -1.0};    // unit thrust direction, body frame
    double force_per_u{1.0};      // N at u = 1
    double torque_per_u{0.0};     // N m about `axis` at u = 1, signed by spin
};

struct ImuMount {
    Vec3 r{Vec3::Zero()};         // m from CoG, body frame
    Quaternion q_UB;              // v_imu = rotate(q_UB, v_body)
};

struct VehicleConfig {
    double mass{1.0};
    Mat3 inertia{Mat3::Identity()};
    std::vector<Motor> motors;
    ImuMount imu;
    double u_min{0.0};
    double u_max{1.0};
    double linear_drag{0.0};      // N per m/s, opposing CoG velocity

    [[nodiscard]] int m() const { return static_cast<int>(motors.size()); }

    void validate() const {
        if (!(mass > 0.0)) throw Error(ErrorKind::InvalidArgument, "mass must be positive");
        if ((inertia - inertia.transpose()).norm() > 1e-12 * inertia.norm()) {
            throw Error(ErrorKind::InvalidArgument, "inertia must be symmetric");
        }
        if (!(Eigen::SelfAdjointEigenSolver<Mat3>(inertia).eigenvalues()[0] > 0.0)) {
            throw Error(ErrorKind::InvalidArgument, "inertia must be positive definite");
        }
        for (std::size_t i = 0; i < motors.size(); ++i) {
            if (std::abs(motors[i].axis.norm() - 1.0) > 1e-9) {
                throw Error(ErrorKind::InvalidArgument, "motor " + std::to_string(i + 1) + " axis is not unit length");
            }
        }
        if (std::abs(imu.q_UB.norm() - 1.0) > 1e-9) throw Error(ErrorKind::InvalidArgument, "imu.q_UB is not a unit quaternion");
        if (!(u_min < u_max)) throw Error(ErrorKind::InvalidArgument, "u_min must be below u_max");
        if (!(linear_drag >= 0.0)) throw Error(ErrorKind::InvalidArgument, "linear_drag must be non-negative");
    }
};

// Trapezoidal input pulse on one motor.
struct PulseSpec {
    int motor{0};
    double t_start{0.0};
    double hold{0.065};
    double ramp{0.005};
    double amplitude{0.5};

    [[nodiscard]] double t_end() const { return t_start + 2.0 * ramp + hold; }

    [[nodiscard]] double value(double t) const {
        if (t < t_start || t >= t_end()) return 0.0;
        const double s = t - t_start;
        if (ramp > 0.0 && s < ramp) return amplitude * s / ramp;
        if (ramp > 0.0 && s > ramp + hold) return amplitude * (t_end() - t) / ramp;
        return amplitude;
    }
};

struct ExcitationPlan {
    std::vector<PulseSpec> pulses;
    double duration{0.0};

    [[nodiscard]] Eigen::VectorXd u_at(double t, int m) const {
        Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
        for (const PulseSpec& p : pulses) {
            if (p.motor >= 0 && p.motor < m) u[p.motor] += p.value(t);
        }
        return u;
    }

    [[nodiscard]] ExcitationSchedule schedule() const {
        ExcitationSchedule s;
        for (const PulseSpec& p : pulses) s.pulses.push_back({p.motor, p.t_start, p.t_end()});
        return s;
    }
};

// Excitation order pairing each motor with the one opposite it (i, i + m/2),
// so the body rate built up by one pulse is largely undone by the next.
[[nodiscard]] inline std::vector<int> opposite_pair_order(int m) {
    std::vector<int> order;
    if (m % 2 != 0) {
        for (int i = 0; i < m; ++i) order.push_back(i);
        return order;
    }
    for (int i = 0; i < m / 2; ++i) {
        order.push_back(i);
        order.push_back(i + m / 2);
    }
    return order;
}

// Back-to-back pulses on every motor in turn, with idle lead-in and tail.
[[nodiscard]] inline ExcitationPlan sequential_plan(const std::vector<int>& order, double pulse_len = 0.075,
                                                    double amplitude = 0.5, double ramp = 0.005, double lead = 0.05,
                                                    double tail = 0.05) {
    ExcitationPlan plan;
    const int n = static_cast<int>(order.size());
    for (int k = 0; k < n; ++k) {
        plan.pulses.push_back({order[k], lead + k * pulse_len, pulse_len - 2.0 * ramp, ramp, amplitude});
    }
    plan.duration = lead + n * pulse_len + tail;
    return plan;
}

[[nodiscard]] inline ExcitationPlan default_plan(int m) { return sequential_plan(opposite_pair_order(m)); }

struct ThrowScenario {
    Vec3 omega0_deg{400.0, 400.0, 100.0}; // deg/s, body frame
    double duration{0.9};                 // s airborne
    double rest_before{0.5};
    double rest_after{0.5};
};

struct ExciteScenario {
    ExcitationPlan plan;
    Vec3 omega0_deg{Vec3::Zero()};
};

struct RestScenario {
    double duration{1.0};
    Quaternion attitude; // q_IB
};

using Scenario = std::variant<ThrowScenario, ExciteScenario, RestScenario>;

struct NoiseSpec {
    double gyro_sigma{0.0};  // rad/s
    double accel_sigma{0.0}; // m/s^2
};

struct GroundTruth {
    Vec3 r_true{Vec3::Zero()}; // IMU offset in IMU axes
    Quaternion q_UB;
    Matrix3X G1f_true;
    Matrix3X G1tau_true;
    double airborne_t0{std::numeric_limits<double>::quiet_NaN()};
    double airborne_t1{std::numeric_limits<double>::quiet_NaN()};
    // Per-sample noiseless signals, IMU axes unless noted.
    std::vector<Vec3> omega;
    std::vector<Vec3> omega_dot;
    std::vector<Vec3> cog_specific_force;
    std::vector<Vec3> angular_momentum_inertial; // N m s
    std::vector<bool> airborne;
};

struct SimResult {
    SensorLog log;
    GroundTruth truth;
};

// Steady-state effectiveness of a configuration, in IMU axes.
[[nodiscard]] inline EffectivenessModel true_effectiveness(const VehicleConfig& cfg) {
    const int m = cfg.m();
    EffectivenessModel model;
    model.G1f.resize(3, m);
    model.G1tau.resize(3, m);
    const Mat3 Jinv = cfg.inertia.inverse();
    for (int i = 0; i < m; ++i) {
        const Motor& mo = cfg.motors[i];
        const Vec3 force = mo.force_per_u * mo.axis;
        const Vec3 torque = mo.position.cross(force) + mo.torque_per_u * mo.axis;
        model.G1f.col(i) = rotate(cfg.imu.q_UB, force / cfg.mass);
        model.G1tau.col(i) = rotate(cfg.imu.q_UB, Jinv * torque);
    }
    model.u_min = Eigen::VectorXd::Constant(m, cfg.u_min);
    model.u_max = Eigen::VectorXd::Constant(m, cfg.u_max);
    return model;
}

namespace detail {

struct State {
    Quaternion q;     // body to inertial
    Vec3 omega;       // body rad/s
    Vec3 v;           // inertial m/s
};

struct Derivative {
    Quaternion q_dot;
    Vec3 omega_dot;
    Vec3 v_dot;
    Vec3 specific_force; // body
};

class Dynamics {
public:
    explicit Dynamics(const VehicleConfig& cfg) : cfg_(cfg), Jinv_(cfg.inertia.inverse()) {}

    [[nodiscard]] Derivative eval(const State& s, const Eigen::VectorXd& u) const {
        Vec3 force = Vec3::Zero();
        Vec3 torque = Vec3::Zero();
        for (int i = 0; i < cfg_.m(); ++i) {
            const Motor& mo = cfg_.motors[i];
            const double ui = u.size() > i ? u[i] : 0.0;
            const Vec3 f = mo.force_per_u * ui * mo.axis;
            force += f;
            torque += mo.position.cross(f) + mo.torque_per_u * ui * mo.axis;
        }
        if (cfg_.linear_drag > 0.0) force -= cfg_.linear_drag * rotate(quat_conj(s.q), s.v);

        Derivative d;
        d.specific_force = force / cfg_.mass;
        d.omega_dot = Jinv_ * (torque - s.omega.cross(cfg_.inertia * s.omega));
        d.v_dot = rotate(s.q, d.specific_force) + Vec3(0.0, 0.0, kGravity);
        const Quaternion w{0.0, s.omega.x(), s.omega.y(), s.omega.z()};
        const Quaternion qd = s.q * w;
        d.q_dot = {0.5 * qd.w, 0.5 * qd.x, 0.5 * qd.y, 0.5 * qd.z};
        return d;
    }

    [[nodiscard]] State rk4(const State& s, const Eigen::VectorXd& u, double h) const {
        auto add = [](const State& a, const Derivative& d, double k) {
            State out;
            out.q = {a.q.w + k * d.q_dot.w, a.q.x + k * d.q_dot.x, a.q.y + k * d.q_dot.y, a.q.z + k * d.q_dot.z};
            out.omega = a.omega + k * d.omega_dot;
            out.v = a.v + k * d.v_dot;
            return out;
        };
        const Derivative k1 = eval(s, u);
        const Derivative k2 = eval(add(s, k1, 0.5 * h), u);
        const Derivative k3 = eval(add(s, k2, 0.5 * h), u);
        const Derivative k4 = eval(add(s, k3, h), u);
        State out;
        auto comb = [h](double a, double b1, double b2, double b3, double b4) {
            return a + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        };
        out.q = {comb(s.q.w, k1.q_dot.w, k2.q_dot.w, k3.q_dot.w, k4.q_dot.w),
                 comb(s.q.x, k1.q_dot.x, k2.q_dot.x, k3.q_dot.x, k4.q_dot.x),
                 comb(s.q.y, k1.q_dot.y, k2.q_dot.y, k3.q_dot.y, k4.q_dot.y),
                 comb(s.q.z, k1.q_dot.z, k2.q_dot.z, k3.q_dot.z, k4.q_dot.z)};
        out.q = out.q.normalized();
        out.omega = s.omega + h / 6.0 * (k1.omega_dot + 2.0 * k2.omega_dot + 2.0 * k3.omega_dot + k4.omega_dot);
        out.v = s.v + h / 6.0 * (k1.v_dot + 2.0 * k2.v_dot + 2.0 * k3.v_dot + k4.v_dot);
        return out;
    }

private:
    const VehicleConfig& cfg_;
    Mat3 Jinv_;
};

class Recorder {
public:
    Recorder(const VehicleConfig& cfg, double rate, const NoiseSpec& noise, std::uint64_t seed, SimResult& out)
        : cfg_(cfg), rate_(rate), noise_(noise), rng_(seed), out_(out) {}

    void record(const State& s, const Vec3& omega_dot_b, const Vec3& sf_b, const Eigen::VectorXd& u, bool airborne) {
        const Vec3& r = cfg_.imu.r;
        const Vec3 accel_b = sf_b + omega_dot_b.cross(r) + s.omega.cross(s.omega.cross(r));
        const Quaternion& q = cfg_.imu.q_UB;
        LogSample sample;
        sample.t = static_cast<double>(out_.log.rows.size()) / rate_;
        sample.gyro = rotate(q, s.omega);
        sample.accel = rotate(q, accel_b);
        sample.u = u;
        if (noise_.gyro_sigma > 0.0) {
            for (int k = 0; k < 3; ++k) sample.gyro[k] += noise_.gyro_sigma * normal_(rng_);
        }
        if (noise_.accel_sigma > 0.0) {
            for (int k = 0; k < 3; ++k) sample.accel[k] += noise_.accel_sigma * normal_(rng_);
        }
        GroundTruth& gt = out_.truth;
        gt.omega.push_back(rotate(q, s.omega));
        gt.omega_dot.push_back(rotate(q, omega_dot_b));
        gt.cog_specific_force.push_back(rotate(q, sf_b));
        gt.angular_momentum_inertial.push_back(rotate(s.q, cfg_.inertia * s.omega));
        gt.airborne.push_back(airborne);
        if (airborne) {
            if (std::isnan(gt.airborne_t0)) gt.airborne_t0 = sample.t;
            gt.airborne_t1 = sample.t;
        }
        out_.log.rows.push_back(std::move(sample));
    }

private:
    const VehicleConfig& cfg_;
    double rate_;
    NoiseSpec noise_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    SimResult& out_;
};

inline std::size_t samples_for(double seconds, double rate) {
    return static_cast<std::size_t>(std::llround(seconds * rate));
}

} // namespace detail

// Fixed-step RK4 at the log rate. The accelerometer reports specific force at
// the IMU (CoG specific force plus lever-arm terms) in IMU axes; the gyro
// reports body rate in IMU axes. Rest phases are static poses.
[[nodiscard]] inline SimResult simulate(const VehicleConfig& cfg, const Scenario& scenario, double rate,
                                        const NoiseSpec& noise = {}, std::uint64_t seed = 0) {
    cfg.validate();
    if (!(rate >= 100.0)) throw Error(ErrorKind::InvalidArgument, "simulation rate must be at least 100 Hz");
    const int m = cfg.m();
    const double h = 1.0 / rate;

    SimResult out;
    out.log.rate = rate;
    out.log.motor_count = m;
    const EffectivenessModel truth_model = true_effectiveness(cfg);
    out.truth.G1f_true = truth_model.G1f;
    out.truth.G1tau_true = truth_model.G1tau;
    out.truth.q_UB = cfg.imu.q_UB;
    out.truth.r_true = rotate(cfg.imu.q_UB, cfg.imu.r);

    detail::Dynamics dyn(cfg);
    detail::Recorder rec(cfg, rate, noise, seed, out);
    const Eigen::VectorXd idle = Eigen::VectorXd::Zero(m);

    auto rest = [&](const Quaternion& q_ib, std::size_t n) {
        const Vec3 sf_b = rotate(quat_conj(q_ib), Vec3(0.0, 0.0, -kGravity));
        detail::State s{q_ib, Vec3::Zero(), Vec3::Zero()};
        for (std::size_t i = 0; i < n; ++i) rec.record(s, Vec3::Zero(), sf_b, idle, false);
    };

    auto fly = [&](detail::State s, std::size_t n, const auto& input_at) {
        for (std::size_t i = 0; i < n; ++i) {
            const double t_local = static_cast<double>(i) * h;
            const Eigen::VectorXd u = input_at(t_local);
            const detail::Derivative d = dyn.eval(s, u);
            rec.record(s, d.omega_dot, d.specific_force, u, true);
            s = dyn.rk4(s, u, h);
        }
        return s;
    };

    if (const auto* th = std::get_if<ThrowScenario>(&scenario)) {
        if (!(th->duration > 0.0)) throw Error(ErrorKind::InvalidArgument, "throw duration must be positive");
        const Quaternion level;
        rest(level, detail::samples_for(th->rest_before, rate));
        detail::State s{level, th->omega0_deg * kDegToRad, Vec3(0.0, 0.0, -0.5 * kGravity * th->duration)};
        s = fly(s, detail::samples_for(th->duration, rate), [&](double) { return idle; });
        rest(s.q, detail::samples_for(th->rest_after, rate));
    } else if (const auto* ex = std::get_if<ExciteScenario>(&scenario)) {
        if (!(ex->plan.duration > 0.0)) throw Error(ErrorKind::InvalidArgument, "excitation plan has no duration");
        for (const PulseSpec& p : ex->plan.pulses) {
            if (p.motor < 0 || p.motor >= m) {
                throw Error(ErrorKind::InvalidArgument, "pulse references motor " + std::to_string(p.motor + 1));
            }
        }
        detail::State s{Quaternion{}, ex->omega0_deg * kDegToRad, Vec3::Zero()};
        fly(s, detail::samples_for(ex->plan.duration, rate), [&](double t) { return ex->plan.u_at(t, m); });
    } else {
        const auto& re = std::get<RestScenario>(scenario);
        rest(re.attitude.normalized(), detail::samples_for(re.duration, rate));
    }
    return out;
}

// Airborne time of a vertical throw reaching `height` metres.
[[nodiscard]] inline double throw_duration_for_height(double height) {
    return 2.0 * std::sqrt(2.0 * height / kGravity);
}

// X-configuration 3-inch-class quadrotor. `imu_rotation` is the q^T_U the
// pipeline should recover (the IMU is mounted rotated by its inverse) and
// `imu_offset` the IMU position from the CoG in body axes.
[[nodiscard]] inline VehicleConfig preset_quadrotor(const Quaternion& imu_rotation = {},
                                                    const Vec3& imu_offset = Vec3::Zero()) {
    VehicleConfig cfg;
    cfg.mass = 0.35;
    cfg.inertia = Vec3(2.1e-4, 2.3e-4, 4.0e-4).asDiagonal();
    const double arm = 0.08;
    const double angles_deg[4] = {45.0, 135.0, 225.0, 315.0};
    const double spin[4] = {1.0, -1.0, 1.0, -1.0};
    for (int i = 0; i < 4; ++i) {
        Motor mo;
        const double a = angles_deg[i] * kDegToRad;
        mo.position = Vec3(arm * std::cos(a), arm * std::sin(a), 0.0);
        mo.axis = Vec3(0.0, 0.0, -1.0);
        mo.force_per_u = 1.75;
        mo.torque_per_u = spin[i] * 0.0175;
        cfg.motors.push_back(mo);
    }
    cfg.imu.q_UB = quat_conj(imu_rotation.normalized());
    cfg.imu.r = imu_offset;
    return cfg;
}

// Fully actuated hexarotor with rotors tilted alternately by +-30 deg about
// their arms. The energy-optimal hover thrust is body -z; the IMU sees the
// whole constellation rolled by `constellation_roll_deg`.
[[nodiscard]] inline VehicleConfig preset_hexarotor(double constellation_roll_deg = 45.0) {
    VehicleConfig cfg;
    cfg.mass = 2.0;
    cfg.inertia = Vec3(0.030, 0.032, 0.055).asDiagonal();
    const double radius = 0.25;
    const double tilt = 30.0 * kDegToRad;
    for (int i = 0; i < 6; ++i) {
        const double a = i * 60.0 * kDegToRad;
        const double sgn = (i % 2 == 0) ? 1.0 : -1.0;
        const Vec3 radial(std::cos(a), std::sin(a), 0.0);
        const Vec3 tangent(-std::sin(a), std::cos(a), 0.0);
        Motor mo;
        mo.position = radius * radial;
        mo.axis = (-std::cos(tilt) * Vec3::UnitZ() + sgn * std::sin(tilt) * tangent).normalized();
        mo.force_per_u = 8.0;
        mo.torque_per_u = sgn * 0.12;
        cfg.motors.push_back(mo);
    }
    cfg.imu.q_UB = quat_conj(euler_to_quat({0.0, 0.0, constellation_roll_deg}));
    cfg.imu.r = Vec3(0.01, -0.005, -0.02);
    return cfg;
}

} // namespace selfcal::sim
