#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "selfcal/error.hpp"
#include "selfcal/geometry.hpp"

namespace selfcal {

// Rotation rate and rotational acceleration of the CoG frame, in its own axes.
struct AngularState {
    Vec3 omega{Vec3::Zero()};     // rad/s
    Vec3 omega_dot{Vec3::Zero()}; // rad/s^2
};

// One free-tumble observation: y = X r, where r is the IMU lever arm.
struct RegressorRow {
    Mat3 X{Mat3::Zero()}; // 1/s^2
    Vec3 y{Vec3::Zero()}; // m/s^2
};

// Inertial acceleration of a point at r in a rotating frame, written in that frame.
[[nodiscard]] inline Vec3 point_acceleration(const Vec3& a_frame, const Vec3& r, const Vec3& r_dot,
                                             const Vec3& r_ddot, const AngularState& s) {
    const Vec3& w = s.omega;
    return a_frame + r_ddot + 2.0 * w.cross(r_dot) + s.omega_dot.cross(r) + w.cross(w.cross(r));
}

// Matrix form of omega_dot x r + omega x (omega x r).
[[nodiscard]] inline Mat3 lever_arm_matrix(const AngularState& s) {
    const double wx = s.omega.x(), wy = s.omega.y(), wz = s.omega.z();
    const double dx = s.omega_dot.x(), dy = s.omega_dot.y(), dz = s.omega_dot.z();
    Mat3 X;
    X << -wy * wy - wz * wz, wx * wy - dz, wx * wz + dy,
         wx * wy + dz, -wx * wx - wz * wz, wy * wz - dx,
         wx * wz - dy, wy * wz + dx, -wx * wx - wy * wy;
    return X;
}

[[nodiscard]] inline RegressorRow regressor_row(const AngularState& s, const Vec3& accel_meas) {
    return {lever_arm_matrix(s), accel_meas};
}

// Removes the lever-arm kinematics, leaving the specific force at the CoG.
[[nodiscard]] inline Vec3 compensate_to_cog(const Vec3& accel_meas, const Vec3& r,
                                           const AngularState& s) {
    return accel_meas - lever_arm_matrix(s) * r;
}

// Second-order Butterworth low-pass (bilinear transform), transposed direct
// form II. Works on any value type closed under + and scalar *, so the same
// filter can run over scalars, Vec3 or stacked regressor rows. The state is
// primed with the first sample, which keeps the filter linear in its input.
template <typename T>
class LowPass2 {
public:
    LowPass2(double cutoff_hz, double sample_hz) {
        if (!(sample_hz > 0.0) || !(cutoff_hz > 0.0) || !(cutoff_hz < 0.5 * sample_hz)) {
            throw Error(ErrorKind::InvalidArgument,
                        "low-pass cutoff must lie in (0, Nyquist), got " + std::to_string(cutoff_hz) +
                            " Hz at " + std::to_string(sample_hz) + " Hz");
        }
        const double k = std::tan(std::numbers::pi * cutoff_hz / sample_hz);
        const double sqrt2 = std::numbers::sqrt2;
        const double norm = 1.0 / (1.0 + sqrt2 * k + k * k);
        b0_ = k * k * norm;
        b1_ = 2.0 * b0_;
        b2_ = b0_;
        a1_ = 2.0 * (k * k - 1.0) * norm;
        a2_ = (1.0 - sqrt2 * k + k * k) * norm;
    }

    T operator()(const T& x) {
        if (!primed_) {
            z2_ = (b2_ - a2_) * x;
            z1_ = (b1_ - a1_) * x + z2_;
            primed_ = true;
        }
        const T y = b0_ * x + z1_;
        z1_ = b1_ * x - a1_ * y + z2_;
        z2_ = b2_ * x - a2_ * y;
        return y;
    }

    void reset() { primed_ = false; }

private:
    double b0_{}, b1_{}, b2_{}, a1_{}, a2_{};
    T z1_{};
    T z2_{};
    bool primed_{false};
};

// Central differences with one-sided differences at both ends.
template <typename T>
[[nodiscard]] std::vector<T> central_difference(std::span<const T> series, double dt) {
    if (series.size() < 3) {
        throw Error(ErrorKind::InvalidArgument,
                    "differentiation needs at least 3 samples, got " + std::to_string(series.size()));
    }
    if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
    const std::size_t n = series.size();
    std::vector<T> out(n);
    out[0] = (series[1] - series[0]) / dt;
    for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (series[i + 1] - series[i - 1]) / (2.0 * dt);
    out[n - 1] = (series[n - 1] - series[n - 2]) / dt;
    return out;
}

// Angular acceleration estimate from a uniformly sampled gyro stream: central
// difference followed by the causal low-pass.
[[nodiscard]] inline std::vector<Vec3> differentiate_rates(std::span<const Vec3> gyro, double dt,
                                                          double cutoff_hz) {
    std::vector<Vec3> d = central_difference<Vec3>(gyro, dt);
    LowPass2<Vec3> lpf(cutoff_hz, 1.0 / dt);
    for (Vec3& v : d) v = lpf(v);
    return d;
}

} // namespace selfcal
