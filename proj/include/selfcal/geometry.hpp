#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace selfcal {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kDegToRad = std::numbers::pi / 180.0;
inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// Hamilton unit quaternion, scalar first. rotate(q, v) is the active rotation
// q v q*, so q^T_U maps a vector expressed in U onto its coordinates in T.
struct Quaternion {
    double w{1.0};
    double x{0.0};
    double y{0.0};
    double z{0.0};

    [[nodiscard]] static constexpr Quaternion identity() { return {}; }

    [[nodiscard]] Vec3 vec() const { return {x, y, z}; }
    [[nodiscard]] double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    [[nodiscard]] Quaternion normalized() const {
        const double n = norm();
        return {w / n, x / n, y / n, z / n};
    }

    friend bool operator==(const Quaternion&, const Quaternion&) = default;
};

// Angles in degrees. Intrinsic Z-Y-X: q = q_z(yaw) * q_y(pitch) * q_x(roll).
struct EulerYPR {
    double yaw{0.0};
    double pitch{0.0};
    double roll{0.0};
    bool gimbal_lock{false};
};

[[nodiscard]] inline Quaternion quat_mul(const Quaternion& a, const Quaternion& b) {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

[[nodiscard]] inline Quaternion operator*(const Quaternion& a, const Quaternion& b) {
    return quat_mul(a, b);
}

[[nodiscard]] inline Quaternion quat_conj(const Quaternion& q) { return {q.w, -q.x, -q.y, -q.z}; }

// Resolves the double cover so reported quaternions have w >= 0.
[[nodiscard]] inline Quaternion canonical(const Quaternion& q) {
    if (q.w < 0.0) return {-q.w, -q.x, -q.y, -q.z};
    return q;
}

[[nodiscard]] inline Vec3 rotate(const Quaternion& q, const Vec3& v) {
    const Vec3 u = q.vec();
    const Vec3 t = 2.0 * u.cross(v);
    return v + q.w * t + u.cross(t);
}

[[nodiscard]] inline Quaternion axis_angle(const Vec3& unit_axis, double angle_rad) {
    const double s = std::sin(0.5 * angle_rad);
    return {std::cos(0.5 * angle_rad), s * unit_axis.x(), s * unit_axis.y(), s * unit_axis.z()};
}

[[nodiscard]] inline Mat3 to_rotation_matrix(const Quaternion& q) {
    return Eigen::Quaterniond(q.w, q.x, q.y, q.z).toRotationMatrix();
}

[[nodiscard]] inline Quaternion euler_to_quat(const EulerYPR& e) {
    const Quaternion qz = axis_angle(Vec3::UnitZ(), e.yaw * kDegToRad);
    const Quaternion qy = axis_angle(Vec3::UnitY(), e.pitch * kDegToRad);
    const Quaternion qx = axis_angle(Vec3::UnitX(), e.roll * kDegToRad);
    return (qz * qy * qx).normalized();
}

namespace detail {

// atan2 lands in [-180, 180]; fold -180 onto +180.
inline double wrap_half_open(double deg) { return deg <= -180.0 ? deg + 360.0 : deg; }

} // namespace detail

[[nodiscard]] inline EulerYPR quat_to_euler(const Quaternion& q_in) {
    const Quaternion q = q_in.normalized();
    const double sin_pitch = std::clamp(2.0 * (q.w * q.y - q.z * q.x), -1.0, 1.0);
    const double pitch = std::asin(sin_pitch);

    EulerYPR e;
    if (std::abs(std::abs(pitch) - std::numbers::pi / 2.0) < 1e-6 * kDegToRad ||
        std::abs(sin_pitch) >= 1.0 - 1e-15) {
        // Only yaw - roll (or yaw + roll) is observable; pin roll to zero.
        e.gimbal_lock = true;
        e.pitch = sin_pitch > 0.0 ? 90.0 : -90.0;
        e.roll = 0.0;
        const double yaw = (sin_pitch > 0.0 ? -2.0 : 2.0) * std::atan2(q.x, q.w);
        e.yaw = detail::wrap_half_open(std::remainder(yaw * kRadToDeg, 360.0));
        return e;
    }
    e.pitch = pitch * kRadToDeg;
    e.roll = detail::wrap_half_open(
        std::atan2(2.0 * (q.w * q.x + q.y * q.z), 1.0 - 2.0 * (q.x * q.x + q.y * q.y)) * kRadToDeg);
    e.yaw = detail::wrap_half_open(
        std::atan2(2.0 * (q.w * q.z + q.x * q.y), 1.0 - 2.0 * (q.y * q.y + q.z * q.z)) * kRadToDeg);
    return e;
}

// Minimal rotation taking the direction of `from` onto the direction of `to`.
// Antipodal inputs get a half turn about x projected orthogonal to `from`
// (y when `from` is parallel to x).
[[nodiscard]] inline Quaternion shortest_rotation(const Vec3& from, const Vec3& to) {
    const Vec3 a = from.normalized();
    const Vec3 b = to.normalized();
    const double c = a.dot(b);
    const Vec3 axis = a.cross(b);

    if (c < 0.0 && axis.norm() < 1e-9) {
        Vec3 ortho = Vec3::UnitX() - a.x() * a;
        if (ortho.norm() < 1e-6) ortho = Vec3::UnitY() - a.y() * a;
        ortho.normalize();
        return {0.0, ortho.x(), ortho.y(), ortho.z()};
    }
    return Quaternion{1.0 + c, axis.x(), axis.y(), axis.z()}.normalized();
}

} // namespace selfcal
