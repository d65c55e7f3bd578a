#include <selfcal/geometry.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace selfcal;

namespace {

void expect_quat_near(const Quaternion& a, const Quaternion& b, double tol) {
    EXPECT_NEAR(a.w, b.w, tol);
    EXPECT_NEAR(a.x, b.x, tol);
    EXPECT_NEAR(a.y, b.y, tol);
    EXPECT_NEAR(a.z, b.z, tol);
}

void expect_vec_near(const Vec3& a, const Vec3& b, double tol) {
    EXPECT_NEAR((a - b).norm(), 0.0, tol) << a.transpose() << " vs " << b.transpose();
}

Quaternion random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    return Quaternion{n(rng), n(rng), n(rng), n(rng)}.normalized();
}

} // namespace

TEST(Euler, QuadrotorMountingPair) {
    const Quaternion q = euler_to_quat({-15.0, 24.0, -64.0});
    expect_quat_near(q, {0.837, -0.491, 0.242, 0.001}, 1e-3);
}

TEST(Euler, ZeroIsIdentity) {
    expect_quat_near(euler_to_quat({0.0, 0.0, 0.0}), Quaternion::identity(), 1e-15);
    const EulerYPR e = quat_to_euler(Quaternion::identity());
    EXPECT_NEAR(e.yaw, 0.0, 1e-12);
    EXPECT_NEAR(e.pitch, 0.0, 1e-12);
    EXPECT_NEAR(e.roll, 0.0, 1e-12);
    EXPECT_FALSE(e.gimbal_lock);
}

TEST(Euler, HexRollPair) {
    expect_quat_near(euler_to_quat({0.0, 0.0, 45.0}), {0.924, 0.383, 0.0, 0.0}, 1e-3);
}

TEST(Euler, HexFoundFrame) {
    const EulerYPR e = quat_to_euler(Quaternion{0.930, 0.367, -0.026, 0.0}.normalized());
    EXPECT_NEAR(e.yaw, -1.08, 0.1);
    EXPECT_NEAR(e.pitch, -2.74, 0.1);
    EXPECT_NEAR(e.roll, 43.1, 0.1);
}

TEST(Euler, RoundTripAwayFromGimbalLock) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> yaw(-179.0, 179.0), pitch(-88.9, 88.9), roll(-179.0, 179.0);
    for (int i = 0; i < 2000; ++i) {
        const EulerYPR in{yaw(rng), pitch(rng), roll(rng)};
        const EulerYPR out = quat_to_euler(euler_to_quat(in));
        EXPECT_NEAR(out.yaw, in.yaw, 1e-7);
        EXPECT_NEAR(out.pitch, in.pitch, 1e-7);
        EXPECT_NEAR(out.roll, in.roll, 1e-7);
    }
}

TEST(Euler, RandomQuaternionRoundTrip) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 2000; ++i) {
        const Quaternion q = canonical(random_unit(rng));
        const EulerYPR e = quat_to_euler(q);
        if (std::abs(e.pitch) > 89.0) continue;
        expect_quat_near(canonical(euler_to_quat(e)), q, 1e-9);
    }
}

TEST(Euler, GimbalLockSetsRollZero) {
    for (double pitch : {90.0, -90.0}) {
        const Quaternion q = euler_to_quat({30.0, pitch, 20.0});
        const EulerYPR e = quat_to_euler(q);
        EXPECT_TRUE(e.gimbal_lock);
        EXPECT_EQ(e.roll, 0.0);
        EXPECT_NEAR(e.pitch, pitch, 1e-6);
        // same rotation with the roll folded into yaw
        const Quaternion back = euler_to_quat(e);
        const Vec3 v(0.3, -0.4, 0.85);
        expect_vec_near(rotate(back, v), rotate(q, v), 1e-6);
    }
}

TEST(Rotation, Basics) {
    const Vec3 v(0.3, -1.2, 2.0);
    expect_vec_near(rotate(Quaternion::identity(), v), v, 1e-15);
    const Quaternion qz = axis_angle(Vec3::UnitZ(), 90.0 * kDegToRad);
    expect_vec_near(rotate(qz, Vec3::UnitX()), Vec3::UnitY(), 1e-15);
    std::mt19937_64 rng(1);
    const Quaternion q = random_unit(rng);
    expect_quat_near(canonical(quat_mul(q, quat_conj(q))), Quaternion::identity(), 1e-15);
}

TEST(Rotation, NormAndComposition) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    for (int i = 0; i < 1000; ++i) {
        const Quaternion a = random_unit(rng), b = random_unit(rng);
        const Vec3 v(n(rng), n(rng), n(rng));
        EXPECT_NEAR(rotate(a, v).norm(), v.norm(), 1e-9);
        expect_vec_near(rotate(quat_mul(a, b), v), rotate(a, rotate(b, v)), 1e-9);
        expect_vec_near(to_rotation_matrix(a) * v, rotate(a, v), 1e-9);
    }
}

TEST(ShortestRotation, Examples) {
    expect_quat_near(shortest_rotation({0, 0, -1}, {0, 0, -1}), Quaternion::identity(), 1e-15);
    const double h = std::sqrt(0.5);
    expect_quat_near(shortest_rotation({1, 0, 0}, {0, 0, -1}), {h, 0.0, h, 0.0}, 1e-12);
    expect_quat_near(shortest_rotation({0, 0, 1}, {0, 0, -1}), {0.0, 1.0, 0.0, 0.0}, 1e-12);
    // collinear with x falls back to y
    expect_quat_near(shortest_rotation({1, 0, 0}, {-1, 0, 0}), {0.0, 0.0, 1.0, 0.0}, 1e-12);
}

TEST(ShortestRotation, AxisOrthogonalAndMapsFromOntoTo) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    for (int i = 0; i < 1000; ++i) {
        const Vec3 a(n(rng), n(rng), n(rng)), b(n(rng), n(rng), n(rng));
        const Quaternion q = shortest_rotation(a, b);
        EXPECT_NEAR(std::abs(q.vec().dot(a.normalized())), 0.0, 1e-9);
        EXPECT_GE(q.w, 0.0);
        expect_vec_near(rotate(q, a.normalized()), b.normalized(), 1e-9);
    }
}
