#include <selfcal/rigidbody.hpp>
#include <selfcal/sim.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace selfcal;

namespace {

Vec3 random_vec(std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> n(0.0, scale);
    return {n(rng), n(rng), n(rng)};
}

} // namespace

TEST(PointAcceleration, ZeroAndCentripetal) {
    EXPECT_EQ(point_acceleration(Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), {}), Vec3::Zero());
    const Vec3 a = point_acceleration(Vec3::Zero(), {1, 0, 0}, Vec3::Zero(), Vec3::Zero(), {{0, 0, 2}, Vec3::Zero()});
    EXPECT_NEAR((a - Vec3(-4, 0, 0)).norm(), 0.0, 1e-15);
}

TEST(PointAcceleration, MatchesRegressor) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 1000; ++i) {
        const AngularState s{random_vec(rng, 10.0), random_vec(rng, 100.0)};
        const Vec3 r = random_vec(rng, 0.05);
        const Vec3 a = point_acceleration(Vec3::Zero(), r, Vec3::Zero(), Vec3::Zero(), s);
        const Vec3 xr = regressor_row(s, Vec3::Zero()).X * r;
        EXPECT_LE((a - xr).norm(), 1e-12 * std::max(1.0, a.norm()));
    }
}

TEST(Regressor, Examples) {
    EXPECT_EQ(regressor_row({}, Vec3::Zero()).X, Mat3::Zero());

    const double w = 3.0;
    Mat3 expect_spin = Vec3(-w * w, -w * w, 0.0).asDiagonal();
    EXPECT_NEAR((lever_arm_matrix({{0, 0, w}, Vec3::Zero()}) - expect_spin).norm(), 0.0, 1e-15);

    Mat3 expect;
    expect << 0, -1, 0, 1, -1, 0, 0, 0, -1;
    EXPECT_NEAR((lever_arm_matrix({{1, 0, 0}, {0, 0, 1}}) - expect).norm(), 0.0, 1e-15);
}

TEST(Regressor, TraceIdentity) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 500; ++i) {
        const AngularState s{random_vec(rng, 10.0), random_vec(rng, 100.0)};
        EXPECT_NEAR(lever_arm_matrix(s).trace(), -2.0 * s.omega.squaredNorm(), 1e-10);
    }
}

TEST(Compensation, CancelsLeverArm) {
    std::mt19937_64 rng(13);
    const AngularState s0{random_vec(rng, 5.0), random_vec(rng, 50.0)};
    const Vec3 meas(0.4, -0.2, -9.0);
    EXPECT_EQ(compensate_to_cog(meas, Vec3::Zero(), s0), meas);
    for (int i = 0; i < 500; ++i) {
        const AngularState s{random_vec(rng, 10.0), random_vec(rng, 100.0)};
        const Vec3 r = random_vec(rng, 0.05);
        EXPECT_NEAR(compensate_to_cog(lever_arm_matrix(s) * r, r, s).norm(), 0.0, 1e-12);
    }
}

TEST(Compensation, RecoversSimulatedCogForce) {
    const sim::VehicleConfig cfg = sim::preset_quadrotor({}, {0.02, -0.01, 0.015});
    sim::ExciteScenario ex;
    ex.plan = sim::default_plan(4);
    ex.omega0_deg = {100.0, -150.0, 60.0};
    const sim::SimResult res = sim::simulate(cfg, ex, 2000.0);
    for (std::size_t i = 0; i < res.log.size(); ++i) {
        const AngularState s{res.truth.omega[i], res.truth.omega_dot[i]};
        const Vec3 f = compensate_to_cog(res.log.rows[i].accel, res.truth.r_true, s);
        EXPECT_LE((f - res.truth.cog_specific_force[i]).norm(), 1e-9);
    }
}

TEST(Differentiate, ConstantIsZero) {
    std::vector<Vec3> g(500, Vec3(1.0, -2.0, 3.0));
    for (const Vec3& d : differentiate_rates(g, 5e-4, 30.0)) EXPECT_NEAR(d.norm(), 0.0, 1e-9);
}

TEST(Differentiate, RampSettlesToSlope) {
    const double alpha = 4.0, dt = 5e-4;
    std::vector<Vec3> g;
    for (int i = 0; i < 2000; ++i) g.emplace_back(alpha * i * dt, 0.0, 0.0);
    const auto d = differentiate_rates(g, dt, 30.0);
    for (std::size_t i = 400; i < d.size(); ++i) EXPECT_NEAR(d[i].x(), alpha, 1e-9);
}

TEST(Differentiate, SinusoidBelowCutoff) {
    const double f = 2.0, dt = 5e-4, amp = 1.5;
    const double w = 2.0 * std::numbers::pi * f;
    std::vector<Vec3> g;
    for (int i = 0; i < 8000; ++i) g.emplace_back(0.0, amp * std::sin(w * i * dt), 0.0);
    const auto d = differentiate_rates(g, dt, 30.0);
    double peak = 0.0;
    for (std::size_t i = 4000; i < d.size(); ++i) peak = std::max(peak, std::abs(d[i].y()));
    EXPECT_NEAR(peak, amp * w, 0.02 * amp * w);
}

TEST(Differentiate, RejectsShortSeries) {
    std::vector<Vec3> g(2, Vec3::Zero());
    EXPECT_THROW((void)differentiate_rates(g, 5e-4, 30.0), Error);
}

TEST(LowPass, RejectsCutoffAboveNyquist) {
    EXPECT_THROW(LowPass2<double>(1000.0, 2000.0), Error);
    EXPECT_THROW(LowPass2<double>(0.0, 2000.0), Error);
}

TEST(LowPass, LinearInInput) {
    std::mt19937_64 rng(14);
    std::normal_distribution<double> n;
    LowPass2<double> a(30.0, 2000.0), b(30.0, 2000.0), ab(30.0, 2000.0);
    for (int i = 0; i < 1000; ++i) {
        const double x = n(rng), y = n(rng);
        EXPECT_NEAR(ab(2.0 * x + 3.0 * y), 2.0 * a(x) + 3.0 * b(y), 1e-12);
    }
}
