#include "scenarios.hpp"

#include <gtest/gtest.h>

using namespace selfcal;
using namespace selfcal::testing;

TEST(Sim, RestReadsGravityReaction) {
    sim::RestScenario rest;
    const auto res = sim::simulate(sim::preset_quadrotor(), rest, 2000.0);
    for (const LogSample& s : res.log.rows) {
        EXPECT_LT((s.accel - Vec3(0, 0, -9.81)).norm(), 1e-12);
        EXPECT_EQ(s.gyro, Vec3::Zero());
    }
    EXPECT_TRUE(std::isnan(res.truth.airborne_t0));
}

TEST(Sim, ZeroOffsetThrowIsSilentInFlight) {
    const auto res = throw_log(sim::preset_quadrotor(), {400.0, 400.0, 100.0});
    std::size_t airborne = 0;
    for (std::size_t i = 0; i < res.log.size(); ++i) {
        if (!res.truth.airborne[i]) continue;
        ++airborne;
        EXPECT_LT(res.log.rows[i].accel.norm(), 1e-12);
    }
    EXPECT_GT(airborne, 1000u);
}

TEST(Sim, CentripetalAboutZ) {
    const double w_deg = 300.0, w = w_deg * kDegToRad;
    const auto res = throw_log(sim::preset_quadrotor({}, {0.02, 0.0, 0.0}), {0.0, 0.0, w_deg});
    for (std::size_t i = 0; i < res.log.size(); ++i) {
        if (!res.truth.airborne[i]) continue;
        EXPECT_LT((res.log.rows[i].accel - Vec3(-w * w * 0.02, 0, 0)).norm(), 1e-9);
    }
}

TEST(Sim, AngularMomentumConserved) {
    sim::ThrowScenario th;
    th.duration = 2.0;
    th.omega0_deg = {400.0, 400.0, 100.0};
    const auto res = sim::simulate(sim::preset_hexarotor(), th, 2000.0);
    const Vec3* h0 = nullptr;
    double worst = 0.0;
    for (std::size_t i = 0; i < res.log.size(); ++i) {
        if (!res.truth.airborne[i]) continue;
        if (!h0) h0 = &res.truth.angular_momentum_inertial[i];
        worst = std::max(worst, (res.truth.angular_momentum_inertial[i] - *h0).norm() / h0->norm());
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(Sim, RegressorIdentityDuringFlight) {
    const auto cfg = sim::preset_quadrotor(kQuadRotation, kOffset);
    const auto res = throw_log(cfg, {300.0, -200.0, 150.0});
    for (std::size_t i = 0; i < res.log.size(); ++i) {
        if (!res.truth.airborne[i]) continue;
        const Mat3 X = lever_arm_matrix({res.truth.omega[i], res.truth.omega_dot[i]});
        EXPECT_LT((res.log.rows[i].accel - X * res.truth.r_true).norm(), 1e-9);
    }
}

TEST(Sim, IntermediateAxisTumbles) {
    const auto cfg = sim::preset_hexarotor();
    // y is the intermediate axis of the hexarotor inertia
    sim::ThrowScenario th;
    th.duration = 2.0;
    th.omega0_deg = {0.05 * 573.0, 573.0, 0.05 * 573.0};
    const auto res = sim::simulate(cfg, th, 2000.0);
    Vec3 first = Vec3::Zero();
    double max_angle = 0.0;
    for (std::size_t i = 0; i < res.log.size(); ++i) {
        if (!res.truth.airborne[i]) continue;
        if (first.isZero()) first = res.truth.omega[i];
        max_angle = std::max(max_angle, angle_deg(first, res.truth.omega[i]));
    }
    EXPECT_GT(max_angle, 30.0);
}

TEST(Sim, SeedDeterminism) {
    const auto cfg = sim::preset_quadrotor();
    const auto a = throw_log(cfg, {400.0, 400.0, 100.0}, kFlightNoise, 9);
    const auto b = throw_log(cfg, {400.0, 400.0, 100.0}, kFlightNoise, 9);
    const auto c = throw_log(cfg, {400.0, 400.0, 100.0}, kFlightNoise, 10);
    EXPECT_EQ(csv::to_string(a.log), csv::to_string(b.log));
    EXPECT_NE(csv::to_string(a.log), csv::to_string(c.log));
}

TEST(Sim, ThrowWindowMatchesHeight) {
    const auto res = throw_log(sim::preset_quadrotor(), {100.0, 0.0, 0.0});
    EXPECT_NEAR(res.truth.airborne_t1 - res.truth.airborne_t0, sim::throw_duration_for_height(1.0), 1e-3);
}

TEST(Sim, InvalidConfigRejected) {
    sim::VehicleConfig cfg = sim::preset_quadrotor();
    cfg.mass = -1.0;
    EXPECT_THROW((void)sim::simulate(cfg, sim::RestScenario{}, 2000.0), Error);
    EXPECT_THROW((void)sim::simulate(sim::preset_quadrotor(), sim::RestScenario{}, 10.0), Error);
}

TEST(Preset, HexTrueFrame) {
    const ThrustFrameSolution sol = solve(sim::true_effectiveness(sim::preset_hexarotor(45.0)));
    const EulerYPR e = quat_to_euler(sol.q_TU);
    EXPECT_NEAR(e.roll, 45.0, 0.1);
    EXPECT_NEAR(e.yaw, 0.0, 0.1);
    EXPECT_NEAR(e.pitch, 0.0, 0.1);

    const ThrustFrameSolution level = solve(sim::true_effectiveness(sim::preset_hexarotor(0.0)));
    EXPECT_NEAR(level.q_TU.w, 1.0, 1e-6);
    EXPECT_LT(level.q_TU.vec().norm(), 1e-6);
}

TEST(Preset, HexNullspaceIsThreeDimensional) {
    for (double roll : {0.0, 20.0, 45.0, 90.0}) {
        const auto model = sim::true_effectiveness(sim::preset_hexarotor(roll));
        EXPECT_EQ(nullspace_basis<double>(model.G1tau).N.cols(), 3);
    }
}

TEST(Pipeline, NoiselessEndToEnd) {
    const auto cfg = sim::preset_quadrotor(kQuadRotation, kOffset);
    const PipelineResult p = run_pipeline(cfg, {}, 1);
    EXPECT_LT((p.offset.r_hat - p.r_true).norm(), 1e-6);
    const ThrustFrameSolution truth = solve(p.truth);
    const double d = std::abs(p.frame.q_TU.w * truth.q_TU.w + p.frame.q_TU.vec().dot(truth.q_TU.vec()));
    EXPECT_LT(2.0 * std::acos(std::min(1.0, d)) * kRadToDeg, 0.1);
}
