// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "scenarios.hpp"

#include <selfcal/bench.hpp>

#include <chrono>
#include <cstdio>
#include <random>
#include <string>

using namespace selfcal;
using namespace selfcal::testing;

namespace {

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
    std::printf("[%s] %2d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double max_semi_axis(const ConfidenceEllipsoid& e) { return e.semi_axes[0]; }

// 1 and 8 share the data
void offset_criteria() {
    const auto cfg = sim::preset_quadrotor({}, kOffset);

    const auto t0 = std::chrono::steady_clock::now();
    const auto throws = two_throws(cfg, kFlightNoise, 101);
    const NormalEquations acc = accumulate_all(throws);
    const OffsetEstimate est = solve_ls(acc);
    const ConfidenceEllipsoid ell = confidence_ellipsoid(est);
    const double runtime = seconds_since(t0);
    const double err = (est.r_hat - kOffset).norm();

    const OffsetEstimate exact = solve_ls(accumulate_all(two_throws(cfg, {}, 101)));
    const double err_exact = (exact.r_hat - kOffset).norm();

    const bool ok = err < 1e-3 && max_semi_axis(ell) < 1e-3 && runtime < 5.0 && err_exact < 1e-6;
    report(1, "IMU offset recovery", ok,
           fmt("|r_hat-r| = %.3e m (< 1e-3), semi-axes %.3e/%.3e/%.3e m (< 1e-3), runtime %.2f s (< 5), "
               "noiseless |r_hat-r| = %.3e m (< 1e-6)",
               err, ell.semi_axes[0], ell.semi_axes[1], ell.semi_axes[2], runtime, err_exact));

    const OffsetEstimate rls = solve_rls(rows_all(throws));
    const double diff = (rls.r_hat - est.r_hat).norm();
    report(8, "LS/RLS equivalence", diff < 1e-6, fmt("|r_rls - r_ls| = %.3e m (< 1e-6)", diff));
}

void degeneracy_criterion() {
    const auto cfg = sim::preset_quadrotor({}, kOffset);
    const auto spin_z = throw_log(cfg, {0.0, 0.0, 400.0}, kFlightNoise, 201);
    const auto spin_x = throw_log(cfg, {400.0, 0.0, 0.0}, kFlightNoise, 202);

    const ConfidenceEllipsoid one = confidence_ellipsoid(solve_ls(accumulate_log(spin_z.log).acc));
    const double ratio = one.semi_axes[0] / one.semi_axes[2];
    const double misalign = angle_deg(one.axes_dirs[0], Vec3::UnitZ());

    const ConfidenceEllipsoid both = confidence_ellipsoid(solve_ls(accumulate_all({spin_z, spin_x})));
    const double shrink = one.semi_axes[0] / both.semi_axes[0];

    const bool ok = ratio >= 100.0 && misalign <= 10.0 && shrink >= 10.0;
    report(2, "single-throw degeneracy", ok,
           fmt("largest/smallest semi-axis %.1f (>= 100), largest axis %.2f deg from spin axis (<= 10), "
               "two-throw shrink %.1fx (>= 10)",
               ratio, misalign, shrink));
}

struct EulerErr {
    double yaw{0}, pitch{0}, roll{0};
    void worst(const EulerYPR& got, const EulerYPR& want) {
        yaw = std::max(yaw, std::abs(got.yaw - want.yaw));
        pitch = std::max(pitch, std::abs(got.pitch - want.pitch));
        roll = std::max(roll, std::abs(got.roll - want.roll));
    }
};

void quad_criterion() {
    const auto cfg = sim::preset_quadrotor(kQuadRotation, kOffset);
    const EulerYPR want{-15.0, 24.0, -64.0};

    const auto t0 = std::chrono::steady_clock::now();
    const PipelineResult exact = run_pipeline(cfg, {}, 301);
    const double runtime = seconds_since(t0);
    EulerErr e0;
    e0.worst(quat_to_euler(exact.frame.q_TU), want);

    EulerErr en;
    const int seeds = 5;
    for (int s = 0; s < seeds; ++s) {
        const PipelineResult noisy = run_pipeline(cfg, kFlightNoise, 310 + 20 * s);
        en.worst(quat_to_euler(noisy.frame.q_TU), want);
    }
    const EulerYPR got = quat_to_euler(exact.frame.q_TU);
    const bool ok = std::max({e0.yaw, e0.pitch, e0.roll}) < 0.5 && std::max({en.yaw, en.pitch, en.roll}) < 3.0 &&
                    runtime < 10.0;
    report(3, "quadrotor frame recovery", ok,
           fmt("noiseless (%.2f, %.2f, %.2f) deg, error %.2f/%.2f/%.2f (< 0.5); noisy worst of %d seeds "
               "%.2f/%.2f/%.2f (< 3); runtime %.2f s (< 10)",
               got.yaw, got.pitch, got.roll, e0.yaw, e0.pitch, e0.roll, seeds, en.yaw, en.pitch, en.roll, runtime));
}

void hex_criterion() {
    const auto cfg = sim::preset_hexarotor(45.0);
    const EulerYPR want{0.0, 0.0, 45.0};
    EulerErr e;
    const int seeds = 5;
    EulerYPR first{};
    for (int s = 0; s < seeds; ++s) {
        const PipelineResult p = run_pipeline(cfg, kFlightNoise, 401 + 20 * s);
        const EulerYPR got = quat_to_euler(p.frame.q_TU);
        if (s == 0) first = got;
        e.worst(got, want);
    }
    const bool ok = e.roll <= 2.0 && e.pitch <= 3.0 && e.yaw <= 2.0;
    report(4, "hexarotor optimal frame", ok,
           fmt("first seed (%.2f, %.2f, %.2f) deg; worst error of %d noisy seeds yaw %.2f (<= 2), pitch %.2f (<= 3), "
               "roll %.2f (<= 2)",
               first.yaw, first.pitch, first.roll, seeds, e.yaw, e.pitch, e.roll));
}

// 5 and 6 share the instances
void oracle_criteria() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(501);
    const double g = 9.81, bound = 3.0;
    int instances = 0, drawn = 0;
    double worst_obj = 0.0, worst_torque = 0.0, worst_grav = 0.0, worst_oracle_con = 0.0;
    int eig_violations = 0, eig_pairs = 0;
    double min_eig_gap = std::numeric_limits<double>::infinity();
    while (instances < 100 && drawn < 100000) {
        const int m = 4 + (drawn++ % 5);
        const EffectivenessModel model = bench::random_model(m, rng, 10.0, 100.0, bound);
        ThrustFrameSolution sol;
        try {
            sol = solve(model);
        } catch (const Error&) {
            continue;
        }
        OracleOptions oo;
        oo.seed = 1000 + drawn;
        const OracleSolution o = oracle_solve(model, oo);
        if (!o.feasible || o.u.cwiseAbs().maxCoeff() >= bound - 1e-6) continue;
        ++instances;

        const double obj = sol.u_star.squaredNorm();
        worst_obj = std::max(worst_obj, std::abs(obj - o.objective) / o.objective);
        worst_torque = std::max(worst_torque, (model.G1tau * sol.u_star).norm() /
                                                  (model.G1tau.norm() * sol.u_star.norm()));
        worst_grav = std::max(worst_grav, std::abs((model.G1f * sol.u_star).norm() - g) / g);
        worst_oracle_con = std::max(worst_oracle_con, std::abs((model.G1f * o.u).norm() - g) / g);

        const Eigen::MatrixXd N = nullspace_basis<double>(model.G1tau).N;
        const auto eig = oracle_eig(reduced_thrust_matrix<double>(model.G1f, N));
        for (Eigen::Index i = 1; i < eig.values.size(); ++i) {
            const Eigen::VectorXd dir = N * eig.vectors.col(i);
            const double f = (model.G1f * dir).norm();
            ++eig_pairs;
            if (!(f > 0.0)) continue; // zero eigenvalue: gravity unreachable, infinitely worse
            const Eigen::VectorXd u = (g / f) * dir;
            min_eig_gap = std::min(min_eig_gap, (u.squaredNorm() - obj) / obj);
            if (!(u.squaredNorm() > obj)) ++eig_violations;
        }
    }
    const double runtime = seconds_since(t0);
    const bool ok5 = instances >= 100 && worst_obj <= 1e-6 && worst_torque <= 1e-8 && worst_grav <= 1e-8 &&
                     worst_oracle_con <= 1e-8 && runtime < 60.0;
    report(5, "oracle equivalence", ok5,
           fmt("%d instances (m = 4..8, %d drawn), worst |obj rel diff| %.2e (<= 1e-6), torque %.2e (<= 1e-8), "
               "gravity %.2e (<= 1e-8), oracle gravity %.2e, runtime %.1f s (< 60)",
               instances, drawn, worst_obj, worst_torque, worst_grav, worst_oracle_con, runtime));
    report(6, "largest eigenpair is optimal", instances >= 100 && eig_violations == 0,
           fmt("%d smaller eigenpairs over %d instances, %d not strictly worse, min relative excess %.3e", eig_pairs,
               instances, eig_violations, min_eig_gap));
}

void power_iteration_criterion() {
    std::mt19937_64 rng(601);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    std::uniform_int_distribution<int> size(1, 29);
    int gapped = 0, gapped_bad = 0, tight = 0, tight_converged = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = size(rng);
        Eigen::MatrixXd M(n, n);
        for (int i = 0; i < M.size(); ++i) M.data()[i] = nd(rng);
        const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(M).householderQ();
        Eigen::VectorXd lam(n);
        for (int i = 0; i < n; ++i) lam[i] = 0.01 + ud(rng);
        if (n > 1 && trial % 2 == 0) {
            // separate the top pair by a chosen ratio, below and above 0.99
            std::sort(lam.data(), lam.data() + n, std::greater<>());
            lam[0] = lam[1] / (0.5 + 0.5 * ud(rng));
        }
        const Eigen::MatrixXd A = Q * lam.asDiagonal() * Q.transpose();
        const auto ref = oracle_eig(A);
        Eigen::VectorXd v0(n);
        for (int i = 0; i < n; ++i) v0[i] = nd(rng);
        const auto pi = power_iteration<double>(A, v0.normalized(), 20000, 1e-10);
        const double rel = std::abs(pi.lambda - ref.values[0]) / ref.values[0];
        const double ratio = n > 1 ? ref.values[1] / ref.values[0] : 0.0;
        if (ratio < 0.99) {
            ++gapped;
            worst = std::max(worst, rel);
            if (!(rel <= 1e-8)) ++gapped_bad;
        } else {
            ++tight;
            if (pi.converged) ++tight_converged;
        }
    }
    report(7, "power iteration vs Jacobi", gapped_bad == 0,
           fmt("%d matrices with gap ratio < 0.99: worst rel err %.2e (<= 1e-8), %d outside; %d with ratio >= 0.99 "
               "(%d converged anyway)",
               gapped, worst, gapped_bad, tight, tight_converged));
}

void bench_criterion() {
    bench::BenchOptions opts;
    opts.m_min = 4;
    opts.m_max = 32;
    opts.iters = 1000;
    const auto rows = bench::run_frame_benchmark(opts);
    auto row = [&](int m) -> const bench::BenchRow& { return rows[static_cast<std::size_t>(m - opts.m_min)]; };
    const double solve8 = row(8).solve.median_us;
    const double ratio = row(19).post_qr.median_us / row(11).post_qr.median_us;
    const bool ok = solve8 < 1000.0 && ratio >= 2.0 && ratio <= 8.0;
    report(9, "performance scaling", ok,
           fmt("solve median m=8 %.2f us (< 1000), m=4 %.2f us; post-QR median m=19/m=11 = %.2f/%.2f us, "
               "ratio %.2f (expected 4 within 2x: [2, 8])",
               solve8, row(4).solve.median_us, row(19).post_qr.median_us, row(11).post_qr.median_us, ratio));
}

void sim_criterion() {
    sim::ThrowScenario th;
    th.duration = 2.0;
    th.omega0_deg = {400.0, 400.0, 100.0};
    const auto res = sim::simulate(sim::preset_hexarotor(), th, 2000.0);
    double drift = 0.0;
    std::size_t first = res.log.size();
    for (std::size_t i = 0; i < res.log.size(); ++i) {
        if (!res.truth.airborne[i]) continue;
        if (first == res.log.size()) first = i;
        const Vec3& h0 = res.truth.angular_momentum_inertial[first];
        drift = std::max(drift, (res.truth.angular_momentum_inertial[i] - h0).norm() / h0.norm());
    }
    const double flight = res.truth.airborne_t1 - res.truth.airborne_t0;

    const auto cfg = sim::preset_quadrotor(kQuadRotation, kOffset);
    const auto thr = throw_log(cfg, {300.0, -200.0, 150.0});
    double resid = 0.0;
    for (std::size_t i = 0; i < thr.log.size(); ++i) {
        if (!thr.truth.airborne[i]) continue;
        const Mat3 X = lever_arm_matrix({thr.truth.omega[i], thr.truth.omega_dot[i]});
        resid = std::max(resid, (thr.log.rows[i].accel - X * thr.truth.r_true).norm());
    }
    report(10, "simulator physics", drift <= 1e-6 && flight >= 2.0 - 1e-3 && resid <= 1e-9,
           fmt("|H - H0|/|H0| max %.2e over %.3f s (<= 1e-6), max |y - X r| %.2e m/s^2 (<= 1e-9)", drift, flight,
               resid));
}

} // namespace

int main() {
    offset_criteria();
    degeneracy_criterion();
    quad_criterion();
    hex_criterion();
    oracle_criteria();
    power_iteration_criterion();
    bench_criterion();
    sim_criterion();
    std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
