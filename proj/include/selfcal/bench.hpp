#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "selfcal/effectiveness.hpp"
#include "selfcal/thrust_frame.hpp"

namespace selfcal::bench {

// Gaussian effectiveness model with generous symmetric input bounds. Rank
// deficiency has probability zero; callers that need an interior optimum
// should still check it.
[[nodiscard]] inline EffectivenessModel random_model(int m, std::mt19937_64& rng, double force_scale = 10.0,
                                                     double torque_scale = 100.0, double bound = 3.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    EffectivenessModel model;
    model.G1f.resize(3, m);
    model.G1tau.resize(3, m);
    for (int c = 0; c < m; ++c) {
        for (int r = 0; r < 3; ++r) {
            model.G1f(r, c) = force_scale * normal(rng);
            model.G1tau(r, c) = torque_scale * normal(rng);
        }
    }
    model.u_min = Eigen::VectorXd::Constant(m, -bound);
    model.u_max = Eigen::VectorXd::Constant(m, bound);
    return model;
}

struct StageStats {
    double median_us{0.0};
    double p95_us{0.0};
};

struct BenchRow {
    int m{0};
    StageStats qr;        // nullspace basis
    StageStats products;  // reduced matrix A
    StageStats power;     // fixed-count power iteration
    StageStats post_qr;   // products + power
    StageStats solve;     // complete solve() with default options
};

struct BenchOptions {
    int m_min{4};
    int m_max{32};
    int iters{1000};       // timed samples per m, first 10% discarded
    int reps{16};          // calls per timed sample
    int power_iters{3};
    std::uint64_t seed{7};
};

namespace detail {

inline StageStats stats(std::vector<double> samples_us) {
    const std::size_t skip = samples_us.size() / 10;
    samples_us.erase(samples_us.begin(), samples_us.begin() + static_cast<std::ptrdiff_t>(skip));
    std::sort(samples_us.begin(), samples_us.end());
    StageStats s;
    if (samples_us.empty()) return s;
    s.median_us = samples_us[samples_us.size() / 2];
    const std::size_t idx95 = std::min(samples_us.size() - 1, static_cast<std::size_t>(0.95 * samples_us.size()));
    s.p95_us = samples_us[idx95];
    return s;
}

template <typename F>
double time_us(int reps, F&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::micro>(t1 - t0).count() / reps;
}

inline volatile double sink = 0.0;

} // namespace detail

[[nodiscard]] inline std::vector<BenchRow> run_frame_benchmark(const BenchOptions& opts) {
    std::vector<BenchRow> rows;
    std::mt19937_64 rng(opts.seed);
    for (int m = opts.m_min; m <= opts.m_max; ++m) {
        EffectivenessModel model = random_model(m, rng);
        model.u_min.setConstant(-1e6);
        model.u_max.setConstant(1e6);
        const NullspaceBasis<double> nb = nullspace_basis<double>(model.G1tau);
        const Eigen::MatrixXd A = reduced_thrust_matrix<double>(model.G1f, nb.N);
        const Eigen::VectorXd v0 = restart_vector<double>(A.rows(), 0);
        Eigen::MatrixXd B_ws, A_ws;
        Eigen::VectorXd v_ws(v0.size()), Av_ws(v0.size());

        std::vector<double> qr, prod, power, post, full;
        for (int it = 0; it < opts.iters; ++it) {
            qr.push_back(detail::time_us(opts.reps, [&] {
                detail::sink = detail::sink + nullspace_basis<double>(model.G1tau).rank_check;
            }));
            prod.push_back(detail::time_us(opts.reps, [&] {
                reduced_thrust_matrix_into<double>(model.G1f, nb.N, B_ws, A_ws);
                detail::sink = detail::sink + A_ws(0, 0);
            }));
            power.push_back(detail::time_us(opts.reps, [&] {
                v_ws = v0;
                detail::sink = detail::sink + power_iteration_inplace<double>(A, v_ws, Av_ws, opts.power_iters, 0.0).lambda;
            }));
            post.push_back(detail::time_us(opts.reps, [&] {
                reduced_thrust_matrix_into<double>(model.G1f, nb.N, B_ws, A_ws);
                v_ws = v0;
                detail::sink = detail::sink + power_iteration_inplace<double>(A_ws, v_ws, Av_ws, opts.power_iters, 0.0).lambda;
            }));
            full.push_back(detail::time_us(opts.reps, [&] { detail::sink = detail::sink + solve(model).lambda; }));
        }
        rows.push_back({m, detail::stats(qr), detail::stats(prod), detail::stats(power), detail::stats(post),
                        detail::stats(full)});
    }
    return rows;
}

[[nodiscard]] inline std::string format_markdown(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(3);
    out << "| m | qr med us | qr p95 us | products med us | products p95 us | power med us | power p95 us | "
           "post-qr med us | post-qr p95 us | solve med us | solve p95 us |\n";
    out << "|---|---|---|---|---|---|---|---|---|---|---|\n";
    for (const BenchRow& r : rows) {
        out << "| " << r.m << " | " << r.qr.median_us << " | " << r.qr.p95_us << " | " << r.products.median_us << " | "
            << r.products.p95_us << " | " << r.power.median_us << " | " << r.power.p95_us << " | "
            << r.post_qr.median_us << " | " << r.post_qr.p95_us << " | " << r.solve.median_us << " | "
            << r.solve.p95_us << " |\n";
    }
    return out.str();
}

[[nodiscard]] inline std::string format_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out.precision(6);
    out << "m,qr_median_us,qr_p95_us,products_median_us,products_p95_us,power_median_us,power_p95_us,"
           "post_qr_median_us,post_qr_p95_us,solve_median_us,solve_p95_us\n";
    for (const BenchRow& r : rows) {
        out << r.m << ',' << r.qr.median_us << ',' << r.qr.p95_us << ',' << r.products.median_us << ','
            << r.products.p95_us << ',' << r.power.median_us << ',' << r.power.p95_us << ',' << r.post_qr.median_us
            << ',' << r.post_qr.p95_us << ',' << r.solve.median_us << ',' << r.solve.p95_us << '\n';
    }
    return out.str();
}

} // namespace selfcal::bench
