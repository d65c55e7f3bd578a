#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "selfcal/effectiveness.hpp"
#include "selfcal/error.hpp"
#include "selfcal/thrust_frame.hpp"

namespace selfcal {

struct EigenDecomposition {
    Eigen::VectorXd values;  // descending
    Eigen::MatrixXd vectors; // column i pairs with values[i]
};

// Cyclic Jacobi rotations on a dense symmetric matrix. Slow and simple; used
// as the reference for power_iteration.
[[nodiscard]] inline EigenDecomposition oracle_eig(const Eigen::MatrixXd& A) {
    if (A.rows() != A.cols()) throw Error(ErrorKind::InvalidArgument, "oracle_eig needs a square matrix");
    const Eigen::Index n = A.rows();
    const double scale = std::max(A.norm(), std::numeric_limits<double>::min());
    if ((A - A.transpose()).norm() > 1e-9 * scale) {
        throw Error(ErrorKind::InvalidArgument, "oracle_eig needs a symmetric matrix");
    }
    Eigen::MatrixXd a = 0.5 * (A + A.transpose());
    Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(off) <= 1e-17 * scale) break;

        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });
    EigenDecomposition out;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values[i] = a(order[i], order[i]);
        out.vectors.col(i) = V.col(order[i]);
    }
    return out;
}

struct OracleSolution {
    Eigen::VectorXd u;
    double objective{std::numeric_limits<double>::infinity()};
    bool feasible{false};
    double kkt_residual{std::numeric_limits<double>::infinity()};
    int starts_converged{0};
};

struct OracleOptions {
    double g{9.81};
    int n_starts{64};
    std::uint64_t seed{1};
    int max_iters{500};
    double bound_slack{1e-9};
};

// Multi-start projected gradient descent on u^T W u over the ellipsoid
// u^T G1f^T G1f u = g^2 inside null(G1tau). Each iterate is a gradient step
// in the tangent space followed by rescaling back onto the constraint;
// backtracking keeps the objective decreasing. Bounds are checked at the end
// (clip-and-reject), trying both signs.
[[nodiscard]] inline OracleSolution oracle_solve(const EffectivenessModel& model, const Eigen::VectorXd& W,
                                                 const OracleOptions& opts = {}) {
    model.validate();
    if (W.size() != model.m()) throw Error(ErrorKind::InvalidArgument, "weight vector size must equal motor count");
    const NullspaceBasis<double> nb = nullspace_basis<double>(model.G1tau);
    const Eigen::MatrixXd& N = nb.N;
    const Eigen::MatrixXd A = reduced_thrust_matrix<double>(model.G1f, N);
    const Eigen::MatrixXd H = N.transpose() * W.asDiagonal() * N;
    const Eigen::Index k = N.cols();
    const double g2 = opts.g * opts.g;
    const double a_scale = std::max(A.norm(), std::numeric_limits<double>::min());
    const double h_scale = std::max(H.norm(), std::numeric_limits<double>::min());

    auto project = [&](Eigen::VectorXd& eta) {
        const double q = eta.dot(A * eta);
        if (!(q > 1e-14 * a_scale * eta.squaredNorm())) return false;
        eta *= opts.g / std::sqrt(q);
        return true;
    };
    auto objective = [&](const Eigen::VectorXd& eta) { return eta.dot(H * eta); };

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    OracleSolution best;
    Eigen::VectorXd best_eta;

    for (int s = 0; s < opts.n_starts; ++s) {
        Eigen::VectorXd eta(k);
        for (Eigen::Index i = 0; i < k; ++i) eta[i] = normal(rng);
        if (!project(eta)) continue;

        double f = objective(eta);
        double step = 1.0 / h_scale;
        bool stationary = false;
        for (int it = 0; it < opts.max_iters; ++it) {
            const Eigen::VectorXd grad = 2.0 * (H * eta);
            const Eigen::VectorXd normal_dir = A * eta;
            const Eigen::VectorXd tangent = grad - (grad.dot(normal_dir) / normal_dir.squaredNorm()) * normal_dir;
            const double tn2 = tangent.squaredNorm();
            if (tn2 <= 1e-30 * grad.squaredNorm()) {
                stationary = true;
                break;
            }
            bool accepted = false;
            step *= 4.0;
            for (int halving = 0; halving < 80; ++halving) {
                Eigen::VectorXd trial = eta - step * tangent;
                if (project(trial)) {
                    const double ft = objective(trial);
                    if (ft <= f - 1e-4 * step * tn2) {
                        eta = std::move(trial);
                        f = ft;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if (!accepted) {
                stationary = true;
                break;
            }
        }
        if (stationary) ++best.starts_converged;

        for (double sign : {1.0, -1.0}) {
            const Eigen::VectorXd u = sign * (N * eta);
            const bool in_bounds = ((u - model.u_min).array() >= -opts.bound_slack).all() &&
                                   ((model.u_max - u).array() >= -opts.bound_slack).all();
            if (in_bounds && f < best.objective) {
                best.objective = f;
                best.u = u;
                best.feasible = true;
                best_eta = sign * eta;
            }
        }
    }

    if (best.feasible) {
        const Eigen::VectorXd Hh = 2.0 * (H * best_eta);
        const Eigen::VectorXd Ah = 2.0 * (A * best_eta);
        const double mu = -Hh.dot(Ah) / Ah.squaredNorm();
        const double stationarity = (Hh + mu * Ah).norm() / std::max(Hh.norm(), 1e-300);
        const double gravity = std::abs((model.G1f * best.u).squaredNorm() - g2) / g2;
        const double torque = (model.G1tau * best.u).norm() / std::max(model.G1tau.norm() * best.u.norm(), 1e-300);
        best.kkt_residual = std::max({stationarity, gravity, torque});
    }
    return best;
}

[[nodiscard]] inline OracleSolution oracle_solve(const EffectivenessModel& model, const OracleOptions& opts = {}) {
    return oracle_solve(model, Eigen::VectorXd::Ones(model.m()), opts);
}

} // namespace selfcal
