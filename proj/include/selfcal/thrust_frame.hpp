#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "selfcal/effectiveness.hpp"
#include "selfcal/error.hpp"
#include "selfcal/geometry.hpp"

namespace selfcal {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// A P = Q R with Q square orthogonal, R upper trapezoidal and P the column
// permutation (perm[j] is the original index of column j).
template <typename Scalar>
struct ColPivQr {
    MatrixX<Scalar> Q;
    MatrixX<Scalar> R;
    Eigen::VectorXi perm;
};

// Householder QR with column pivoting, accumulating the complete Q. Same
// factorization as LAPACK xGEQP3 followed by xORGQR on all columns.
template <typename Scalar>
[[nodiscard]] ColPivQr<Scalar> column_pivoted_qr(const MatrixX<Scalar>& A) {
    const Eigen::Index n = A.rows();
    const Eigen::Index k = A.cols();
    ColPivQr<Scalar> f;
    f.R = A;
    f.Q = MatrixX<Scalar>::Identity(n, n);
    f.perm = Eigen::VectorXi::LinSpaced(static_cast<int>(k), 0, static_cast<int>(k) - 1);

    VectorX<Scalar> v(n);
    const Eigen::Index steps = std::min(n, k);
    for (Eigen::Index j = 0; j < steps; ++j) {
        Eigen::Index pivot = j;
        Scalar best = -1;
        for (Eigen::Index c = j; c < k; ++c) {
            const Scalar nrm = f.R.col(c).tail(n - j).squaredNorm();
            if (nrm > best) {
                best = nrm;
                pivot = c;
            }
        }
        if (pivot != j) {
            f.R.col(j).swap(f.R.col(pivot));
            std::swap(f.perm[j], f.perm[pivot]);
        }

        const Eigen::Index len = n - j;
        auto x = f.R.col(j).tail(len);
        const Scalar xnorm = x.norm();
        if (xnorm == Scalar(0)) continue;
        const Scalar alpha = x[0] > Scalar(0) ? -xnorm : xnorm;
        auto hv = v.head(len);
        hv = x;
        hv[0] -= alpha;
        const Scalar vnorm = hv.norm();
        if (vnorm == Scalar(0)) continue;
        hv /= vnorm;

        auto block = f.R.bottomRightCorner(len, k - j);
        block.noalias() -= (Scalar(2) * hv) * (hv.transpose() * block);
        auto qblock = f.Q.rightCols(len);
        qblock.noalias() -= (qblock * (Scalar(2) * hv)) * hv.transpose();
        x.tail(len - 1).setZero();
    }
    return f;
}

template <typename Scalar>
struct NullspaceBasis {
    MatrixX<Scalar> N; // m x (m - 3), orthonormal columns spanning null(G1tau)
    Scalar rank_check{0}; // |R(2,2)|, the smallest retained pivot
};

// Orthonormal basis of null(G1tau) from the trailing columns of the complete
// Q factor of the column-pivoted QR of G1tau^T.
template <typename Scalar>
[[nodiscard]] NullspaceBasis<Scalar> nullspace_basis(const MatrixX<Scalar>& G1tau) {
    if (G1tau.rows() != 3) throw Error(ErrorKind::InvalidArgument, "torque effectiveness must have 3 rows");
    const Eigen::Index m = G1tau.cols();
    if (m < 4) throw Error(ErrorKind::InvalidArgument, "need at least 4 motors for a torque nullspace");
    const ColPivQr<Scalar> qr = column_pivoted_qr<Scalar>(G1tau.transpose());
    const Scalar r0 = std::abs(qr.R(0, 0));
    const Scalar r2 = std::abs(qr.R(2, 2));
    if (!(r0 > Scalar(0)) || !(r2 >= Scalar(1e-6) * r0)) {
        std::ostringstream msg;
        msg << "torque effectiveness rank < 3 (|R33|/|R11| = " << (r0 > 0 ? r2 / r0 : Scalar(0)) << ")";
        throw Error(ErrorKind::DegenerateTorqueEffectiveness, msg.str());
    }
    return {qr.Q.rightCols(m - 3), r2};
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

// Deterministic pseudo-random unit vector; the same counter always gives the
// same vector.
template <typename Scalar>
[[nodiscard]] VectorX<Scalar> restart_vector(Eigen::Index n, std::uint64_t counter) {
    VectorX<Scalar> v(n);
    std::uint64_t state = detail::splitmix64(counter * 0x632be59bd9b4e019ULL + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        state = detail::splitmix64(state);
        v[i] = static_cast<Scalar>(static_cast<double>(state >> 11) * 0x1.0p-53 * 2.0 - 1.0);
    }
    const Scalar nrm = v.norm();
    if (!(nrm > Scalar(0))) {
        v.setZero();
        v[0] = 1;
        return v;
    }
    return v / nrm;
}

template <typename Scalar>
struct PowerIterationResult {
    Scalar lambda{0};
    VectorX<Scalar> v;
    bool converged{false};
    int iterations{0};
    int restarts{0};
};

// Dominant eigenpair of a symmetric PSD matrix with v <- A v / |A v|, in
// place: `v` holds the start vector on entry and the estimate on exit, `Av`
// is scratch. The residual is tested before each update, so an already
// converged v comes back untouched. A collapsing iterate is replaced by
// restart_vector.
template <typename Scalar>
PowerIterationResult<Scalar> power_iteration_inplace(const MatrixX<Scalar>& A, VectorX<Scalar>& v,
                                                     VectorX<Scalar>& Av, int max_iters, Scalar tol) {
    const Eigen::Index n = A.rows();
    PowerIterationResult<Scalar> out;
    const Scalar a_norm = A.norm();
    std::uint64_t restart_counter = 0;
    const Scalar v_norm = v.size() == n ? v.norm() : Scalar(0);
    if (v_norm > Scalar(0)) {
        v /= v_norm;
    } else {
        v = restart_vector<Scalar>(n, restart_counter++);
    }
    Av.resize(n);
    for (int it = 0;; ++it) {
        Av.noalias() = A * v;
        const Scalar av_norm = Av.norm();
        if (!(av_norm > Scalar(1e-12) * a_norm)) {
            if (it >= max_iters) {
                out.lambda = v.dot(Av);
                break;
            }
            v = restart_vector<Scalar>(n, restart_counter++);
            ++out.restarts;
            ++out.iterations;
            continue;
        }
        const Scalar lambda = v.dot(Av);
        out.lambda = lambda;
        if ((Av - lambda * v).norm() <= tol * lambda) {
            out.converged = true;
            break;
        }
        if (it >= max_iters) break;
        v = Av / av_norm;
        ++out.iterations;
    }
    return out;
}

template <typename Scalar>
[[nodiscard]] PowerIterationResult<Scalar> power_iteration(const MatrixX<Scalar>& A, const VectorX<Scalar>& v0,
                                                           int max_iters, Scalar tol) {
    VectorX<Scalar> v = v0;
    VectorX<Scalar> Av;
    PowerIterationResult<Scalar> out = power_iteration_inplace<Scalar>(A, v, Av, max_iters, tol);
    out.v = std::move(v);
    return out;
}

struct SolveOptions {
    double g{9.81};          // m/s^2
    int max_iters{100};
    double tol{1e-10};
    double bound_slack{1e-9};
};

struct ThrustFrameSolution {
    Eigen::VectorXd u_star;
    Vec3 d{Vec3::Zero()};      // m/s^2, IMU frame
    double lambda{0.0};        // largest eigenvalue of the reduced matrix
    Quaternion q_TU;           // maps IMU-frame vectors into the thrust frame
    int iterations_used{0};
    bool converged{false};
    Eigen::VectorXd eta;       // nullspace coordinates of the eigenvector
};

// A = (G1f N)^T (G1f N): the thrust metric restricted to the torque nullspace.
// The _into form writes into caller-owned storage and does not allocate once
// B and A have the right shape.
template <typename Scalar>
void reduced_thrust_matrix_into(const MatrixX<Scalar>& G1f, const MatrixX<Scalar>& N, MatrixX<Scalar>& B,
                                MatrixX<Scalar>& A) {
    B.resize(G1f.rows(), N.cols());
    B.noalias() = G1f.lazyProduct(N);
    A.resize(N.cols(), N.cols());
    A.noalias() = B.transpose().lazyProduct(B);
}

template <typename Scalar>
[[nodiscard]] MatrixX<Scalar> reduced_thrust_matrix(const MatrixX<Scalar>& G1f, const MatrixX<Scalar>& N) {
    MatrixX<Scalar> B, A;
    reduced_thrust_matrix_into<Scalar>(G1f, N, B, A);
    return A;
}

namespace detail {

inline bool within_bounds(const Eigen::VectorXd& u, const EffectivenessModel& model, double slack) {
    return ((u - model.u_min).array() >= -slack).all() && ((model.u_max - u).array() >= -slack).all();
}

inline ThrustFrameSolution assemble(const EffectivenessModel& model, const Eigen::MatrixXd& N,
                                    const PowerIterationResult<double>& pi, const SolveOptions& opts) {
    if (!(pi.lambda > 1e-12)) {
        throw Error(ErrorKind::NoThrustAuthority, "largest eigenvalue " + std::to_string(pi.lambda));
    }
    ThrustFrameSolution sol;
    sol.lambda = pi.lambda;
    sol.eta = (opts.g / std::sqrt(pi.lambda)) * pi.v;
    const Eigen::VectorXd u = N * sol.eta;
    const bool plus_ok = within_bounds(u, model, opts.bound_slack);
    const bool minus_ok = within_bounds(-u, model, opts.bound_slack);
    if (!plus_ok && !minus_ok) {
        throw Error(ErrorKind::NotHoverCapable, "neither sign of the minimum-norm input respects the bounds");
    }
    double sign = plus_ok ? 1.0 : -1.0;
    if (plus_ok && minus_ok && u.sum() < 0.0) sign = -1.0;
    sol.u_star = sign * u;
    sol.eta *= sign;
    sol.d = model.G1f * sol.u_star;
    sol.q_TU = canonical(shortest_rotation(sol.d, Vec3(0.0, 0.0, -opts.g)));
    sol.iterations_used = pi.iterations;
    sol.converged = pi.converged;
    return sol;
}

} // namespace detail

// Minimum-norm torque-free input producing specific force of magnitude g, and
// the rotation carrying its direction onto (0, 0, -g). A warm start seeds the
// power iteration with the previous input direction projected onto the new
// nullspace.
[[nodiscard]] inline ThrustFrameSolution solve(const EffectivenessModel& model, const SolveOptions& opts = {},
                                               const ThrustFrameSolution* warm_start = nullptr) {
    model.validate();
    if (!(opts.g > 0.0)) throw Error(ErrorKind::InvalidArgument, "g must be positive");
    const NullspaceBasis<double> nb = nullspace_basis<double>(model.G1tau);
    const Eigen::MatrixXd A = reduced_thrust_matrix<double>(model.G1f, nb.N);

    Eigen::VectorXd v0;
    if (warm_start != nullptr && warm_start->u_star.size() == model.m()) {
        v0 = nb.N.transpose() * warm_start->u_star;
        if (!(v0.norm() > 1e-12 * warm_start->u_star.norm())) v0.resize(0);
    }
    if (v0.size() == 0) v0 = restart_vector<double>(A.rows(), 0);
    const PowerIterationResult<double> pi = power_iteration<double>(A, v0, opts.max_iters, opts.tol);
    return detail::assemble(model, nb.N, pi, opts);
}

// Spreads the power iteration over repeated calls, a few steps at a time, as
// the effectiveness estimate evolves. One instance per vehicle.
class IncrementalThrustFrameSolver {
public:
    explicit IncrementalThrustFrameSolver(const SolveOptions& opts = {}) : opts_(opts) {}

    // Returns nullopt while the model is not yet solvable (rank-deficient
    // torque map, no thrust authority, or no feasible sign); last_error()
    // then tells why.
    std::optional<ThrustFrameSolution> step(const EffectivenessModel& model, int budget_iters) {
        try {
            model.validate();
            NullspaceBasis<double> nb = nullspace_basis<double>(model.G1tau);
            const Eigen::MatrixXd A = reduced_thrust_matrix<double>(model.G1f, nb.N);
            Eigen::VectorXd v0;
            if (v_.size() == A.rows() && N_.rows() == nb.N.rows() && N_.cols() == nb.N.cols()) {
                if (N_ == nb.N) {
                    v0 = v_;
                } else {
                    v0 = nb.N.transpose() * (N_ * v_);
                }
            }
            if (!(v0.size() == A.rows() && v0.norm() > 1e-12)) v0 = restart_vector<double>(A.rows(), 0);
            const PowerIterationResult<double> pi = power_iteration<double>(A, v0, budget_iters, opts_.tol);
            v_ = pi.v;
            N_ = std::move(nb.N);
            ThrustFrameSolution sol = detail::assemble(model, N_, pi, opts_);
            last_error_.reset();
            return sol;
        } catch (const Error& e) {
            last_error_ = e.kind();
            return std::nullopt;
        }
    }

    [[nodiscard]] std::optional<ErrorKind> last_error() const { return last_error_; }

    void reset() {
        v_.resize(0);
        N_.resize(0, 0);
        last_error_.reset();
    }

private:
    SolveOptions opts_;
    Eigen::VectorXd v_;
    Eigen::MatrixXd N_;
    std::optional<ErrorKind> last_error_;
};

} // namespace selfcal
