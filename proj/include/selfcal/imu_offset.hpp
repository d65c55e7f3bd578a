#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "selfcal/error.hpp"
#include "selfcal/geometry.hpp"
#include "selfcal/rigidbody.hpp"
#include "selfcal/sensor_log.hpp"

namespace selfcal {

// Normal equations of the stacked lever-arm regression. Constant size no
// matter how many rows went in; throws (or threads) combine by addition.
struct NormalEquations {
    Mat3 XtX{Mat3::Zero()};
    Vec3 Xty{Vec3::Zero()};
    double yty{0.0};
    std::size_t n_rows{0};

    void add(const RegressorRow& row) {
        XtX.noalias() += row.X.transpose() * row.X;
        Xty.noalias() += row.X.transpose() * row.y;
        yty += row.y.squaredNorm();
        ++n_rows;
    }

    NormalEquations& operator+=(const NormalEquations& o) {
        XtX += o.XtX;
        Xty += o.Xty;
        yty += o.yty;
        n_rows += o.n_rows;
        return *this;
    }

    friend NormalEquations operator+(NormalEquations a, const NormalEquations& b) { return a += b; }
};

[[nodiscard]] inline NormalEquations accumulate(std::span<const RegressorRow> rows) {
    NormalEquations acc;
    for (const RegressorRow& r : rows) acc.add(r);
    return acc;
}

struct OffsetEstimate {
    Vec3 r_hat{Vec3::Zero()};             // m, IMU frame
    Mat3 covariance{Mat3::Zero()};        // m^2
    double standard_error_sq{0.0};        // (m/s^2)^2
    std::size_t n_rows{0};
    double condition_number{std::numeric_limits<double>::infinity()};
};

struct ConfidenceEllipsoid {
    Vec3 center{Vec3::Zero()};
    std::array<double, 3> semi_axes{};    // m, descending
    std::array<Vec3, 3> axes_dirs{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
};

struct LsOptions {
    double condition_cap{1e10};
};

// Batch least squares from accumulated normal equations. The residual
// variance uses N = 3 * n_rows scalar equations and 3 parameters.
[[nodiscard]] inline OffsetEstimate solve_ls(const NormalEquations& acc, const LsOptions& opts = {}) {
    if (acc.n_rows < 4) {
        throw Error(ErrorKind::InsufficientExcitation,
                    "need at least 4 regressor rows, got " + std::to_string(acc.n_rows));
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(acc.XtX);
    const Vec3 ev = eig.eigenvalues(); // ascending
    const double cond = ev[0] > 0.0 ? ev[2] / ev[0] : std::numeric_limits<double>::infinity();
    if (!(ev[2] > 0.0) || !(cond <= opts.condition_cap)) {
        const Vec3 weak = eig.eigenvectors().col(0);
        std::ostringstream msg;
        msg << "X^T X condition number " << cond << " exceeds " << opts.condition_cap
            << "; weak direction (" << weak.x() << ", " << weak.y() << ", " << weak.z() << ")";
        throw Error(ErrorKind::InsufficientExcitation, msg.str());
    }

    OffsetEstimate est;
    est.n_rows = acc.n_rows;
    est.condition_number = cond;
    const Mat3 inv = eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
    est.r_hat = inv * acc.Xty;
    const double ssr = std::max(0.0, acc.yty - 2.0 * est.r_hat.dot(acc.Xty) + est.r_hat.dot(acc.XtX * est.r_hat));
    const double dof = 3.0 * static_cast<double>(acc.n_rows) - 3.0;
    est.standard_error_sq = ssr / dof;
    est.covariance = est.standard_error_sq * inv;
    return est;
}

struct RlsOffsetOptions {
    double forgetting{1.0};
    double p0{1.0}; // m^2
};

// Recursive form of the same estimator, one 3-row observation at a time.
class OffsetRls {
public:
    explicit OffsetRls(const RlsOffsetOptions& opts = {}) : opts_(opts) {
        if (!(opts.forgetting > 0.9 && opts.forgetting <= 1.0)) {
            throw Error(ErrorKind::InvalidArgument, "forgetting factor must lie in (0.9, 1]");
        }
        if (!(opts.p0 > 0.0)) throw Error(ErrorKind::InvalidArgument, "initial covariance must be positive");
        P_ = opts.p0 * Mat3::Identity();
    }

    void update(const RegressorRow& row) {
        const double lam = opts_.forgetting;
        const Mat3 PXt = P_ * row.X.transpose();
        const Mat3 S = lam * Mat3::Identity() + row.X * PXt;
        const Mat3 K = S.ldlt().solve(PXt.transpose()).transpose();
        r_ += K * (row.y - row.X * r_);
        P_ = (P_ - K * row.X * P_) / lam;
        P_ = 0.5 * (P_ + P_.transpose());
        ssr_ = lam * ssr_ + (row.y - row.X * r_).squaredNorm();
        weight_ = lam * weight_ + 1.0;
        ++n_rows_;
    }

    // Covariance is P scaled by the running residual variance once there are
    // enough rows to estimate it; before that it is the raw prior P.
    [[nodiscard]] OffsetEstimate estimate() const {
        OffsetEstimate est;
        est.r_hat = r_;
        est.n_rows = n_rows_;
        if (n_rows_ >= 4) {
            est.standard_error_sq = ssr_ / (3.0 * weight_ - 3.0);
            est.covariance = est.standard_error_sq * P_;
        } else {
            est.covariance = P_;
        }
        Eigen::SelfAdjointEigenSolver<Mat3> eig(P_);
        est.condition_number = eig.eigenvalues()[2] / eig.eigenvalues()[0];
        return est;
    }

    [[nodiscard]] const Mat3& P() const { return P_; }

private:
    RlsOffsetOptions opts_;
    Vec3 r_{Vec3::Zero()};
    Mat3 P_;
    double ssr_{0.0};
    double weight_{0.0};
    std::size_t n_rows_{0};
};

[[nodiscard]] inline OffsetEstimate solve_rls(std::span<const RegressorRow> rows, const RlsOffsetOptions& opts = {}) {
    OffsetRls rls(opts);
    for (const RegressorRow& r : rows) rls.update(r);
    return rls.estimate();
}

// Regularized lower incomplete gamma P(a, x): series for x < a + 1,
// Lentz continued fraction for the complement otherwise.
[[nodiscard]] inline double regularized_gamma_p(double a, double x) {
    if (x <= 0.0) return 0.0;
    const double log_prefix = a * std::log(x) - x - std::lgamma(a);
    if (x < a + 1.0) {
        double term = 1.0 / a;
        double sum = term;
        for (int n = 1; n < 1000; ++n) {
            term *= x / (a + n);
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-16) break;
        }
        return sum * std::exp(log_prefix);
    }
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return 1.0 - std::exp(log_prefix) * h;
}

[[nodiscard]] inline double chi_squared_cdf(double x, double dof) { return regularized_gamma_p(0.5 * dof, 0.5 * x); }

// Inverse CDF by bracketing bisection finished with Newton steps.
[[nodiscard]] inline double chi_squared_quantile(double p, double dof) {
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::InvalidArgument, "quantile level must lie in (0, 1)");
    double lo = 0.0, hi = std::max(1.0, dof);
    while (chi_squared_cdf(hi, dof) < p) hi *= 2.0;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (chi_squared_cdf(mid, dof) < p ? lo : hi) = mid;
    }
    double x = 0.5 * (lo + hi);
    const double k = 0.5 * dof;
    for (int i = 0; i < 5 && x > 0.0; ++i) {
        const double pdf = std::exp((k - 1.0) * std::log(x) - 0.5 * x - k * std::log(2.0) - std::lgamma(k));
        if (!(pdf > 0.0)) break;
        const double next = x - (chi_squared_cdf(x, dof) - p) / pdf;
        if (!(next > lo && next < hi)) break;
        x = next;
    }
    return x;
}

[[nodiscard]] inline ConfidenceEllipsoid confidence_ellipsoid(const OffsetEstimate& est, double level = 0.95) {
    const double q = chi_squared_quantile(level, 3.0);
    const Mat3 sym = 0.5 * (est.covariance + est.covariance.transpose());
    Eigen::SelfAdjointEigenSolver<Mat3> eig(sym);
    const Vec3 ev = eig.eigenvalues();
    if (!(ev[0] > 0.0)) throw Error(ErrorKind::NotPositiveDefinite, "offset covariance is not positive definite");
    ConfidenceEllipsoid e;
    e.center = est.r_hat;
    for (int i = 0; i < 3; ++i) {
        e.semi_axes[i] = std::sqrt(q * ev[2 - i]);
        e.axes_dirs[i] = eig.eigenvectors().col(2 - i);
    }
    return e;
}

struct Segment {
    std::size_t begin{0}; // first sample index
    std::size_t end{0};   // one past the last
    double mean_omega{0.0};

    [[nodiscard]] std::size_t size() const { return end - begin; }
};

struct FreefallOptions {
    double accel_thresh{1.5}; // m/s^2
    double min_len{0.3};      // s
};

// Maximal runs with |accel| below the threshold that last at least min_len.
[[nodiscard]] inline std::vector<Segment> detect_freefall_segments(const SensorLog& log,
                                                                  const FreefallOptions& opts = {}) {
    std::vector<Segment> out;
    const auto min_samples = static_cast<std::size_t>(std::ceil(opts.min_len * log.rate - 1e-9));
    std::size_t i = 0;
    const std::size_t n = log.size();
    while (i < n) {
        if (log.rows[i].accel.norm() >= opts.accel_thresh) {
            ++i;
            continue;
        }
        std::size_t j = i;
        double omega_sum = 0.0;
        while (j < n && log.rows[j].accel.norm() < opts.accel_thresh) omega_sum += log.rows[j++].gyro.norm();
        if (j - i >= std::max<std::size_t>(min_samples, 1)) {
            out.push_back({i, j, omega_sum / static_cast<double>(j - i)});
        }
        i = j;
    }
    return out;
}

struct RowBuildOptions {
    double cutoff_hz{30.0};
    double trim_s{0.05}; // filter start-up transient dropped at each segment start
};

// Regressor rows for one segment. Angular acceleration is the central
// difference of the raw gyro; X and y then pass through the same low-pass,
// so the filtered rows still satisfy y = X r for a rigid lever arm. The
// first trim_s of output is discarded while the filter forgets its priming
// sample.
[[nodiscard]] inline std::vector<RegressorRow> segment_rows(const SensorLog& log, const Segment& seg,
                                                           const RowBuildOptions& opts = {}) {
    if (seg.size() < 3) return {};
    const std::vector<Vec3> gyro = log.gyro_series(seg.begin, seg.end);
    const std::vector<Vec3> gyro_dot = central_difference<Vec3>(gyro, log.dt());
    using Stacked = Eigen::Matrix<double, 12, 1>;
    LowPass2<Stacked> lpf(opts.cutoff_hz, log.rate);
    const auto trim = static_cast<std::size_t>(std::llround(opts.trim_s * log.rate));
    std::vector<RegressorRow> rows;
    rows.reserve(seg.size());
    for (std::size_t k = 0; k < seg.size(); ++k) {
        const Mat3 X = lever_arm_matrix({gyro[k], gyro_dot[k]});
        Stacked raw;
        raw.head<9>() = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(X.data());
        raw.tail<3>() = log.rows[seg.begin + k].accel;
        const Stacked f = lpf(raw);
        if (k < trim) continue;
        RegressorRow row;
        row.X = Eigen::Map<const Mat3>(f.data());
        row.y = f.tail<3>();
        rows.push_back(row);
    }
    return rows;
}

enum class SegmentMode { Auto, Full };

struct OffsetPipelineOptions {
    SegmentMode mode{SegmentMode::Auto};
    FreefallOptions freefall{};
    RowBuildOptions rows{};
    LsOptions ls{};
};

struct LogAccumulation {
    NormalEquations acc;
    std::vector<Segment> segments;
};

[[nodiscard]] inline LogAccumulation accumulate_log(const SensorLog& log, const OffsetPipelineOptions& opts = {}) {
    LogAccumulation out;
    if (opts.mode == SegmentMode::Auto) {
        out.segments = detect_freefall_segments(log, opts.freefall);
    } else {
        const bool any_freefall = std::any_of(log.rows.begin(), log.rows.end(), [&](const LogSample& s) {
            return s.accel.norm() < opts.freefall.accel_thresh;
        });
        if (!any_freefall) throw Error(ErrorKind::NoFreefall, "log contains no free-fall samples");
        double omega_sum = 0.0;
        for (const LogSample& s : log.rows) omega_sum += s.gyro.norm();
        out.segments.push_back({0, log.size(), omega_sum / static_cast<double>(log.size())});
    }
    for (const Segment& seg : out.segments) {
        for (const RegressorRow& row : segment_rows(log, seg, opts.rows)) out.acc.add(row);
    }
    return out;
}

} // namespace selfcal
