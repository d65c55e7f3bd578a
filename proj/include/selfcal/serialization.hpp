#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "selfcal/effectiveness.hpp"
#include "selfcal/error.hpp"
#include "selfcal/geometry.hpp"
#include "selfcal/imu_offset.hpp"
#include "selfcal/qcqp_oracle.hpp"
#include "selfcal/sim.hpp"
#include "selfcal/thrust_frame.hpp"

namespace selfcal::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json vec(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

template <typename M>
json row_major(const M& mat) {
    json a = json::array();
    for (Eigen::Index r = 0; r < mat.rows(); ++r)
        for (Eigen::Index c = 0; c < mat.cols(); ++c) a.push_back(mat(r, c));
    return a;
}

inline json quat(const Quaternion& q) { return json::array({q.w, q.x, q.y, q.z}); }

inline const json& field(const json& j, const char* name) {
    if (!j.is_object() || !j.contains(name)) throw Error(ErrorKind::Parse, std::string("missing field '") + name + "'");
    return j.at(name);
}

inline double number(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_number()) throw Error(ErrorKind::Parse, std::string("field '") + name + "' must be a number");
    return v.get<double>();
}

inline std::vector<double> numbers(const json& j, const char* name, std::size_t expected) {
    const json& v = field(j, name);
    if (!v.is_array()) throw Error(ErrorKind::Parse, std::string("field '") + name + "' must be an array");
    if (expected != 0 && v.size() != expected) {
        throw Error(ErrorKind::Parse, std::string("field '") + name + "' must have " + std::to_string(expected) +
                                          " entries, got " + std::to_string(v.size()));
    }
    std::vector<double> out;
    for (const json& e : v) {
        if (!e.is_number()) throw Error(ErrorKind::Parse, std::string("field '") + name + "' has a non-numeric entry");
        out.push_back(e.get<double>());
    }
    return out;
}

inline Vec3 read_vec3(const json& j, const char* name) {
    const auto v = numbers(j, name, 3);
    return {v[0], v[1], v[2]};
}

inline Quaternion read_quat(const json& j, const char* name) {
    const auto v = numbers(j, name, 4);
    return {v[0], v[1], v[2], v[3]};
}

inline void check_version(const json& j) {
    if (j.contains("schema_version") && j.at("schema_version") != kSchemaVersion) {
        throw Error(ErrorKind::Parse, "unsupported schema_version " + j.at("schema_version").dump());
    }
}

} // namespace detail

inline json to_json(const OffsetEstimate& est, const ConfidenceEllipsoid* ellipsoid = nullptr) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["r_hat"] = detail::vec(est.r_hat);
    j["covariance"] = detail::row_major(est.covariance);
    j["se2"] = est.standard_error_sq;
    j["n_rows"] = est.n_rows;
    j["condition_number"] = est.condition_number;
    if (ellipsoid != nullptr) {
        json dirs = json::array();
        for (const Vec3& d : ellipsoid->axes_dirs) dirs.push_back(detail::vec(d));
        j["ellipsoid_95"] = {{"semi_axes", ellipsoid->semi_axes}, {"axes_dirs", dirs}};
    }
    return j;
}

inline OffsetEstimate offset_from_json(const json& j) {
    detail::check_version(j);
    OffsetEstimate est;
    est.r_hat = detail::read_vec3(j, "r_hat");
    const auto cov = detail::numbers(j, "covariance", 9);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) est.covariance(r, c) = cov[3 * r + c];
    est.standard_error_sq = detail::number(j, "se2");
    est.n_rows = static_cast<std::size_t>(detail::number(j, "n_rows"));
    est.condition_number = detail::number(j, "condition_number");
    return est;
}

inline json to_json(const EffectivenessModel& model) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["m"] = model.m();
    j["G1f"] = detail::row_major(model.G1f);
    j["G1tau"] = detail::row_major(model.G1tau);
    j["u_min"] = detail::vec(model.u_min);
    j["u_max"] = detail::vec(model.u_max);
    return j;
}

inline EffectivenessModel model_from_json(const json& j) {
    detail::check_version(j);
    const double m_raw = detail::number(j, "m");
    if (!(m_raw >= 1.0) || m_raw != std::floor(m_raw)) throw Error(ErrorKind::Parse, "field 'm' must be a positive integer");
    const auto m = static_cast<std::size_t>(m_raw);
    const auto f = detail::numbers(j, "G1f", 3 * m);
    const auto t = detail::numbers(j, "G1tau", 3 * m);
    const auto lo = detail::numbers(j, "u_min", m);
    const auto hi = detail::numbers(j, "u_max", m);
    EffectivenessModel model;
    model.G1f.resize(3, static_cast<Eigen::Index>(m));
    model.G1tau.resize(3, static_cast<Eigen::Index>(m));
    model.u_min.resize(static_cast<Eigen::Index>(m));
    model.u_max.resize(static_cast<Eigen::Index>(m));
    for (std::size_t c = 0; c < m; ++c) {
        for (std::size_t r = 0; r < 3; ++r) {
            model.G1f(r, c) = f[r * m + c];
            model.G1tau(r, c) = t[r * m + c];
        }
        model.u_min[c] = lo[c];
        model.u_max[c] = hi[c];
    }
    return model;
}

inline json to_json(const ThrustFrameSolution& sol) {
    const EulerYPR e = quat_to_euler(sol.q_TU);
    json j;
    j["schema_version"] = kSchemaVersion;
    j["u_star"] = detail::vec(sol.u_star);
    j["d"] = detail::vec(sol.d);
    j["lambda"] = sol.lambda;
    j["q_TU"] = detail::quat(sol.q_TU);
    j["euler_ypr_deg"] = json::array({e.yaw, e.pitch, e.roll});
    j["iterations_used"] = sol.iterations_used;
    j["converged"] = sol.converged;
    return j;
}

inline json to_json(const OracleSolution& sol) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["u"] = detail::vec(sol.u);
    j["objective"] = sol.feasible ? json(sol.objective) : json(nullptr);
    j["feasible"] = sol.feasible;
    j["kkt_residual"] = sol.feasible ? json(sol.kkt_residual) : json(nullptr);
    return j;
}

inline json to_json(const sim::VehicleConfig& cfg) {
    json motors = json::array();
    for (const sim::Motor& mo : cfg.motors) {
        motors.push_back({{"position", detail::vec(mo.position)},
                          {"axis", detail::vec(mo.axis)},
                          {"force_per_u", mo.force_per_u},
                          {"torque_per_u", mo.torque_per_u}});
    }
    json j;
    j["schema_version"] = kSchemaVersion;
    j["mass"] = cfg.mass;
    j["inertia"] = detail::row_major(cfg.inertia);
    j["motors"] = motors;
    j["imu"] = {{"r", detail::vec(cfg.imu.r)}, {"q_UB", detail::quat(cfg.imu.q_UB)}};
    j["u_bounds"] = json::array({cfg.u_min, cfg.u_max});
    j["linear_drag"] = cfg.linear_drag;
    return j;
}

inline sim::VehicleConfig vehicle_from_json(const json& j) {
    detail::check_version(j);
    sim::VehicleConfig cfg;
    cfg.mass = detail::number(j, "mass");
    const auto inertia = detail::numbers(j, "inertia", 9);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cfg.inertia(r, c) = inertia[3 * r + c];
    const json& motors = detail::field(j, "motors");
    if (!motors.is_array()) throw Error(ErrorKind::Parse, "field 'motors' must be an array");
    for (const json& mj : motors) {
        sim::Motor mo;
        mo.position = detail::read_vec3(mj, "position");
        mo.axis = detail::read_vec3(mj, "axis");
        mo.force_per_u = detail::number(mj, "force_per_u");
        mo.torque_per_u = detail::number(mj, "torque_per_u");
        cfg.motors.push_back(mo);
    }
    const json& imu = detail::field(j, "imu");
    cfg.imu.r = detail::read_vec3(imu, "r");
    cfg.imu.q_UB = detail::read_quat(imu, "q_UB");
    if (j.contains("u_bounds")) {
        const auto b = detail::numbers(j, "u_bounds", 2);
        cfg.u_min = b[0];
        cfg.u_max = b[1];
    }
    if (j.contains("linear_drag")) cfg.linear_drag = detail::number(j, "linear_drag");
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::Parse, std::string("vehicle config: ") + e.what());
    }
    return cfg;
}

inline json to_json(const sim::GroundTruth& gt) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["r_true"] = detail::vec(gt.r_true);
    j["q_UB"] = detail::quat(gt.q_UB);
    j["G1f_true"] = detail::row_major(gt.G1f_true);
    j["G1tau_true"] = detail::row_major(gt.G1tau_true);
    if (std::isnan(gt.airborne_t0)) {
        j["airborne"] = nullptr;
    } else {
        j["airborne"] = json::array({gt.airborne_t0, gt.airborne_t1});
    }
    return j;
}

// Writes to a sibling temporary and renames over the target.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    const std::filesystem::path target(path);
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write '" + tmp.string() + "'");
        out << content;
        if (!out) throw Error(ErrorKind::InvalidArgument, "write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, target);
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, path + ": " + e.what());
    }
}

} // namespace selfcal::io
