#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "selfcal/error.hpp"
#include "selfcal/geometry.hpp"

namespace selfcal {

struct LogSample {
    double t{0.0};                      // s
    Vec3 gyro{Vec3::Zero()};            // rad/s, IMU frame
    Vec3 accel{Vec3::Zero()};           // m/s^2, specific force at the IMU, IMU frame
    Eigen::VectorXd u;                  // normalized motor inputs
};

struct SensorLog {
    double rate{2000.0}; // Hz
    int motor_count{0};
    std::vector<LogSample> rows;

    [[nodiscard]] double dt() const { return 1.0 / rate; }
    [[nodiscard]] std::size_t size() const { return rows.size(); }
    [[nodiscard]] bool empty() const { return rows.empty(); }

    [[nodiscard]] std::vector<Vec3> gyro_series(std::size_t begin, std::size_t end) const {
        std::vector<Vec3> out;
        out.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) out.push_back(rows[i].gyro);
        return out;
    }
};

inline constexpr int kLogSchemaVersion = 1;

namespace csv {

inline void append_value(std::string& line, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    line += buf;
}

inline std::string to_string(const SensorLog& log) {
    std::string out;
    out.reserve(log.rows.size() * (12 + log.motor_count) * 14 + 256);
    out += "# selfcal sensor log\n";
    out += "# schema_version: " + std::to_string(kLogSchemaVersion) + "\n";
    out += "# rate_hz: ";
    append_value(out, log.rate);
    out += "\n";
    out += "# units: t s, g* rad/s, a* m/s^2 (specific force at IMU), u* normalized\n";
    out += "# sign: body z down; a level vehicle at rest reads a = (0, 0, -9.81)\n";
    out += "t,gx,gy,gz,ax,ay,az";
    for (int i = 1; i <= log.motor_count; ++i) out += ",u" + std::to_string(i);
    out += "\n";
    for (const LogSample& s : log.rows) {
        append_value(out, s.t);
        for (int k = 0; k < 3; ++k) {
            out += ',';
            append_value(out, s.gyro[k]);
        }
        for (int k = 0; k < 3; ++k) {
            out += ',';
            append_value(out, s.accel[k]);
        }
        for (int k = 0; k < log.motor_count; ++k) {
            out += ',';
            append_value(out, s.u[k]);
        }
        out += '\n';
    }
    return out;
}

namespace detail {

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& s, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (trim(s.substr(used)).empty() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": bad number '" + s + "'");
}

} // namespace detail

// Reads the log format written by to_string. Validates the header, column
// count and uniform monotone timestamps.
inline SensorLog from_stream(std::istream& in) {
    SensorLog log;
    bool have_rate = false;
    bool have_header = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("rate_hz:");
            if (pos != std::string::npos) {
                log.rate = detail::parse_double(detail::trim(line.substr(pos + 8)), line_no);
                have_rate = true;
            }
            const auto ver = line.find("schema_version:");
            if (ver != std::string::npos) {
                const int v = static_cast<int>(detail::parse_double(detail::trim(line.substr(ver + 15)), line_no));
                if (v != kLogSchemaVersion) {
                    throw Error(ErrorKind::Parse, "unsupported log schema_version " + std::to_string(v));
                }
            }
            continue;
        }
        auto fields = detail::split(line);
        if (!have_header) {
            static const char* expected[] = {"t", "gx", "gy", "gz", "ax", "ay", "az"};
            if (fields.size() < 7) throw Error(ErrorKind::Parse, "header must start with t,gx,gy,gz,ax,ay,az");
            for (int k = 0; k < 7; ++k) {
                if (detail::trim(fields[k]) != expected[k]) {
                    throw Error(ErrorKind::Parse, "header column " + std::to_string(k + 1) + " should be '" +
                                                      expected[k] + "', got '" + fields[k] + "'");
                }
            }
            for (std::size_t k = 7; k < fields.size(); ++k) {
                if (detail::trim(fields[k]) != "u" + std::to_string(k - 6)) {
                    throw Error(ErrorKind::Parse, "header column " + std::to_string(k + 1) + " should be u" +
                                                      std::to_string(k - 6));
                }
            }
            log.motor_count = static_cast<int>(fields.size()) - 7;
            have_header = true;
            continue;
        }
        if (static_cast<int>(fields.size()) != 7 + log.motor_count) {
            throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ": expected " +
                                              std::to_string(7 + log.motor_count) + " columns, got " +
                                              std::to_string(fields.size()));
        }
        LogSample s;
        s.t = detail::parse_double(fields[0], line_no);
        for (int k = 0; k < 3; ++k) s.gyro[k] = detail::parse_double(fields[1 + k], line_no);
        for (int k = 0; k < 3; ++k) s.accel[k] = detail::parse_double(fields[4 + k], line_no);
        s.u.resize(log.motor_count);
        for (int k = 0; k < log.motor_count; ++k) s.u[k] = detail::parse_double(fields[7 + k], line_no);
        log.rows.push_back(std::move(s));
    }
    if (!have_header) throw Error(ErrorKind::Parse, "missing column header");

    if (!have_rate && log.rows.size() >= 2) log.rate = 1.0 / (log.rows[1].t - log.rows[0].t);
    if (!(log.rate > 0.0)) throw Error(ErrorKind::Parse, "rate_hz must be positive");
    const double dt = 1.0 / log.rate;
    for (std::size_t i = 1; i < log.rows.size(); ++i) {
        const double step = log.rows[i].t - log.rows[i - 1].t;
        if (!(step > 0.0) || std::abs(step - dt) > 1e-3 * dt + 1e-8) {
            throw Error(ErrorKind::Parse, "non-uniform timestamps near t = " + std::to_string(log.rows[i].t));
        }
    }
    return log;
}

inline SensorLog from_string(const std::string& text) {
    std::istringstream in(text);
    return from_stream(in);
}

inline SensorLog read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open log '" + path + "'");
    return from_stream(in);
}

} // namespace csv
} // namespace selfcal
