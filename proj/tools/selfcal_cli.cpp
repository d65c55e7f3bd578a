// selfcal: simulate logs, estimate the IMU offset, identify G1 and solve for
// the thrust frame.
//
// exit codes: 0 ok, 1 usage, 2 data or numerical error

#include <selfcal/selfcal.hpp>

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace selfcal;
using io::json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& text, const std::string& flag, std::size_t expected) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError(flag + ": '" + item + "' is not a number");
        }
    }
    if (out.size() != expected) {
        throw UsageError(flag + ": expected " + std::to_string(expected) + " comma-separated values, got " +
                         std::to_string(out.size()));
    }
    return out;
}

Vec3 parse_vec3(const std::string& text, const std::string& flag) {
    const auto v = parse_list(text, flag, 3);
    return {v[0], v[1], v[2]};
}

std::pair<int, int> parse_range(const std::string& text) {
    const auto dots = text.find("..");
    try {
        if (dots == std::string::npos) {
            const int m = std::stoi(text);
            return {m, m};
        }
        return {std::stoi(text.substr(0, dots)), std::stoi(text.substr(dots + 2))};
    } catch (const std::exception&) {
        throw UsageError("--motors: expected a..b, got '" + text + "'");
    }
}

// JSON goes to the file when one is given, otherwise to stdout.
void emit(const json& j, const std::string& path) {
    const std::string text = j.dump(2) + "\n";
    if (path.empty()) {
        std::cout << text;
    } else {
        io::write_file_atomic(path, text);
    }
}

std::ostream& report(const std::string& out_path) { return out_path.empty() ? std::cerr : std::cout; }

std::string fmt(double v, int prec = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

std::string fmt_vec(const Vec3& v, int prec = 6) {
    return "(" + fmt(v.x(), prec) + ", " + fmt(v.y(), prec) + ", " + fmt(v.z(), prec) + ")";
}

double angle_between_deg(const Quaternion& a, const Quaternion& b) {
    const double d = std::abs(a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z);
    return 2.0 * std::acos(std::min(1.0, d)) * kRadToDeg;
}

// ---- sim -------------------------------------------------------------------

struct SimArgs {
    std::string config;
    std::string preset;
    double rate{2000.0};
    double noise_gyro{0.0};
    double noise_accel{0.0};
    std::uint64_t seed{0};
    std::string out;
    std::string truth;
};

void add_sim_common(CLI::App* cmd, SimArgs& a) {
    cmd->add_option("--config", a.config, "vehicle config JSON");
    cmd->add_option("--preset", a.preset, "built-in vehicle instead of --config")
        ->check(CLI::IsMember({"quad", "hex"}));
    cmd->add_option("--rate", a.rate, "log rate in Hz")->capture_default_str();
    cmd->add_option("--noise-gyro", a.noise_gyro, "gyro white noise sigma, rad/s")->capture_default_str();
    cmd->add_option("--noise-accel", a.noise_accel, "accelerometer white noise sigma, m/s^2")->capture_default_str();
    cmd->add_option("--seed", a.seed, "noise seed")->capture_default_str();
    cmd->add_option("-o,--out", a.out, "output CSV")->required();
    cmd->add_option("--truth", a.truth, "ground-truth JSON (default: <out>.truth.json)");
}

sim::VehicleConfig load_vehicle(const SimArgs& a) {
    if (!a.config.empty() && !a.preset.empty()) throw UsageError("--config and --preset are exclusive");
    if (a.preset == "hex") return sim::preset_hexarotor();
    if (a.config.empty()) return sim::preset_quadrotor();
    return io::vehicle_from_json(io::read_json_file(a.config));
}

void run_sim(const SimArgs& a, const sim::VehicleConfig& cfg, const sim::Scenario& scenario) {
    const sim::SimResult res = sim::simulate(cfg, scenario, a.rate, {a.noise_gyro, a.noise_accel}, a.seed);
    io::write_file_atomic(a.out, csv::to_string(res.log));
    std::string truth = a.truth;
    if (truth.empty()) truth = std::filesystem::path(a.out).replace_extension(".truth.json").string();
    emit(io::to_json(res.truth), truth);
    std::cout << "wrote " << a.out << " (" << res.log.size() << " samples, " << cfg.m() << " motors) and " << truth
              << "\n";
}

// ---- estimate offset ---------------------------------------------------------

struct OffsetArgs {
    std::vector<std::string> logs;
    std::string segment{"auto"};
    double cutoff{30.0};
    double accel_thresh{1.5};
    double min_len{0.3};
    double trim{0.05};
    bool rls{false};
    double forgetting{1.0};
    double weak_ratio{100.0};
    std::string out;
};

void estimate_offset(const OffsetArgs& a) {
    OffsetPipelineOptions opts;
    opts.mode = a.segment == "full" ? SegmentMode::Full : SegmentMode::Auto;
    opts.rows.cutoff_hz = a.cutoff;
    opts.rows.trim_s = a.trim;
    opts.freefall.accel_thresh = a.accel_thresh;
    opts.freefall.min_len = a.min_len;

    NormalEquations acc;
    std::vector<RegressorRow> all_rows;
    std::ostream& rep = report(a.out);
    for (const std::string& path : a.logs) {
        const SensorLog log = csv::read_file(path);
        const LogAccumulation la = accumulate_log(log, opts);
        if (la.segments.empty()) throw Error(ErrorKind::NoFreefall, path + ": |a| never below --accel-thresh for --min-len");
        for (const Segment& s : la.segments) {
            rep << path << ": segment t=[" << fmt(log.rows[s.begin].t, 4) << ", " << fmt(log.rows[s.end - 1].t, 4)
                << "] s, mean |omega| " << fmt(s.mean_omega, 4) << " rad/s\n";
            if (a.rls) {
                auto rows = segment_rows(log, s, opts.rows);
                all_rows.insert(all_rows.end(), rows.begin(), rows.end());
            }
        }
        acc += la.acc;
    }

    OffsetEstimate est;
    if (a.rls) {
        est = solve_rls(all_rows, {a.forgetting, 1.0});
    } else {
        est = solve_ls(acc, opts.ls);
    }
    const ConfidenceEllipsoid ell = confidence_ellipsoid(est);

    rep << "r_hat [m]: " << fmt_vec(est.r_hat, 6) << "\n";
    rep << "95% semi-axes [mm]: " << fmt(ell.semi_axes[0] * 1e3, 4) << ", " << fmt(ell.semi_axes[1] * 1e3, 4) << ", "
        << fmt(ell.semi_axes[2] * 1e3, 4) << "\n";
    const Vec3 sd = est.covariance.diagonal().cwiseSqrt() * std::sqrt(chi_squared_quantile(0.95, 3.0));
    rep << "per-axis 95% half-width x/y/z [mm]: " << fmt(sd.x() * 1e3, 4) << ", " << fmt(sd.y() * 1e3, 4) << ", "
        << fmt(sd.z() * 1e3, 4) << "\n";
    rep << "condition number: " << fmt(est.condition_number, 4) << "\n";
    if (ell.semi_axes[2] > 0.0 && ell.semi_axes[0] / ell.semi_axes[2] >= a.weak_ratio) {
        std::cerr << "warning: weak excitation along " << fmt_vec(ell.axes_dirs[0], 3) << ", semi-axis "
                  << fmt(ell.semi_axes[0] * 1e3, 4) << " mm is " << fmt(ell.semi_axes[0] / ell.semi_axes[2], 4)
                  << "x the smallest; add a throw spinning about another axis\n";
    }
    emit(io::to_json(est, &ell), a.out);
}

// ---- identify g1 -------------------------------------------------------------

struct IdentifyArgs {
    std::string log;
    std::string offset;
    EffectivenessFitOptions fit;
    std::string out;
};

void identify(const IdentifyArgs& a) {
    const OffsetEstimate off = io::offset_from_json(io::read_json_file(a.offset));
    const SensorLog log = csv::read_file(a.log);
    const ExcitationSchedule sched = schedule_from_log(log, a.fit.active_threshold);
    const EffectivenessFit fit = fit_from_log_detailed(log, off.r_hat, sched, a.fit);
    std::ostream& rep = report(a.out);
    rep << "identified " << fit.model.m() << " motors from " << fit.samples_used << " samples\n";
    emit(io::to_json(fit.model), a.out);
}

// ---- frame solve -------------------------------------------------------------

struct FrameArgs {
    std::string g1;
    SolveOptions solve;
    bool watch{false};
    std::string log;
    std::string offset;
    int budget{3};
    double settle_deg{0.5};
    std::string timeline;
    std::string out;
};

void print_solution(std::ostream& rep, const ThrustFrameSolution& sol) {
    const EulerYPR e = quat_to_euler(sol.q_TU);
    rep << "q_TU: " << fmt(sol.q_TU.w) << " " << fmt(sol.q_TU.x) << "i " << fmt(sol.q_TU.y) << "j " << fmt(sol.q_TU.z)
        << "k\n";
    rep << "yaw/pitch/roll [deg]: " << fmt(e.yaw, 5) << ", " << fmt(e.pitch, 5) << ", " << fmt(e.roll, 5)
        << (e.gimbal_lock ? " (gimbal lock)" : "") << "\n";
    rep << "|u*|^2: " << fmt(sol.u_star.squaredNorm()) << ", lambda " << fmt(sol.lambda) << ", "
        << sol.iterations_used << " iterations" << (sol.converged ? "" : " (not converged)") << "\n";
}

void frame_solve(const FrameArgs& a) {
    std::ostream& rep = report(a.out);
    if (!a.watch) {
        if (a.g1.empty()) throw UsageError("frame solve: --g1 is required");
        const EffectivenessModel model = io::model_from_json(io::read_json_file(a.g1));
        const ThrustFrameSolution sol = solve(model, a.solve);
        print_solution(rep, sol);
        emit(io::to_json(sol), a.out);
        return;
    }

    if (a.log.empty() || a.offset.empty()) throw UsageError("frame solve --watch: --log and --offset are required");
    if (a.budget < 1) throw UsageError("--budget must be at least 1");
    const OffsetEstimate off = io::offset_from_json(io::read_json_file(a.offset));
    const SensorLog log = csv::read_file(a.log);
    const ExcitationSchedule sched = schedule_from_log(log);

    IncrementalThrustFrameSolver inc(a.solve);
    struct Tick {
        double t;
        std::optional<ThrustFrameSolution> sol;
    };
    std::vector<Tick> ticks;
    ticks.reserve(log.size());
    const EffectivenessFit fit = fit_from_log_detailed(log, off.r_hat, sched, {}, [&](double t, const EffectivenessModel& m) {
        ticks.push_back({t, inc.step(m, a.budget)});
    });

    const EffectivenessModel final_model = a.g1.empty() ? fit.model : io::model_from_json(io::read_json_file(a.g1));
    const ThrustFrameSolution ref = solve(final_model, a.solve);

    double last_start = -1.0;
    for (const Pulse& p : sched.pulses) last_start = std::max(last_start, p.t_start);

    // settled: the first tick after which every solution stays within settle_deg of ref
    std::optional<double> settled;
    for (auto it = ticks.rbegin(); it != ticks.rend(); ++it) {
        if (!it->sol || angle_between_deg(it->sol->q_TU, ref.q_TU) > a.settle_deg) break;
        settled = it->t;
    }

    if (!a.timeline.empty()) {
        std::string text = "t,valid,qw,qx,qy,qz,yaw_deg,pitch_deg,roll_deg,err_deg\n";
        for (const Tick& k : ticks) {
            char line[256];
            if (k.sol) {
                const Quaternion& q = k.sol->q_TU;
                const EulerYPR e = quat_to_euler(q);
                std::snprintf(line, sizeof line, "%.6f,1,%.9g,%.9g,%.9g,%.9g,%.6g,%.6g,%.6g,%.6g\n", k.t, q.w, q.x, q.y,
                              q.z, e.yaw, e.pitch, e.roll, angle_between_deg(q, ref.q_TU));
            } else {
                std::snprintf(line, sizeof line, "%.6f,0,,,,,,,,\n", k.t);
            }
            text += line;
        }
        io::write_file_atomic(a.timeline, text);
    }

    rep << "replayed " << ticks.size() << " identification updates, budget " << a.budget << " iterations each\n";
    rep << "last motor excitation starts at t=" << fmt(last_start, 5) << " s\n";
    if (settled) {
        rep << "q_TU within " << fmt(a.settle_deg, 3) << " deg of final from t=" << fmt(*settled, 5) << " s\n";
    } else {
        rep << "q_TU never settled within " << fmt(a.settle_deg, 3) << " deg\n";
    }
    print_solution(rep, ref);

    json j = io::to_json(ref);
    j["watch"] = {{"budget", a.budget},
                  {"updates", ticks.size()},
                  {"last_excitation_start", last_start},
                  {"settle_deg", a.settle_deg},
                  {"settled_at", settled ? json(*settled) : json(nullptr)}};
    emit(j, a.out);
}

// ---- oracle solve ------------------------------------------------------------

struct OracleArgs {
    std::string g1;
    OracleOptions opts;
    std::string weights;
    std::string out;
};

void oracle(const OracleArgs& a) {
    const EffectivenessModel model = io::model_from_json(io::read_json_file(a.g1));
    OracleSolution sol;
    if (a.weights.empty()) {
        sol = oracle_solve(model, a.opts);
    } else {
        const auto w = parse_list(a.weights, "--weights", static_cast<std::size_t>(model.m()));
        sol = oracle_solve(model, Eigen::Map<const Eigen::VectorXd>(w.data(), model.m()), a.opts);
    }
    std::ostream& rep = report(a.out);
    if (sol.feasible) {
        rep << "objective " << fmt(sol.objective, 10) << ", kkt residual " << fmt(sol.kkt_residual, 3) << ", "
            << sol.starts_converged << " starts converged\n";
    } else {
        rep << "no feasible start\n";
    }
    emit(io::to_json(sol), a.out);
}

// ---- bench frame -------------------------------------------------------------

struct BenchArgs {
    std::string motors{"4..32"};
    bench::BenchOptions opts;
    std::string format{"markdown"};
    std::string out;
};

void bench_frame(const BenchArgs& a) {
    bench::BenchOptions opts = a.opts;
    std::tie(opts.m_min, opts.m_max) = parse_range(a.motors);
    if (opts.m_min < 4 || opts.m_max < opts.m_min) throw UsageError("--motors: need 4 <= a <= b");
    if (opts.iters < 10 || opts.reps < 1) throw UsageError("--iters must be >= 10 and --reps >= 1");
    const auto rows = bench::run_frame_benchmark(opts);
    const std::string text = a.format == "csv" ? bench::format_csv(rows) : bench::format_markdown(rows);
    if (a.out.empty()) {
        std::cout << text;
    } else {
        io::write_file_atomic(a.out, text);
    }
}

int exit_code_for(ErrorKind k) { return k == ErrorKind::InvalidArgument ? 1 : 2; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multirotor IMU offset and thrust frame self-calibration"};
    app.require_subcommand(1);

    // sim
    auto* sim_cmd = app.add_subcommand("sim", "simulate sensor logs");
    sim_cmd->require_subcommand(1);

    SimArgs throw_args;
    std::string omega0_throw = "400,400,100";
    double throw_duration = 0.9, throw_height = 0.0, rest_before = 0.5, rest_after = 0.5;
    auto* sim_throw = sim_cmd->add_subcommand("throw", "throw-and-catch in free tumble");
    add_sim_common(sim_throw, throw_args);
    sim_throw->add_option("--omega0", omega0_throw, "initial body rate, deg/s")->capture_default_str();
    sim_throw->add_option("--duration", throw_duration, "airborne time, s")->capture_default_str();
    sim_throw->add_option("--height", throw_height, "apex height in m, overrides --duration");
    sim_throw->add_option("--rest-before", rest_before, "s at rest before release")->capture_default_str();
    sim_throw->add_option("--rest-after", rest_after, "s at rest after the catch")->capture_default_str();

    SimArgs excite_args;
    std::string schedule = "default", omega0_excite = "0,0,0";
    double pulse_len = 0.075, amplitude = 0.5;
    auto* sim_excite = sim_cmd->add_subcommand("excite", "sequential motor pulses");
    add_sim_common(sim_excite, excite_args);
    sim_excite->add_option("--schedule", schedule, "default, quad_default or hex_default")
        ->check(CLI::IsMember({"default", "quad_default", "hex_default"}))
        ->capture_default_str();
    sim_excite->add_option("--pulse", pulse_len, "pulse length per motor, s")->capture_default_str();
    sim_excite->add_option("--amplitude", amplitude, "pulse amplitude")->capture_default_str();
    sim_excite->add_option("--omega0", omega0_excite, "initial body rate, deg/s")->capture_default_str();

    SimArgs rest_args;
    double rest_duration = 1.0;
    std::string attitude = "0,0,0";
    auto* sim_rest = sim_cmd->add_subcommand("rest", "vehicle at rest");
    add_sim_common(sim_rest, rest_args);
    sim_rest->add_option("--duration", rest_duration, "s")->capture_default_str();
    sim_rest->add_option("--attitude", attitude, "yaw,pitch,roll in deg")->capture_default_str();

    std::string cfg_preset = "quad", cfg_out, cfg_imu_quat = "1,0,0,0", cfg_imu_offset = "0,0,0";
    double cfg_roll = 45.0;
    auto* sim_config = sim_cmd->add_subcommand("config", "write a preset vehicle config");
    sim_config->add_option("--preset", cfg_preset, "quad or hex")
        ->check(CLI::IsMember({"quad", "hex"}))
        ->capture_default_str();
    sim_config->add_option("--imu-quat", cfg_imu_quat, "quad: q_TU to be recovered, w,x,y,z")->capture_default_str();
    sim_config->add_option("--imu-offset", cfg_imu_offset, "quad: IMU position in body axes, m")->capture_default_str();
    sim_config->add_option("--roll", cfg_roll, "hex: constellation roll, deg")->capture_default_str();
    sim_config->add_option("-o,--out", cfg_out, "output JSON");

    // estimate
    auto* est_cmd = app.add_subcommand("estimate", "estimate calibration parameters");
    est_cmd->require_subcommand(1);
    OffsetArgs off_args;
    auto* est_offset = est_cmd->add_subcommand("offset", "IMU offset from free-tumble logs");
    est_offset->add_option("--logs", off_args.logs, "one or more log CSVs")->required();
    est_offset->add_option("--segment", off_args.segment, "auto or full")
        ->check(CLI::IsMember({"auto", "full"}))
        ->capture_default_str();
    est_offset->add_option("--cutoff", off_args.cutoff, "low-pass cutoff, Hz")->capture_default_str();
    est_offset->add_option("--accel-thresh", off_args.accel_thresh, "free-fall |a| threshold, m/s^2")
        ->capture_default_str();
    est_offset->add_option("--min-len", off_args.min_len, "shortest free-fall segment, s")->capture_default_str();
    est_offset->add_option("--trim", off_args.trim, "s dropped at each segment start")->capture_default_str();
    est_offset->add_flag("--rls", off_args.rls, "recursive instead of batch solve");
    est_offset->add_option("--forgetting", off_args.forgetting, "RLS forgetting factor")->capture_default_str();
    est_offset->add_option("--weak-ratio", off_args.weak_ratio, "semi-axis ratio that triggers the warning")
        ->capture_default_str();
    est_offset->add_option("-o,--out", off_args.out, "output JSON");

    // identify
    auto* id_cmd = app.add_subcommand("identify", "identify the effectiveness matrix");
    id_cmd->require_subcommand(1);
    IdentifyArgs id_args;
    auto* id_g1 = id_cmd->add_subcommand("g1", "G1 from an excitation log");
    id_g1->add_option("--log", id_args.log, "excitation log CSV")->required();
    id_g1->add_option("--offset", id_args.offset, "offset JSON")->required();
    id_g1->add_option("--settle", id_args.fit.settle_s, "s skipped after each input change")->capture_default_str();
    id_g1->add_option("--forgetting", id_args.fit.forgetting, "RLS forgetting factor")->capture_default_str();
    id_g1->add_option("--cutoff", id_args.fit.cutoff_hz, "low-pass cutoff, Hz")->capture_default_str();
    id_g1->add_option("--u-min", id_args.fit.u_min, "lower input bound")->capture_default_str();
    id_g1->add_option("--u-max", id_args.fit.u_max, "upper input bound")->capture_default_str();
    id_g1->add_option("-o,--out", id_args.out, "output JSON");

    // frame
    auto* frame_cmd = app.add_subcommand("frame", "optimal thrust frame");
    frame_cmd->require_subcommand(1);
    FrameArgs frame_args;
    auto* frame_solve_cmd = frame_cmd->add_subcommand("solve", "solve for q_TU");
    frame_solve_cmd->add_option("--g1", frame_args.g1, "effectiveness JSON");
    frame_solve_cmd->add_option("--g", frame_args.solve.g, "gravity, m/s^2")->capture_default_str();
    frame_solve_cmd->add_option("--max-iters", frame_args.solve.max_iters, "power iterations")->capture_default_str();
    frame_solve_cmd->add_option("--tol", frame_args.solve.tol, "power iteration tolerance")->capture_default_str();
    frame_solve_cmd->add_flag("--watch", frame_args.watch, "replay incremental solving over an identification log");
    frame_solve_cmd->add_option("--log", frame_args.log, "watch: excitation log CSV");
    frame_solve_cmd->add_option("--offset", frame_args.offset, "watch: offset JSON");
    frame_solve_cmd->add_option("--budget", frame_args.budget, "watch: power iterations per update")
        ->capture_default_str();
    frame_solve_cmd->add_option("--settle-deg", frame_args.settle_deg, "watch: convergence band, deg")
        ->capture_default_str();
    frame_solve_cmd->add_option("--timeline", frame_args.timeline, "watch: per-update CSV");
    frame_solve_cmd->add_option("-o,--out", frame_args.out, "output JSON");

    // oracle
    auto* oracle_cmd = app.add_subcommand("oracle", "reference QCQP solver");
    oracle_cmd->require_subcommand(1);
    OracleArgs oracle_args;
    auto* oracle_solve_cmd = oracle_cmd->add_subcommand("solve", "multistart solve");
    oracle_solve_cmd->add_option("--g1", oracle_args.g1, "effectiveness JSON")->required();
    oracle_solve_cmd->add_option("--starts", oracle_args.opts.n_starts, "number of starts")->capture_default_str();
    oracle_solve_cmd->add_option("--seed", oracle_args.opts.seed, "start seed")->capture_default_str();
    oracle_solve_cmd->add_option("--max-iters", oracle_args.opts.max_iters, "iterations per start")
        ->capture_default_str();
    oracle_solve_cmd->add_option("--weights", oracle_args.weights, "diagonal of W, comma-separated");
    oracle_solve_cmd->add_option("--g", oracle_args.opts.g, "gravity, m/s^2")->capture_default_str();
    oracle_solve_cmd->add_option("-o,--out", oracle_args.out, "output JSON");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "timing harness");
    bench_cmd->require_subcommand(1);
    BenchArgs bench_args;
    auto* bench_frame_cmd = bench_cmd->add_subcommand("frame", "per-stage thrust frame timings");
    bench_frame_cmd->add_option("--motors", bench_args.motors, "motor count range a..b")->capture_default_str();
    bench_frame_cmd->add_option("--iters", bench_args.opts.iters, "timed samples per m")->capture_default_str();
    bench_frame_cmd->add_option("--reps", bench_args.opts.reps, "calls per sample")->capture_default_str();
    bench_frame_cmd->add_option("--power-iters", bench_args.opts.power_iters, "fixed power iterations")
        ->capture_default_str();
    bench_frame_cmd->add_option("--seed", bench_args.opts.seed, "model seed")->capture_default_str();
    bench_frame_cmd->add_option("--format", bench_args.format, "markdown or csv")
        ->check(CLI::IsMember({"markdown", "csv"}))
        ->capture_default_str();
    bench_frame_cmd->add_option("-o,--out", bench_args.out, "output file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (sim_throw->parsed()) {
            sim::ThrowScenario sc;
            sc.omega0_deg = parse_vec3(omega0_throw, "--omega0");
            sc.duration = throw_height > 0.0 ? sim::throw_duration_for_height(throw_height) : throw_duration;
            sc.rest_before = rest_before;
            sc.rest_after = rest_after;
            run_sim(throw_args, load_vehicle(throw_args), sc);
        } else if (sim_excite->parsed()) {
            const sim::VehicleConfig cfg = load_vehicle(excite_args);
            const int need = schedule == "quad_default" ? 4 : schedule == "hex_default" ? 6 : cfg.m();
            if (need != cfg.m()) {
                throw UsageError("--schedule " + schedule + " needs " + std::to_string(need) + " motors, config has " +
                                 std::to_string(cfg.m()));
            }
            sim::ExciteScenario sc;
            sc.plan = sim::sequential_plan(sim::opposite_pair_order(cfg.m()), pulse_len, amplitude);
            sc.omega0_deg = parse_vec3(omega0_excite, "--omega0");
            run_sim(excite_args, cfg, sc);
        } else if (sim_rest->parsed()) {
            const Vec3 ypr = parse_vec3(attitude, "--attitude");
            sim::RestScenario sc;
            sc.duration = rest_duration;
            sc.attitude = euler_to_quat({ypr.x(), ypr.y(), ypr.z()});
            run_sim(rest_args, load_vehicle(rest_args), sc);
        } else if (sim_config->parsed()) {
            sim::VehicleConfig cfg;
            if (cfg_preset == "hex") {
                cfg = sim::preset_hexarotor(cfg_roll);
            } else {
                const auto q = parse_list(cfg_imu_quat, "--imu-quat", 4);
                const Quaternion qt{q[0], q[1], q[2], q[3]};
                if (!(qt.norm() > 1e-9)) throw UsageError("--imu-quat: zero quaternion");
                cfg = sim::preset_quadrotor(qt, parse_vec3(cfg_imu_offset, "--imu-offset"));
            }
            emit(io::to_json(cfg), cfg_out);
        } else if (est_offset->parsed()) {
            estimate_offset(off_args);
        } else if (id_g1->parsed()) {
            identify(id_args);
        } else if (frame_solve_cmd->parsed()) {
            frame_solve(frame_args);
        } else if (oracle_solve_cmd->parsed()) {
            oracle(oracle_args);
        } else if (bench_frame_cmd->parsed()) {
            bench_frame(bench_args);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
