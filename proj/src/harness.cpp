#include "twsbr/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace twsbr {

std::optional<double> settling_time(const Trajectory& traj, double band) {
    if (!(band > 0.0)) {
        throw ContractError("settling_time: band must be positive");
    }
    if (traj.samples.empty() || traj.termination != Termination::kHorizon) {
        return std::nullopt;
    }
    // Walk back from the end while the pitch stays inside the band.
    std::size_t first_inside = traj.samples.size();
    for (std::size_t i = traj.samples.size(); i-- > 0;) {
        if (std::abs(traj.samples[i].phi_true) < band) {
            first_inside = i;
        } else {
            break;
        }
    }
    if (first_inside == traj.samples.size()) return std::nullopt;
    return traj.samples[first_inside].t;
}

double settle_distance(const Trajectory& traj, std::optional<double> t_settle,
                       DistanceMode mode) {
    if (traj.samples.empty()) return 0.0;
    const double t_end = t_settle.value_or(traj.samples.back().t);

    if (mode == DistanceMode::kDisplacementAtSettle) {
        const TrajectorySample* at = &traj.samples.back();
        for (const TrajectorySample& s : traj.samples) {
            if (s.t >= t_end) {
                at = &s;
                break;
            }
        }
        return std::abs(at->x);
    }

    double length = 0.0;
    for (const TrajectorySample& s : traj.samples) {
        if (s.t > t_end) break;
        length += std::abs(s.x_dot) * traj.dt;
    }
    return length;
}

namespace {

CellResult summarize_cell(const Trajectory& traj, double phi0, double band,
                          DistanceMode mode) {
    CellResult cell;
    cell.phi0 = phi0;
    cell.settling = settling_time(traj, band);
    cell.distance = settle_distance(traj, cell.settling, mode);
    for (const TrajectorySample& s : traj.samples) {
        cell.max_abs_phi = std::max(cell.max_abs_phi, std::abs(s.phi_true));
    }
    cell.termination = traj.termination;
    return cell;
}

void finalize_stats(ControllerStats& stats, double horizon_s) {
    double sum_settle = 0.0;
    double sum_dist = 0.0;
    for (const CellResult& cell : stats.cells) {
        sum_settle += cell.settling.value_or(horizon_s);
        sum_dist += cell.distance;
        stats.max_abs_phi = std::max(stats.max_abs_phi, cell.max_abs_phi);
        if (!cell.settling.has_value()) ++stats.unsettled;
        if (cell.termination == Termination::kFell) ++stats.falls;
    }
    const double n = static_cast<double>(stats.cells.size());
    stats.mean_settling = sum_settle / n;
    stats.mean_distance = sum_dist / n;
}

std::string cell_file_name(const std::string& controller, std::size_t index) {
    std::ostringstream name;
    name << "traj_" << controller << "_" << index << ".txt";
    return name.str();
}

}  // namespace

ComparisonReport compare(const PidGains& gains, const PolicyModel& model,
                         const SimConfig& cfg, const CompareConfig& cc) {
    if (cc.grid.empty()) {
        throw ConfigError("compare: empty initial-condition grid");
    }

    ComparisonReport report;
    report.grid = cc.grid;
    report.settling_band = cc.settling_band;
    report.horizon_s = cfg.horizon_s;
    report.pid.controller = "pid";
    report.rl.controller = "rl";

    const bool write_files = !cc.out_dir.empty();
    if (write_files) {
        std::filesystem::create_directories(cc.out_dir);
    }

    for (std::size_t i = 0; i < cc.grid.size(); ++i) {
        const double phi0 = cc.grid[i];
        // Matched seeding: both controllers see the same noise stream.
        SimConfig cell_cfg = cfg;
        cell_cfg.seed = cfg.seed + 1000003ULL * static_cast<std::uint64_t>(i);

        RobotState initial;
        initial.phi = phi0;

        Trajectory pid_traj = run_pid_episode(initial, gains, Setpoint{}, cell_cfg);
        Trajectory rl_traj =
            run_rl_episode(model, initial, cell_cfg, cc.position_penalty);
        pid_traj.config_hash = cc.config_hash;
        rl_traj.config_hash = cc.config_hash;

        CellResult pid_cell =
            summarize_cell(pid_traj, phi0, cc.settling_band, cc.distance_mode);
        CellResult rl_cell =
            summarize_cell(rl_traj, phi0, cc.settling_band, cc.distance_mode);

        if (write_files) {
            pid_cell.trajectory_file = cell_file_name("pid", i);
            rl_cell.trajectory_file = cell_file_name("rl", i);
            write_trajectory(pid_traj,
                             (std::filesystem::path(cc.out_dir) /
                              pid_cell.trajectory_file).string());
            write_trajectory(rl_traj,
                             (std::filesystem::path(cc.out_dir) /
                              rl_cell.trajectory_file).string());
        }
        report.pid.cells.push_back(pid_cell);
        report.rl.cells.push_back(rl_cell);
    }

    finalize_stats(report.pid, cfg.horizon_s);
    finalize_stats(report.rl, cfg.horizon_s);
    report.delta_settling = report.pid.mean_settling - report.rl.mean_settling;
    report.delta_distance = report.pid.mean_distance - report.rl.mean_distance;

    if (write_files) {
        write_report(report,
                     (std::filesystem::path(cc.out_dir) / "report.txt").string());
    }
    return report;
}

void write_trajectory(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("write_trajectory: cannot open " + path);
    }
    out.precision(17);
    out << "# controller=" << traj.controller << " seed=" << traj.seed
        << " config=" << traj.config_hash << " dt=" << traj.dt
        << " termination=" << to_string(traj.termination) << "\n";
    out << "t phi_true phi_est x x_dot u reward\n";
    for (const TrajectorySample& s : traj.samples) {
        out << s.t << ' ' << s.phi_true << ' ' << s.phi_est << ' ' << s.x << ' '
            << s.x_dot << ' ' << s.u << ' ' << s.reward << "\n";
    }
}

Trajectory read_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("read_trajectory: cannot open " + path);
    }

    Trajectory traj;
    bool header_seen = false;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream meta(line.substr(1));
            std::string field;
            while (meta >> field) {
                const auto eq = field.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = field.substr(0, eq);
                const std::string value = field.substr(eq + 1);
                if (key == "controller") traj.controller = value;
                else if (key == "seed") traj.seed = std::stoull(value);
                else if (key == "config") traj.config_hash = std::stoull(value);
                else if (key == "dt") traj.dt = std::stod(value);
                else if (key == "termination") {
                    const auto term = termination_from_string(value);
                    if (!term) {
                        throw ConfigError("read_trajectory: bad termination '" +
                                          value + "'");
                    }
                    traj.termination = *term;
                }
            }
            continue;
        }
        if (!header_seen) {
            // Column-header line.
            header_seen = true;
            continue;
        }
        std::istringstream row(line);
        TrajectorySample s;
        if (!(row >> s.t >> s.phi_true >> s.phi_est >> s.x >> s.x_dot >> s.u >>
              s.reward)) {
            throw ConfigError("read_trajectory: malformed sample line");
        }
        traj.samples.push_back(s);
    }
    if (traj.samples.empty()) {
        throw ConfigError("read_trajectory: no samples in " + path);
    }
    return traj;
}

namespace {

void write_stats(std::ostream& out, const ControllerStats& stats) {
    out << "[" << stats.controller << "]\n";
    out << "mean_settling_time = " << stats.mean_settling << "\n";
    out << "mean_settle_distance = " << stats.mean_distance << "\n";
    out << "max_abs_phi = " << stats.max_abs_phi << "\n";
    out << "falls = " << stats.falls << "\n";
    out << "unsettled = " << stats.unsettled << "\n";
    for (const CellResult& cell : stats.cells) {
        out << "cell phi0=" << cell.phi0 << " settling=";
        if (cell.settling) {
            out << *cell.settling;
        } else {
            out << "unsettled";
        }
        out << " distance=" << cell.distance
            << " max_abs_phi=" << cell.max_abs_phi
            << " termination=" << to_string(cell.termination);
        if (!cell.trajectory_file.empty()) {
            out << " file=" << cell.trajectory_file;
        }
        out << "\n";
    }
}

}  // namespace

void write_report(const ComparisonReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("write_report: cannot open " + path);
    }
    out.precision(17);
    out << "[grid]\n";
    out << "phi0 =";
    for (double v : report.grid) out << ' ' << v;
    out << "\n";
    out << "settling_band = " << report.settling_band << "\n";
    out << "horizon_s = " << report.horizon_s << "\n";
    write_stats(out, report.pid);
    write_stats(out, report.rl);
    out << "[delta]\n";
    out << "settling_time = " << report.delta_settling << "\n";
    out << "settle_distance = " << report.delta_distance << "\n";
}

std::uint64_t fnv1a_hash(const std::string& text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

}  // namespace twsbr
